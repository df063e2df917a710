#pragma once

#include "slh/matrixkit.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace slh {

// Features are stored one column per sample: an m x n matrix holds n samples
// of m raw feature dimensions.
struct Dataset {
    Matrix features;
    std::vector<int> labels;  // class ids in [0, c)
    int num_classes = 0;

    Eigen::Index n() const { return features.cols(); }
    Eigen::Index feature_dim() const { return features.rows(); }
};

// c x n matrix over {-1,+1}; column j carries +1 exactly at the class row of
// sample j.
struct LabelMatrix {
    Matrix y;

    Eigen::Index num_classes() const { return y.rows(); }
    Eigen::Index n() const { return y.cols(); }
};

// L x n matrix over {-1,+1}.
struct CodeMatrix {
    Matrix h;

    Eigen::Index bits() const { return h.rows(); }
    Eigen::Index n() const { return h.cols(); }
};

struct SplitSpec {
    double query_fraction = 0.1;  // in (0, 1)
    std::uint64_t seed = 0;
};

enum class IoErrc {
    io_failure,
    bad_magic,
    bad_version,
    truncated,
    dimension_overflow,
    bad_value,
};

class IoError : public std::runtime_error {
public:
    IoError(IoErrc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}
    IoErrc code() const { return code_; }

private:
    IoErrc code_;
};

enum class FeatureFormat { binary, csv };

// SLHF container: magic "SLHF", u32 version=1, u32 rows, u32 cols, then
// rows*cols little-endian float32 in row-major order. Values widen to double
// on load.
Matrix load_features(const std::filesystem::path& path, FeatureFormat format);
void save_features(const Matrix& features, const std::filesystem::path& path);

// One decimal class id per line, LF newlines.
std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<int>& labels, const std::filesystem::path& path);

// Throws if any id is outside [0, c).
LabelMatrix build_label_matrix(const std::vector<int>& labels, int num_classes);

// Deterministic stratified split; every class keeps at least one database
// sample. A single-sample class is an error (named in the message).
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// SLHC container: magic "SLHC", u32 version=1, u32 L, u64 n, then per sample
// ceil(L/8) bytes, LSB-first within each byte, +1 stored as bit 1.
void save_codes(const CodeMatrix& codes, const std::filesystem::path& path);
CodeMatrix load_codes(const std::filesystem::path& path);

// In-memory encode/decode of the SLHC byte layout, shared with PackedCodes.
std::vector<std::uint8_t> pack_code_bytes(const CodeMatrix& codes);
CodeMatrix unpack_code_bytes(const std::vector<std::uint8_t>& bytes,
                             Eigen::Index bits, Eigen::Index n);

// Writes via a temporary file in the same directory plus an atomic rename; a
// failed write leaves nothing behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

// Seeded Gaussian class blobs: k centers in feature_dim dimensions, samples
// round-robin over classes. Test and bench data only.
Dataset make_blobs(int num_classes, Eigen::Index n, Eigen::Index feature_dim,
                   std::uint64_t seed, double center_scale = 4.0,
                   double noise = 1.0);

}  // namespace slh
