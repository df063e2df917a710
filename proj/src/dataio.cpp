#include "slh/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace slh {

namespace {

constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::uint32_t kCodeVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

void append_u32(std::string& out, std::uint32_t v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void append_u64(std::string& out, std::uint64_t v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
public:
    Reader(const std::filesystem::path& path) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError(IoErrc::io_failure, "cannot open " + path_);
        std::ostringstream buf;
        buf << in.rdbuf();
        data_ = std::move(buf).str();
    }

    void raw(void* dst, std::size_t len) {
        if (pos_ + len > data_.size()) {
            throw IoError(IoErrc::truncated, path_ + ": truncated payload");
        }
        std::memcpy(dst, data_.data() + pos_, len);
        pos_ += len;
    }

    std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }

    void expect_magic(const char expected[4]) {
        char m[4];
        raw(m, 4);
        if (std::memcmp(m, expected, 4) != 0) {
            throw IoError(IoErrc::bad_magic, path_ + ": bad magic");
        }
    }

    bool at_end() const { return pos_ == data_.size(); }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::string data_;
    std::size_t pos_ = 0;
};

Matrix load_features_binary(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("SLHF");
    if (r.u32() != kFeatureVersion) {
        throw IoError(IoErrc::bad_version, r.path() + ": unsupported SLHF version");
    }
    const std::uint64_t rows = r.u32();
    const std::uint64_t cols = r.u32();
    if (rows * cols > (std::uint64_t(1) << 31)) {
        throw IoError(IoErrc::dimension_overflow, r.path() + ": dimensions too large");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i) {
        for (std::uint64_t j = 0; j < cols; ++j) {
            float v;
            r.raw(&v, sizeof v);
            if (!std::isfinite(v)) {
                throw IoError(IoErrc::bad_value, r.path() + ": non-finite feature value");
            }
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return m;
}

Matrix load_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrc::io_failure, "cannot open " + path.string());
    std::vector<std::vector<double>> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) comma = line.size();
            const char* first = line.data() + start;
            const char* last = line.data() + comma;
            while (first < last && *first == ' ') ++first;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(first, last, v);
            while (ptr < last && *ptr == ' ') ++ptr;
            if (ec != std::errc() || ptr != last) {
                throw IoError(IoErrc::bad_value,
                              path.string() + ": non-numeric CSV cell at line " +
                                  std::to_string(samples.size() + 1));
            }
            row.push_back(v);
            start = comma + 1;
        }
        if (!samples.empty() && row.size() != samples.front().size()) {
            throw IoError(IoErrc::bad_value,
                          path.string() + ": ragged CSV row at line " +
                              std::to_string(samples.size() + 1));
        }
        samples.push_back(std::move(row));
    }
    if (samples.empty()) {
        throw IoError(IoErrc::truncated, path.string() + ": empty CSV file");
    }
    // One line per sample, so lines become columns.
    const Eigen::Index dim = static_cast<Eigen::Index>(samples.front().size());
    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    Matrix m(dim, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            m(i, j) = samples[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        }
    }
    return m;
}

}  // namespace

Matrix load_features(const std::filesystem::path& path, FeatureFormat format) {
    Matrix m = format == FeatureFormat::binary ? load_features_binary(path)
                                               : load_features_csv(path);
    require_finite(m, "load_features");
    return m;
}

void save_features(const Matrix& features, const std::filesystem::path& path) {
    require_finite(features, "save_features");
    const auto rows = features.rows();
    const auto cols = features.cols();
    if (rows > std::numeric_limits<std::uint32_t>::max() ||
        cols > std::numeric_limits<std::uint32_t>::max()) {
        throw IoError(IoErrc::dimension_overflow, "save_features: dimensions exceed u32");
    }
    std::string out;
    out.reserve(16 + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4);
    out.append("SLHF", 4);
    append_u32(out, kFeatureVersion);
    append_u32(out, static_cast<std::uint32_t>(rows));
    append_u32(out, static_cast<std::uint32_t>(cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const float v = static_cast<float>(features(i, j));
            if (!std::isfinite(v)) {
                throw IoError(IoErrc::bad_value,
                              "save_features: value not representable as float32");
            }
            out.append(reinterpret_cast<const char*>(&v), sizeof v);
        }
    }
    write_file_atomic(path, out);
}

std::vector<int> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrc::io_failure, "cannot open " + path.string());
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        int v = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc() || ptr != line.data() + line.size() || v < 0) {
            throw IoError(IoErrc::bad_value,
                          path.string() + ": bad class id at line " +
                              std::to_string(labels.size() + 1));
        }
        labels.push_back(v);
    }
    if (labels.empty()) {
        throw IoError(IoErrc::truncated, path.string() + ": no labels");
    }
    return labels;
}

void save_labels(const std::vector<int>& labels, const std::filesystem::path& path) {
    std::string out;
    for (int v : labels) {
        out += std::to_string(v);
        out += '\n';
    }
    write_file_atomic(path, out);
}

LabelMatrix build_label_matrix(const std::vector<int>& labels, int num_classes) {
    if (num_classes < 2) {
        throw std::invalid_argument("build_label_matrix: need at least 2 classes");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
    LabelMatrix lm;
    lm.y = Matrix::Constant(num_classes, n, -1.0);
    for (Eigen::Index j = 0; j < n; ++j) {
        const int id = labels[static_cast<std::size_t>(j)];
        if (id < 0 || id >= num_classes) {
            throw std::invalid_argument("build_label_matrix: class id " +
                                        std::to_string(id) + " out of range");
        }
        lm.y(id, j) = 1.0;
    }
    return lm;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    if (!(spec.query_fraction > 0.0 && spec.query_fraction < 1.0)) {
        throw std::invalid_argument("split: query_fraction must be in (0,1)");
    }
    const Eigen::Index n = ds.n();
    if (static_cast<Eigen::Index>(ds.labels.size()) != n) {
        throw std::invalid_argument("split: label count does not match samples");
    }

    std::vector<std::vector<Eigen::Index>> by_class(
        static_cast<std::size_t>(ds.num_classes));
    for (Eigen::Index j = 0; j < n; ++j) {
        by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(j)])]
            .push_back(j);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() == 1) {
            throw std::invalid_argument(
                "split: class " + std::to_string(c) +
                " has a single sample and cannot be stratified");
        }
    }

    // Largest-remainder allocation hits round(fraction*n) queries exactly
    // while capping each class at size-1 so the database keeps every class.
    const Eigen::Index want =
        static_cast<Eigen::Index>(std::llround(spec.query_fraction * static_cast<double>(n)));
    std::vector<Eigen::Index> take(by_class.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    Eigen::Index assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const double exact = spec.query_fraction * static_cast<double>(by_class[c].size());
        take[c] = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(exact)),
                                         static_cast<Eigen::Index>(by_class[c].size()) - 1);
        assigned += take[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [frac, c] : remainders) {
        if (assigned >= want) break;
        if (take[c] + 1 <= static_cast<Eigen::Index>(by_class[c].size()) - 1) {
            ++take[c];
            ++assigned;
        }
    }
    if (assigned < 1 || n - assigned < 1) {
        throw std::invalid_argument("split: resulting partition would be empty");
    }

    Rng rng(spec.seed);
    std::vector<Eigen::Index> query_idx;
    std::vector<Eigen::Index> db_idx;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto members = by_class[c];
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (static_cast<Eigen::Index>(i) < take[c]) {
                query_idx.push_back(members[i]);
            } else {
                db_idx.push_back(members[i]);
            }
        }
    }
    std::sort(query_idx.begin(), query_idx.end());
    std::sort(db_idx.begin(), db_idx.end());

    auto subset = [&](const std::vector<Eigen::Index>& idx) {
        Dataset out;
        out.num_classes = ds.num_classes;
        out.features.resize(ds.feature_dim(), static_cast<Eigen::Index>(idx.size()));
        out.labels.reserve(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.features.col(static_cast<Eigen::Index>(i)) = ds.features.col(idx[i]);
            out.labels.push_back(ds.labels[static_cast<std::size_t>(idx[i])]);
        }
        return out;
    };
    return {subset(query_idx), subset(db_idx)};
}

std::vector<std::uint8_t> pack_code_bytes(const CodeMatrix& codes) {
    const Eigen::Index bits = codes.bits();
    const Eigen::Index n = codes.n();
    const std::size_t stride = static_cast<std::size_t>((bits + 7) / 8);
    std::vector<std::uint8_t> out(stride * static_cast<std::size_t>(n), 0);
    for (Eigen::Index j = 0; j < n; ++j) {
        std::uint8_t* sample = out.data() + stride * static_cast<std::size_t>(j);
        for (Eigen::Index i = 0; i < bits; ++i) {
            const double v = codes.h(i, j);
            if (v != 1.0 && v != -1.0) {
                throw std::invalid_argument("pack_code_bytes: entries must be exactly +/-1");
            }
            if (v > 0.0) {
                sample[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
            }
        }
    }
    return out;
}

CodeMatrix unpack_code_bytes(const std::vector<std::uint8_t>& bytes,
                             Eigen::Index bits, Eigen::Index n) {
    const std::size_t stride = static_cast<std::size_t>((bits + 7) / 8);
    if (bytes.size() != stride * static_cast<std::size_t>(n)) {
        throw std::invalid_argument("unpack_code_bytes: payload size mismatch");
    }
    CodeMatrix out;
    out.h.resize(bits, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const std::uint8_t* sample = bytes.data() + stride * static_cast<std::size_t>(j);
        for (Eigen::Index i = 0; i < bits; ++i) {
            out.h(i, j) = (sample[i / 8] >> (i % 8)) & 1u ? 1.0 : -1.0;
        }
    }
    return out;
}

void save_codes(const CodeMatrix& codes, const std::filesystem::path& path) {
    if (codes.bits() > std::numeric_limits<std::uint32_t>::max()) {
        throw IoError(IoErrc::dimension_overflow, "save_codes: code length exceeds u32");
    }
    std::string out;
    out.append("SLHC", 4);
    append_u32(out, kCodeVersion);
    append_u32(out, static_cast<std::uint32_t>(codes.bits()));
    append_u64(out, static_cast<std::uint64_t>(codes.n()));
    const auto bytes = pack_code_bytes(codes);
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    write_file_atomic(path, out);
}

CodeMatrix load_codes(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("SLHC");
    if (r.u32() != kCodeVersion) {
        throw IoError(IoErrc::bad_version, r.path() + ": unsupported SLHC version");
    }
    const std::uint64_t bits = r.u32();
    const std::uint64_t n = r.u64();
    if (bits < 1 || bits * n > (std::uint64_t(1) << 36)) {
        throw IoError(IoErrc::dimension_overflow, r.path() + ": dimensions too large");
    }
    const std::size_t stride = static_cast<std::size_t>((bits + 7) / 8);
    std::vector<std::uint8_t> bytes(stride * static_cast<std::size_t>(n));
    r.raw(bytes.data(), bytes.size());
    return unpack_code_bytes(bytes, static_cast<Eigen::Index>(bits),
                             static_cast<Eigen::Index>(n));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    fs::path dir = path.parent_path();
    if (dir.empty()) dir = ".";
    fs::path tmp = dir / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError(IoErrc::io_failure, "cannot open " + tmp.string() + " for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError(IoErrc::io_failure, "short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ec2;
        fs::remove(tmp, ec2);
        throw IoError(IoErrc::io_failure,
                      "cannot rename " + tmp.string() + " to " + path.string());
    }
}

Dataset make_blobs(int num_classes, Eigen::Index n, Eigen::Index feature_dim,
                   std::uint64_t seed, double center_scale, double noise) {
    if (num_classes < 2 || n < num_classes) {
        throw std::invalid_argument("make_blobs: need n >= num_classes >= 2");
    }
    Rng rng(seed);
    Matrix centers = gaussian_matrix(feature_dim, num_classes, rng) * center_scale;
    Dataset ds;
    ds.num_classes = num_classes;
    ds.features.resize(feature_dim, n);
    ds.labels.resize(static_cast<std::size_t>(n));
    std::normal_distribution<double> normal(0.0, noise);
    for (Eigen::Index j = 0; j < n; ++j) {
        const int cls = static_cast<int>(j % num_classes);
        ds.labels[static_cast<std::size_t>(j)] = cls;
        for (Eigen::Index i = 0; i < feature_dim; ++i) {
            ds.features(i, j) = centers(i, cls) + normal(rng);
        }
    }
    return ds;
}

}  // namespace slh
