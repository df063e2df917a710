#pragma once

#include "slh/dataio.hpp"
#include "slh/matrixkit.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace slh {

// Codes packed into 64-bit words for XOR+popcount distances. Word w, bit k
// addresses code position 64*w + k, matching the SLHC byte layout.
struct PackedCodes {
    Eigen::Index n = 0;
    Eigen::Index bits = 0;
    Eigen::Index words_per_code = 0;
    std::vector<std::uint64_t> words;

    const std::uint64_t* code(Eigen::Index i) const {
        return words.data() + static_cast<std::size_t>(i * words_per_code);
    }
};

PackedCodes pack_codes(const CodeMatrix& codes);
CodeMatrix unpack_codes(const PackedCodes& packed);

// Number of differing positions; requires equal code length.
int hamming_distance(const PackedCodes& a, Eigen::Index i, const PackedCodes& b,
                     Eigen::Index j);

// Database indices by ascending distance, ties by ascending index.
std::vector<Eigen::Index> rank_database(const PackedCodes& queries,
                                        Eigen::Index query_index,
                                        const PackedCodes& db);

// (sum of precision at each relevant rank) / (number of relevant items);
// 0 when nothing is relevant.
double average_precision(const std::vector<int>& relevance);

// Mean AP over the per-query ranked lists truncated at the Hamming radius;
// an empty (or all-irrelevant) radius set contributes 0.
double map_at_radius(const PackedCodes& queries, const PackedCodes& db,
                     const std::vector<int>& query_labels,
                     const std::vector<int>& db_labels, int radius = 2);

struct QueryMetrics {
    double ap = 0.0;
    double ap_h2 = 0.0;
    double precision_at_k = 0.0;
};

struct EvalReport {
    double map = 0.0;
    double map_at_h2 = 0.0;
    double precision_at_k = 0.0;
    Eigen::Index k = 0;
    Eigen::Index n_queries = 0;
    Eigen::Index n_database = 0;
    Eigen::Index code_length = 0;
    std::optional<std::vector<QueryMetrics>> per_query;
};

// Full-ranking mAP, mAP@H<=2 and precision@K with label equality as the
// relevance ground truth.
EvalReport evaluate(const PackedCodes& query_codes, const PackedCodes& db_codes,
                    const std::vector<int>& query_labels,
                    const std::vector<int>& db_labels, Eigen::Index k = 100,
                    bool keep_per_query = false);

std::string report_to_json(const EvalReport& report);
std::string per_query_csv(const EvalReport& report);

// Sign of a seeded random row-orthonormal projection of mean-centered
// features; the unsupervised yardstick.
CodeMatrix baseline_random_rotation(const Matrix& features, Eigen::Index bits,
                                    std::uint64_t seed);

}  // namespace slh
