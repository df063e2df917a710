#include "slh/eval.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace slh {

PackedCodes pack_codes(const CodeMatrix& codes) {
    PackedCodes out;
    out.n = codes.n();
    out.bits = codes.bits();
    out.words_per_code = (codes.bits() + 63) / 64;
    out.words.assign(static_cast<std::size_t>(out.n * out.words_per_code), 0);
    for (Eigen::Index j = 0; j < out.n; ++j) {
        std::uint64_t* w = out.words.data() +
                           static_cast<std::size_t>(j * out.words_per_code);
        for (Eigen::Index i = 0; i < out.bits; ++i) {
            const double v = codes.h(i, j);
            if (v != 1.0 && v != -1.0) {
                throw std::invalid_argument("pack_codes: entries must be exactly +/-1");
            }
            if (v > 0.0) w[i / 64] |= std::uint64_t{1} << (i % 64);
        }
    }
    return out;
}

CodeMatrix unpack_codes(const PackedCodes& packed) {
    CodeMatrix out;
    out.h.resize(packed.bits, packed.n);
    for (Eigen::Index j = 0; j < packed.n; ++j) {
        const std::uint64_t* w = packed.code(j);
        for (Eigen::Index i = 0; i < packed.bits; ++i) {
            out.h(i, j) = (w[i / 64] >> (i % 64)) & 1u ? 1.0 : -1.0;
        }
    }
    return out;
}

int hamming_distance(const PackedCodes& a, Eigen::Index i, const PackedCodes& b,
                     Eigen::Index j) {
    if (a.bits != b.bits) {
        throw std::invalid_argument("hamming_distance: code length mismatch");
    }
    const std::uint64_t* wa = a.code(i);
    const std::uint64_t* wb = b.code(j);
    int dist = 0;
    for (Eigen::Index w = 0; w < a.words_per_code; ++w) {
        dist += std::popcount(wa[w] ^ wb[w]);
    }
    return dist;
}

namespace {

// Counting sort over distances keeps ties in ascending index order for free.
std::vector<Eigen::Index> rank_by_distance(const std::vector<int>& dist,
                                           int max_dist) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(max_dist) + 2, 0);
    for (int d : dist) ++counts[static_cast<std::size_t>(d) + 1];
    for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
    std::vector<Eigen::Index> order(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        order[static_cast<std::size_t>(
            counts[static_cast<std::size_t>(dist[i])]++)] =
            static_cast<Eigen::Index>(i);
    }
    return order;
}

std::vector<int> distances_to_db(const PackedCodes& queries, Eigen::Index qi,
                                 const PackedCodes& db) {
    std::vector<int> dist(static_cast<std::size_t>(db.n));
    for (Eigen::Index j = 0; j < db.n; ++j) {
        dist[static_cast<std::size_t>(j)] = hamming_distance(queries, qi, db, j);
    }
    return dist;
}

}  // namespace

std::vector<Eigen::Index> rank_database(const PackedCodes& queries,
                                        Eigen::Index query_index,
                                        const PackedCodes& db) {
    const std::vector<int> dist = distances_to_db(queries, query_index, db);
    return rank_by_distance(dist, static_cast<int>(queries.bits));
}

double average_precision(const std::vector<int>& relevance) {
    if (relevance.empty()) {
        throw std::invalid_argument("average_precision: empty ranking");
    }
    int hits = 0;
    double sum = 0.0;
    for (std::size_t p = 0; p < relevance.size(); ++p) {
        if (relevance[p]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(p + 1);
        }
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

namespace {

QueryMetrics query_metrics(const PackedCodes& queries, Eigen::Index qi,
                           const PackedCodes& db,
                           const std::vector<int>& query_labels,
                           const std::vector<int>& db_labels, int radius,
                           Eigen::Index k) {
    const std::vector<int> dist = distances_to_db(queries, qi, db);
    const std::vector<Eigen::Index> order =
        rank_by_distance(dist, static_cast<int>(queries.bits));
    const int label = query_labels[static_cast<std::size_t>(qi)];

    std::vector<int> relevance(order.size());
    std::size_t within_radius = 0;
    for (std::size_t p = 0; p < order.size(); ++p) {
        relevance[p] =
            db_labels[static_cast<std::size_t>(order[p])] == label ? 1 : 0;
        if (dist[static_cast<std::size_t>(order[p])] <= radius) {
            within_radius = p + 1;  // ranking is distance-sorted, so a prefix
        }
    }

    QueryMetrics m;
    m.ap = average_precision(relevance);
    if (within_radius > 0) {
        const std::vector<int> truncated(relevance.begin(),
                                         relevance.begin() +
                                             static_cast<std::ptrdiff_t>(within_radius));
        m.ap_h2 = average_precision(truncated);
    }
    if (k > 0) {
        int hits = 0;
        for (std::size_t p = 0; p < static_cast<std::size_t>(k); ++p) {
            hits += relevance[p];
        }
        m.precision_at_k = static_cast<double>(hits) / static_cast<double>(k);
    }
    return m;
}

}  // namespace

double map_at_radius(const PackedCodes& queries, const PackedCodes& db,
                     const std::vector<int>& query_labels,
                     const std::vector<int>& db_labels, int radius) {
    double total = 0.0;
    for (Eigen::Index qi = 0; qi < queries.n; ++qi) {
        total += query_metrics(queries, qi, db, query_labels, db_labels, radius, 0)
                     .ap_h2;
    }
    return queries.n == 0 ? 0.0 : total / static_cast<double>(queries.n);
}

EvalReport evaluate(const PackedCodes& query_codes, const PackedCodes& db_codes,
                    const std::vector<int>& query_labels,
                    const std::vector<int>& db_labels, Eigen::Index k,
                    bool keep_per_query) {
    if (static_cast<Eigen::Index>(query_labels.size()) != query_codes.n ||
        static_cast<Eigen::Index>(db_labels.size()) != db_codes.n) {
        throw std::invalid_argument("evaluate: label/code count mismatch");
    }
    if (k < 1 || k > db_codes.n) {
        throw std::invalid_argument("evaluate: k must be in [1, database size]");
    }

    EvalReport report;
    report.k = k;
    report.n_queries = query_codes.n;
    report.n_database = db_codes.n;
    report.code_length = query_codes.bits;

    std::vector<QueryMetrics> per_query;
    per_query.reserve(static_cast<std::size_t>(query_codes.n));
    for (Eigen::Index qi = 0; qi < query_codes.n; ++qi) {
        per_query.push_back(
            query_metrics(query_codes, qi, db_codes, query_labels, db_labels, 2, k));
    }
    for (const QueryMetrics& m : per_query) {
        report.map += m.ap;
        report.map_at_h2 += m.ap_h2;
        report.precision_at_k += m.precision_at_k;
    }
    const double nq = std::max<double>(1.0, static_cast<double>(query_codes.n));
    report.map /= nq;
    report.map_at_h2 /= nq;
    report.precision_at_k /= nq;
    if (keep_per_query) report.per_query = std::move(per_query);
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["map"] = report.map;
    j["map_at_h2"] = report.map_at_h2;
    j["precision_at_k"] = report.precision_at_k;
    j["k"] = report.k;
    j["n_queries"] = report.n_queries;
    j["n_database"] = report.n_database;
    j["code_length"] = report.code_length;
    return j.dump();
}

std::string per_query_csv(const EvalReport& report) {
    std::string out = "query_index,ap,ap_h2,prec_k\n";
    if (!report.per_query) return out;
    char line[128];
    for (std::size_t i = 0; i < report.per_query->size(); ++i) {
        const QueryMetrics& m = (*report.per_query)[i];
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", i, m.ap, m.ap_h2,
                      m.precision_at_k);
        out += line;
    }
    return out;
}

CodeMatrix baseline_random_rotation(const Matrix& features, Eigen::Index bits,
                                    std::uint64_t seed) {
    require_finite(features, "baseline_random_rotation features");
    if (bits > features.rows()) {
        throw std::invalid_argument(
            "baseline_random_rotation: code length exceeds feature dimension");
    }
    const Vector mean = features.rowwise().mean();
    const Matrix rotation = random_orthonormal_rows(bits, features.rows(), seed);
    CodeMatrix codes;
    codes.h = sign_matrix(rotation * (features.colwise() - mean));
    return codes;
}

}  // namespace slh
