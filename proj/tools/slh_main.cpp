// Batch front end for the short-length hashing toolkit: train, boost, encode,
// eval and a self-contained synthetic benchmark. JSON results go to stdout,
// diagnostics to stderr, and all output files are written atomically.

#include "slh/boosting.hpp"
#include "slh/dataio.hpp"
#include "slh/eval.hpp"
#include "slh/model_io.hpp"
#include "slh/rslh.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

namespace {

using nlohmann::json;

struct CommonOpts {
    slh::Hyperparams hyper;
    std::string features_path;
    std::string labels_path;
    std::string format = "binary";
    Eigen::Index anchors = 0;  // 0 = min(n, 1000)
    std::uint64_t seed = 1;
    int threads = 0;
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    return s.substr(begin, s.find_last_not_of(" \t\r") - begin + 1);
}

// Applies a flat key=value file to the subcommand's own flags. Values reach
// only options the command line left unset, so explicit flags always win.
void apply_config_file(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in.good()) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string entry = trim(line);
        if (entry.empty() || entry.front() == '#') continue;
        const auto eq = entry.find('=');
        const std::string where = path + ":" + std::to_string(lineno);
        if (eq == std::string::npos) {
            throw std::runtime_error(where + ": expected key=value");
        }
        const std::string key = trim(entry.substr(0, eq));
        const std::string value = trim(entry.substr(eq + 1));
        if (key.empty() || key == "config") {
            throw std::runtime_error(where + ": bad config key");
        }
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr) {
            throw std::runtime_error(where + ": unknown config key '" + key + "'");
        }
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

// Fallthrough lets global flags such as --threads appear after the
// subcommand name.
void add_common_behavior(CLI::App* cmd, std::string& config_path) {
    cmd->fallthrough();
    cmd->add_option("--config", config_path, "Flat key=value config file; flags win");
}

void add_hyper_flags(CLI::App* cmd, slh::Hyperparams& hyper) {
    cmd->add_option("--bits", hyper.bits, "Code length L")->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", hyper.alpha, "Label regression weight");
    cmd->add_option("--beta", hyper.beta, "Code/representation coupling weight");
    cmd->add_option("--gamma", hyper.gamma, "Pairwise similarity weight");
    cmd->add_option("--mu", hyper.mu, "Feature projection weight");
    cmd->add_option("--lambda", hyper.lambda, "Ridge regularization")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", hyper.max_iters, "Maximum alternation sweeps");
    cmd->add_option("--rel-tol", hyper.rel_tol, "Relative objective stop tolerance")
        ->check(CLI::PositiveNumber);
}

// Required paths are validated in the handlers rather than by the parser so
// a config file may supply them too.
void add_data_flags(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--features", opts.features_path, "Feature file (required)");
    cmd->add_option("--labels", opts.labels_path,
                    "Label file, one class id per line (required)");
    cmd->add_option("--format", opts.format, "Feature file format")
        ->check(CLI::IsMember({"binary", "csv"}));
    cmd->add_option("--anchors", opts.anchors, "Anchor count (0 = min(n, 1000))");
    cmd->add_option("--seed", opts.seed, "Training seed");
}

void require_flag(const std::string& value, const char* flag) {
    if (value.empty()) {
        throw std::runtime_error(std::string(flag) + " is required");
    }
}

slh::Dataset load_dataset(const CommonOpts& opts) {
    require_flag(opts.features_path, "--features");
    require_flag(opts.labels_path, "--labels");
    slh::Dataset ds;
    ds.features = slh::load_features(
        opts.features_path,
        opts.format == "csv" ? slh::FeatureFormat::csv : slh::FeatureFormat::binary);
    ds.labels = slh::load_labels(opts.labels_path);
    if (static_cast<Eigen::Index>(ds.labels.size()) != ds.n()) {
        throw std::runtime_error("label count does not match feature columns");
    }
    int max_label = 0;
    for (int v : ds.labels) max_label = std::max(max_label, v);
    ds.num_classes = max_label + 1;
    return ds;
}

void apply_threads(int threads) {
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
    }
    Eigen::setNbThreads(threads);
}

json report_json(const slh::EvalReport& r) {
    return json::parse(slh::report_to_json(r));
}

int cmd_train(const CommonOpts& opts, const std::string& model_path,
              const std::string& trace_path) {
    const slh::Dataset ds = load_dataset(opts);
    const slh::RslhModel model = slh::train(ds, opts.hyper, opts.seed, opts.anchors);
    slh::save_model(model, model_path);
    if (!trace_path.empty()) {
        slh::write_file_atomic(trace_path, slh::trace_to_csv(model.objective_trace));
    }
    json out;
    out["final_objective"] = model.objective_trace.back();
    out["sweeps"] = model.objective_trace.size() - 1;
    out["model"] = model_path;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_boost(const CommonOpts& opts, int runs, std::uint64_t cluster_seed,
              const std::string& model_path) {
    const slh::Dataset ds = load_dataset(opts);
    const slh::BoostedModel model =
        slh::boost_train(ds, opts.hyper, runs, opts.seed, cluster_seed, opts.anchors);
    slh::save_model(model, model_path);
    json out;
    out["model"] = model_path;
    out["runs"] = runs;
    out["selected"] = json::array();
    for (Eigen::Index idx : model.selected) out["selected"].push_back(idx);
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_encode(const std::string& model_path, const std::string& features_path,
               const std::string& format, const std::string& codes_path) {
    require_flag(model_path, "--model");
    require_flag(features_path, "--features");
    const slh::ModelFile model = slh::load_model(model_path);
    const slh::Matrix features = slh::load_features(
        features_path,
        format == "csv" ? slh::FeatureFormat::csv : slh::FeatureFormat::binary);
    const slh::CodeMatrix codes = slh::encode_with(model, features);
    slh::save_codes(codes, codes_path);
    json out;
    out["codes"] = codes_path;
    out["n"] = codes.n();
    out["bits"] = codes.bits();
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& query_codes_path, const std::string& db_codes_path,
             const std::string& query_labels_path, const std::string& db_labels_path,
             Eigen::Index k, const std::string& report_path,
             const std::string& per_query_path) {
    require_flag(query_codes_path, "--query-codes");
    require_flag(db_codes_path, "--db-codes");
    require_flag(query_labels_path, "--query-labels");
    require_flag(db_labels_path, "--db-labels");
    const slh::PackedCodes queries = slh::pack_codes(slh::load_codes(query_codes_path));
    const slh::PackedCodes db = slh::pack_codes(slh::load_codes(db_codes_path));
    const std::vector<int> query_labels = slh::load_labels(query_labels_path);
    const std::vector<int> db_labels = slh::load_labels(db_labels_path);
    const slh::EvalReport report =
        slh::evaluate(queries, db, query_labels, db_labels, k, !per_query_path.empty());
    const std::string report_json_text = slh::report_to_json(report);
    if (!report_path.empty()) {
        slh::write_file_atomic(report_path, report_json_text + "\n");
    }
    if (!per_query_path.empty()) {
        slh::write_file_atomic(per_query_path, slh::per_query_csv(report));
    }
    std::cout << report_json_text << "\n";
    return 0;
}

struct BenchOpts {
    slh::Hyperparams hyper;
    Eigen::Index db_size = 2000;
    Eigen::Index query_size = 200;
    int classes = 10;
    Eigen::Index feature_dim = 32;
    Eigen::Index anchors = 300;
    int runs = 3;
    std::uint64_t seed = 1;
};

int cmd_bench(const BenchOpts& opts) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    const Eigen::Index n = opts.db_size + opts.query_size;
    const slh::Dataset all =
        slh::make_blobs(opts.classes, n, opts.feature_dim, opts.seed);
    slh::SplitSpec spec;
    spec.query_fraction =
        static_cast<double>(opts.query_size) / static_cast<double>(n);
    spec.seed = opts.seed;
    const auto [queries, db] = slh::split(all, spec);
    std::cerr << "bench: " << db.n() << " database / " << queries.n()
              << " query samples, " << opts.classes << " classes, L="
              << opts.hyper.bits << "\n";

    json out;
    out["params"] = {{"db_size", db.n()},      {"query_size", queries.n()},
                     {"classes", opts.classes}, {"feature_dim", opts.feature_dim},
                     {"bits", opts.hyper.bits}, {"runs", opts.runs},
                     {"seed", opts.seed}};

    {
        const slh::RslhModel model =
            slh::train(db, opts.hyper, opts.seed, opts.anchors);
        const auto report = slh::evaluate(
            slh::pack_codes(slh::encode(model, queries.features)),
            slh::pack_codes(slh::encode(model, db.features)), queries.labels,
            db.labels, std::min<Eigen::Index>(100, db.n()));
        out["rslh"] = report_json(report);
        out["rslh"]["sweeps"] = model.objective_trace.size() - 1;
    }
    {
        const slh::BoostedModel model = slh::boost_train(
            db, opts.hyper, opts.runs, opts.seed, opts.seed + 99, opts.anchors);
        const auto report = slh::evaluate(
            slh::pack_codes(slh::encode(model, queries.features)),
            slh::pack_codes(slh::encode(model, db.features)), queries.labels,
            db.labels, std::min<Eigen::Index>(100, db.n()));
        out["rslh_boosted"] = report_json(report);
    }
    {
        // One rotation over the concatenated set keeps query and database in
        // the same projected space.
        slh::Matrix joint(all.feature_dim(), db.n() + queries.n());
        joint.leftCols(db.n()) = db.features;
        joint.rightCols(queries.n()) = queries.features;
        const slh::CodeMatrix codes =
            slh::baseline_random_rotation(joint, opts.hyper.bits, opts.seed);
        slh::CodeMatrix db_codes, query_codes;
        db_codes.h = codes.h.leftCols(db.n());
        query_codes.h = codes.h.rightCols(queries.n());
        const auto report = slh::evaluate(
            slh::pack_codes(query_codes), slh::pack_codes(db_codes), queries.labels,
            db.labels, std::min<Eigen::Index>(100, db.n()));
        out["baseline_random_rotation"] = report_json(report);
    }

    out["elapsed_seconds"] =
        std::chrono::duration<double>(clock::now() - t0).count();
    std::cout << out.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Supervised short-length hashing toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");

    CommonOpts train_opts;
    std::string train_model = "model.slhm";
    std::string train_trace;
    std::string train_config;
    CLI::App* train = app.add_subcommand("train", "Train a hashing model");
    add_common_behavior(train, train_config);
    add_data_flags(train, train_opts);
    add_hyper_flags(train, train_opts.hyper);
    train->add_option("--out", train_model, "Output model path");
    train->add_option("--trace", train_trace, "Objective trace CSV path");

    CommonOpts boost_opts;
    std::string boost_model = "model.slhm";
    int boost_runs = 3;
    std::uint64_t cluster_seed = 7;
    std::string boost_config;
    CLI::App* boost = app.add_subcommand("boost", "Train a boosted ensemble model");
    add_common_behavior(boost, boost_config);
    add_data_flags(boost, boost_opts);
    add_hyper_flags(boost, boost_opts.hyper);
    boost->add_option("--runs", boost_runs, "Training runs feeding the bit pool")
        ->check(CLI::PositiveNumber);
    boost->add_option("--cluster-seed", cluster_seed, "Spectral clustering seed");
    boost->add_option("--out", boost_model, "Output model path");

    std::string encode_model, encode_features, encode_out = "codes.slhc";
    std::string encode_format = "binary";
    std::string encode_config;
    CLI::App* enc = app.add_subcommand("encode", "Encode features with a model");
    add_common_behavior(enc, encode_config);
    enc->add_option("--model", encode_model, "Model file (required)");
    enc->add_option("--features", encode_features, "Feature file (required)");
    enc->add_option("--format", encode_format, "Feature file format")
        ->check(CLI::IsMember({"binary", "csv"}));
    enc->add_option("--out", encode_out, "Output code file");

    std::string eval_qc, eval_dc, eval_ql, eval_dl, eval_report, eval_pq;
    Eigen::Index eval_k = 100;
    std::string eval_config;
    CLI::App* ev = app.add_subcommand("eval", "Hamming-ranking retrieval metrics");
    add_common_behavior(ev, eval_config);
    ev->add_option("--query-codes", eval_qc, "Query code file (required)");
    ev->add_option("--db-codes", eval_dc, "Database code file (required)");
    ev->add_option("--query-labels", eval_ql, "Query label file (required)");
    ev->add_option("--db-labels", eval_dl, "Database label file (required)");
    ev->add_option("--k", eval_k, "Precision cutoff")->check(CLI::PositiveNumber);
    ev->add_option("--out", eval_report, "Report JSON path");
    ev->add_option("--per-query", eval_pq, "Per-query CSV path");

    BenchOpts bench_opts;
    bench_opts.hyper.bits = 4;
    std::string bench_config;
    CLI::App* bench =
        app.add_subcommand("bench", "Synthetic blobs benchmark of all methods");
    add_common_behavior(bench, bench_config);
    add_hyper_flags(bench, bench_opts.hyper);
    bench->add_option("--db-size", bench_opts.db_size, "Database samples")
        ->check(CLI::PositiveNumber);
    bench->add_option("--query-size", bench_opts.query_size, "Query samples")
        ->check(CLI::PositiveNumber);
    bench->add_option("--classes", bench_opts.classes, "Class count")
        ->check(CLI::Range(2, 1000000));
    bench->add_option("--feature-dim", bench_opts.feature_dim, "Feature dimension")
        ->check(CLI::PositiveNumber);
    bench->add_option("--anchors", bench_opts.anchors, "Anchor count");
    bench->add_option("--runs", bench_opts.runs, "Boosting runs")
        ->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_opts.seed, "Benchmark seed");

    CLI11_PARSE(app, argc, argv);

    try {
        apply_threads(threads);
        if (*train) {
            apply_config_file(train, train_config);
            return cmd_train(train_opts, train_model, train_trace);
        }
        if (*boost) {
            apply_config_file(boost, boost_config);
            return cmd_boost(boost_opts, boost_runs, cluster_seed, boost_model);
        }
        if (*enc) {
            apply_config_file(enc, encode_config);
            return cmd_encode(encode_model, encode_features, encode_format,
                              encode_out);
        }
        if (*ev) {
            apply_config_file(ev, eval_config);
            return cmd_eval(eval_qc, eval_dc, eval_ql, eval_dl, eval_k,
                            eval_report, eval_pq);
        }
        if (*bench) {
            apply_config_file(bench, bench_config);
            return cmd_bench(bench_opts);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
