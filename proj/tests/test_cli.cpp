#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "slh/dataio.hpp"
#include "slh/eval.hpp"
#include "slh/model_io.hpp"
#include "slh/rslh.hpp"

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace slh;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("SLH_CLI");
    REQUIRE_MESSAGE(env != nullptr, "SLH_CLI must point at the built binary");
    return env;
}

struct RunResult {
    int status = -1;
    std::string output;
};

// Runs the CLI with stderr folded into stdout so failures stay inspectable.
RunResult run_cli(const std::string& args) {
    const std::string command = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buffer[4096];
    while (std::size_t got = std::fread(buffer, 1, sizeof buffer, pipe)) {
        result.output.append(buffer, got);
    }
    const int raw = pclose(pipe);
    result.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return result;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("slh_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Writes a small labeled blob dataset and returns it for in-process checks.
Dataset write_dataset(const TempDir& dir, int classes, Eigen::Index n,
                      Eigen::Index dim, std::uint64_t seed) {
    const Dataset ds = make_blobs(classes, n, dim, seed);
    save_features(ds.features, dir.file("x.slhf"));
    save_labels(ds.labels, dir.file("y.txt"));
    return ds;
}

std::string data_flags(const TempDir& dir) {
    return "--features " + dir.file("x.slhf") + " --labels " + dir.file("y.txt");
}

}  // namespace

TEST_CASE("train writes a model, a trace, and a JSON summary") {
    TempDir dir;
    write_dataset(dir, 4, 120, 8, 1);
    const RunResult r = run_cli("train " + data_flags(dir) +
                                " --bits 3 --anchors 40 --seed 7 --out " +
                                dir.file("model.slhm") + " --trace " +
                                dir.file("trace.csv"));
    CAPTURE(r.output);
    REQUIRE(r.status == 0);
    REQUIRE(fs::exists(dir.file("model.slhm")));

    const nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j.at("model").get<std::string>() == dir.file("model.slhm"));
    CHECK(j.at("final_objective").get<double>() > 0.0);
    CHECK(j.at("sweeps").get<int>() >= 1);

    const std::string trace = slurp(dir.file("trace.csv"));
    CHECK(trace.rfind("iteration,objective\n", 0) == 0);

    const ModelFile model = load_model(dir.file("model.slhm"));
    CHECK_FALSE(model.boosted);
    CHECK(model.plain.w.rows() == 3);
    CHECK(model.plain.hyper.bits == 3);
}

TEST_CASE("a failed train leaves no partial model behind") {
    TempDir dir;
    write_dataset(dir, 4, 60, 8, 2);
    const RunResult r = run_cli("train --features " + dir.file("x.slhf") +
                                " --labels " + dir.file("missing.txt") +
                                " --bits 3 --out " + dir.file("model.slhm"));
    CHECK(r.status != 0);
    CHECK(r.output.find("error:") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.file("model.slhm")));
    CHECK_FALSE(fs::exists(dir.file("model.slhm.tmp")));
}

TEST_CASE("repeating a train invocation reproduces the file bytes") {
    TempDir dir;
    write_dataset(dir, 3, 90, 6, 3);
    const std::string flags = "train " + data_flags(dir) +
                              " --bits 2 --anchors 30 --seed 11 --out ";
    REQUIRE(run_cli(flags + dir.file("a.slhm")).status == 0);
    REQUIRE(run_cli(flags + dir.file("b.slhm")).status == 0);
    CHECK(slurp(dir.file("a.slhm")) == slurp(dir.file("b.slhm")));
}

TEST_CASE("boost trains an ensemble model and lists the kept bits") {
    TempDir dir;
    write_dataset(dir, 3, 100, 6, 4);
    const RunResult r = run_cli("boost " + data_flags(dir) +
                                " --bits 2 --anchors 30 --runs 2 --seed 5 --out " +
                                dir.file("boost.slhm"));
    CAPTURE(r.output);
    REQUIRE(r.status == 0);

    const nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j.at("runs").get<int>() == 2);
    CHECK(j.at("selected").size() == 2);

    const ModelFile model = load_model(dir.file("boost.slhm"));
    CHECK(model.boosted);
    CHECK(model.boost.selected.size() == 2);

    const RunResult bad = run_cli("boost " + data_flags(dir) +
                                  " --bits 2 --runs 0 --out " +
                                  dir.file("zero.slhm"));
    CHECK(bad.status != 0);
}

TEST_CASE("encode emits codes matching an in-process application of the model") {
    TempDir dir;
    const Dataset ds = write_dataset(dir, 4, 110, 8, 6);
    REQUIRE(run_cli("train " + data_flags(dir) +
                    " --bits 3 --anchors 40 --seed 9 --out " +
                    dir.file("model.slhm"))
                .status == 0);
    const RunResult r = run_cli("encode --features " + dir.file("x.slhf") +
                                " --model " + dir.file("model.slhm") +
                                " --out " + dir.file("codes.slhc"));
    CAPTURE(r.output);
    REQUIRE(r.status == 0);

    const nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j.at("n").get<int>() == 110);
    CHECK(j.at("bits").get<int>() == 3);

    const CodeMatrix from_file = load_codes(dir.file("codes.slhc"));
    const ModelFile model = load_model(dir.file("model.slhm"));
    const CodeMatrix direct = encode_with(model, ds.features);
    CHECK(from_file.h == direct.h);
}

TEST_CASE("eval reports perfect self retrieval and writes the artifacts") {
    TempDir dir;
    const Dataset ds = write_dataset(dir, 3, 80, 6, 7);
    REQUIRE(run_cli("train " + data_flags(dir) +
                    " --bits 2 --anchors 30 --seed 2 --out " +
                    dir.file("model.slhm"))
                .status == 0);
    REQUIRE(run_cli("encode --features " + dir.file("x.slhf") + " --model " +
                    dir.file("model.slhm") + " --out " + dir.file("codes.slhc"))
                .status == 0);

    const RunResult r = run_cli(
        "eval --query-codes " + dir.file("codes.slhc") + " --query-labels " +
        dir.file("y.txt") + " --db-codes " + dir.file("codes.slhc") +
        " --db-labels " + dir.file("y.txt") + " --k 10 --out " +
        dir.file("report.json") + " --per-query " + dir.file("detail.csv"));
    CAPTURE(r.output);
    REQUIRE(r.status == 0);

    const nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j.at("k").get<int>() == 10);
    CHECK(j.at("n_queries").get<int>() == 80);
    CHECK(j.at("n_database").get<int>() == 80);

    const CodeMatrix codes = load_codes(dir.file("codes.slhc"));
    const PackedCodes packed = pack_codes(codes);
    const EvalReport expect =
        evaluate(packed, packed, ds.labels, ds.labels, 10);
    CHECK(j.at("map").get<double>() ==
          doctest::Approx(expect.map).epsilon(1e-12));

    const nlohmann::json file_report =
        nlohmann::json::parse(slurp(dir.file("report.json")));
    CHECK(file_report.at("map").get<double>() == j.at("map").get<double>());
    CHECK(slurp(dir.file("detail.csv"))
              .rfind("query_index,ap,ap_h2,prec_k\n", 0) == 0);
}

TEST_CASE("bench runs the three-way comparison end to end") {
    TempDir dir;
    const RunResult r = run_cli(
        "bench --db-size 300 --query-size 60 --classes 5 --feature-dim 8 "
        "--bits 4 --anchors 100 --runs 2 --seed 1");
    CAPTURE(r.output);
    REQUIRE(r.status == 0);

    const std::size_t brace = r.output.find('{');
    REQUIRE(brace != std::string::npos);
    const nlohmann::json j = nlohmann::json::parse(r.output.substr(brace));
    CHECK(j.at("params").at("db_size").get<int>() == 300);
    for (const char* method :
         {"rslh", "rslh_boosted", "baseline_random_rotation"}) {
        CHECK(j.at(method).at("map").get<double>() >= 0.0);
        CHECK(j.at(method).at("map").get<double>() <= 1.0);
    }
    CHECK(j.at("elapsed_seconds").get<double>() > 0.0);
}

TEST_CASE("unknown flags are rejected") {
    const RunResult r = run_cli("train --no-such-flag");
    CHECK(r.status != 0);
}

TEST_CASE("config files supply defaults that explicit flags override") {
    TempDir dir;
    write_dataset(dir, 3, 90, 6, 8);
    {
        std::ofstream cfg(dir.file("slh.cfg"));
        cfg << "bits=2\n";
        cfg << "seed=11\n";
    }
    REQUIRE(run_cli("train " + data_flags(dir) + " --anchors 30 --config " +
                    dir.file("slh.cfg") + " --out " + dir.file("from_cfg.slhm"))
                .status == 0);
    const ModelFile from_cfg = load_model(dir.file("from_cfg.slhm"));
    CHECK(from_cfg.plain.hyper.bits == 2);

    REQUIRE(run_cli("train " + data_flags(dir) + " --anchors 30 --config " +
                    dir.file("slh.cfg") + " --bits 3 --out " +
                    dir.file("override.slhm"))
                .status == 0);
    const ModelFile overridden = load_model(dir.file("override.slhm"));
    CHECK(overridden.plain.hyper.bits == 3);
}
