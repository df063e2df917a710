#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "slh/dataio.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

using namespace slh;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;

    TempDir() {
        path = fs::temp_directory_path() /
               ("slh_dataio_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    fs::path file(const std::string& name) const { return path / name; }

    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Random matrix whose entries survive the float32 round trip unchanged.
Matrix random_f32_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m = gaussian_matrix(rows, cols, rng);
    return m.unaryExpr([](double v) { return double(float(v)); });
}

Matrix random_codes(Eigen::Index bits, Eigen::Index n, Rng& rng) {
    return sign_matrix(gaussian_matrix(bits, n, rng));
}

}  // namespace

TEST_CASE("feature binary roundtrip preserves a 2x3 matrix") {
    TempDir tmp;
    Rng rng(1);
    const Matrix m = random_f32_matrix(2, 3, rng);
    save_features(m, tmp.file("f.slhf"));
    const Matrix back = load_features(tmp.file("f.slhf"), FeatureFormat::binary);
    CHECK(back == m);
}

TEST_CASE("feature binary roundtrip is exact over 100 random instances") {
    TempDir tmp;
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const Matrix m = random_f32_matrix(1 + i % 7, 1 + (i * 3) % 11, rng);
        save_features(m, tmp.file("f.slhf"));
        CHECK(load_features(tmp.file("f.slhf"), FeatureFormat::binary) == m);
    }
}

TEST_CASE("feature file stores float32 little-endian after a 16-byte header") {
    TempDir tmp;
    Matrix m(1, 1);
    m(0, 0) = 1.0;
    save_features(m, tmp.file("one.slhf"));
    const std::string bytes = slurp(tmp.file("one.slhf"));
    REQUIRE(bytes.size() == 20);
    CHECK(bytes.substr(0, 4) == "SLHF");
    CHECK(static_cast<unsigned char>(bytes[16]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[17]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[18]) == 0x80);
    CHECK(static_cast<unsigned char>(bytes[19]) == 0x3F);
}

TEST_CASE("csv features parse one sample per line") {
    TempDir tmp;
    spit(tmp.file("f.csv"), "1.0,2.0\n3.0,4.0\n");
    const Matrix m = load_features(tmp.file("f.csv"), FeatureFormat::csv);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 2);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(1, 0) == 2.0);
    CHECK(m(0, 1) == 3.0);
    CHECK(m(1, 1) == 4.0);
}

TEST_CASE("csv rejects non-numeric cells and ragged rows") {
    TempDir tmp;
    spit(tmp.file("bad.csv"), "1.0,oops\n");
    try {
        load_features(tmp.file("bad.csv"), FeatureFormat::csv);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::bad_value);
    }
    spit(tmp.file("ragged.csv"), "1.0,2.0\n3.0\n");
    try {
        load_features(tmp.file("ragged.csv"), FeatureFormat::csv);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::bad_value);
    }
}

TEST_CASE("feature loader distinguishes header failure modes") {
    TempDir tmp;
    spit(tmp.file("magic"), std::string("XXXX\x01\x00\x00\x00", 8));
    try {
        load_features(tmp.file("magic"), FeatureFormat::binary);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::bad_magic);
    }

    std::string v2 = "SLHF";
    const std::uint32_t version = 2, one = 1;
    v2.append(reinterpret_cast<const char*>(&version), 4);
    v2.append(reinterpret_cast<const char*>(&one), 4);
    v2.append(reinterpret_cast<const char*>(&one), 4);
    spit(tmp.file("version"), v2);
    try {
        load_features(tmp.file("version"), FeatureFormat::binary);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::bad_version);
    }

    std::string trunc = "SLHF";
    const std::uint32_t v1 = 1, rows = 2, cols = 3;
    trunc.append(reinterpret_cast<const char*>(&v1), 4);
    trunc.append(reinterpret_cast<const char*>(&rows), 4);
    trunc.append(reinterpret_cast<const char*>(&cols), 4);
    trunc.append("\x00\x00\x80\x3F", 4);  // one float where six belong
    spit(tmp.file("trunc"), trunc);
    try {
        load_features(tmp.file("trunc"), FeatureFormat::binary);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::truncated);
    }

    std::string huge = "SLHF";
    const std::uint32_t big = 70000;
    huge.append(reinterpret_cast<const char*>(&v1), 4);
    huge.append(reinterpret_cast<const char*>(&big), 4);
    huge.append(reinterpret_cast<const char*>(&big), 4);
    spit(tmp.file("huge"), huge);
    try {
        load_features(tmp.file("huge"), FeatureFormat::binary);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::dimension_overflow);
    }
}

TEST_CASE("missing feature file reports an io failure") {
    try {
        load_features("/nonexistent/f.slhf", FeatureFormat::binary);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::io_failure);
    }
}

TEST_CASE("label files roundtrip and reject junk") {
    TempDir tmp;
    const std::vector<int> labels = {0, 3, 1, 1, 2};
    save_labels(labels, tmp.file("y.txt"));
    CHECK(load_labels(tmp.file("y.txt")) == labels);
    CHECK(slurp(tmp.file("y.txt")) == "0\n3\n1\n1\n2\n");

    spit(tmp.file("bad.txt"), "0\nabc\n");
    try {
        load_labels(tmp.file("bad.txt"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::bad_value);
    }
    spit(tmp.file("neg.txt"), "-1\n");
    CHECK_THROWS_AS(load_labels(tmp.file("neg.txt")), IoError);
    spit(tmp.file("empty.txt"), "");
    CHECK_THROWS_AS(load_labels(tmp.file("empty.txt")), IoError);
}

TEST_CASE("label loader tolerates CRLF line endings") {
    TempDir tmp;
    spit(tmp.file("crlf.txt"), "0\r\n1\r\n");
    CHECK(load_labels(tmp.file("crlf.txt")) == std::vector<int>{0, 1});
}

TEST_CASE("build_label_matrix places one +1 per column") {
    const LabelMatrix lm = build_label_matrix({0, 1}, 2);
    Matrix want(2, 2);
    want << 1.0, -1.0, -1.0, 1.0;
    CHECK(lm.y == want);

    const LabelMatrix single = build_label_matrix({2}, 3);
    CHECK(single.y(0, 0) == -1.0);
    CHECK(single.y(1, 0) == -1.0);
    CHECK(single.y(2, 0) == 1.0);
}

TEST_CASE("label matrix columns sum to 2-c") {
    Rng rng(5);
    const int c = 7;
    std::vector<int> labels(1000);
    std::uniform_int_distribution<int> pick(0, c - 1);
    for (int& v : labels) v = pick(rng);
    const LabelMatrix lm = build_label_matrix(labels, c);
    for (Eigen::Index j = 0; j < lm.n(); ++j) {
        CHECK(lm.y.col(j).sum() == doctest::Approx(2.0 - c));
    }
    // Argmax per column recovers the labels.
    for (Eigen::Index j = 0; j < lm.n(); ++j) {
        Eigen::Index row;
        lm.y.col(j).maxCoeff(&row);
        CHECK(static_cast<int>(row) == labels[static_cast<std::size_t>(j)]);
    }
}

TEST_CASE("build_label_matrix rejects out-of-range ids") {
    CHECK_THROWS_AS(build_label_matrix({0, 2}, 2), std::invalid_argument);
    CHECK_THROWS_AS(build_label_matrix({0}, 1), std::invalid_argument);
}

namespace {

Dataset indexed_dataset(Eigen::Index n, int num_classes) {
    Dataset ds;
    ds.num_classes = num_classes;
    ds.features.resize(1, n);
    ds.labels.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        ds.features(0, j) = static_cast<double>(j);
        ds.labels[static_cast<std::size_t>(j)] = static_cast<int>(j) % num_classes;
    }
    return ds;
}

std::set<double> column_set(const Dataset& ds) {
    std::set<double> out;
    for (Eigen::Index j = 0; j < ds.n(); ++j) out.insert(ds.features(0, j));
    return out;
}

}  // namespace

TEST_CASE("split sizes and disjointness at fraction 0.2") {
    const Dataset ds = indexed_dataset(10, 2);
    SplitSpec spec;
    spec.query_fraction = 0.2;
    spec.seed = 3;
    const auto [query, db] = split(ds, spec);
    CHECK(query.n() == 2);
    CHECK(db.n() == 8);
    std::set<double> q = column_set(query), d = column_set(db);
    CHECK(q.size() == 2);
    CHECK(d.size() == 8);
    for (double v : q) CHECK(d.count(v) == 0);
}

TEST_CASE("split is deterministic per seed") {
    const Dataset ds = indexed_dataset(40, 4);
    SplitSpec spec;
    spec.query_fraction = 0.25;
    spec.seed = 9;
    const auto [q1, d1] = split(ds, spec);
    const auto [q2, d2] = split(ds, spec);
    CHECK(q1.features == q2.features);
    CHECK(d1.features == d2.features);
    CHECK(q1.labels == q2.labels);
    spec.seed = 10;
    const auto [q3, d3] = split(ds, spec);
    CHECK(q1.features != q3.features);
}

TEST_CASE("split keeps every class in the database") {
    const Dataset ds = indexed_dataset(1000, 10);
    SplitSpec spec;
    spec.query_fraction = 0.1;
    spec.seed = 1;
    const auto [query, db] = split(ds, spec);
    CHECK(query.n() == 100);
    std::vector<int> counts(10, 0);
    for (int v : db.labels) ++counts[static_cast<std::size_t>(v)];
    for (int c : counts) CHECK(c >= 1);
}

TEST_CASE("split names a class it cannot stratify") {
    Dataset ds = indexed_dataset(5, 2);
    ds.labels = {0, 0, 0, 0, 1};  // class 1 has a single sample
    SplitSpec spec;
    spec.query_fraction = 0.4;
    spec.seed = 0;
    try {
        split(ds, spec);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("class 1") != std::string::npos);
    }
}

TEST_CASE("split rejects fractions outside (0,1)") {
    const Dataset ds = indexed_dataset(10, 2);
    SplitSpec spec;
    spec.seed = 0;
    spec.query_fraction = 0.0;
    CHECK_THROWS_AS(split(ds, spec), std::invalid_argument);
    spec.query_fraction = 1.0;
    CHECK_THROWS_AS(split(ds, spec), std::invalid_argument);
}

TEST_CASE("code file packs one sample into the documented byte") {
    TempDir tmp;
    CodeMatrix codes;
    codes.h.resize(4, 1);
    codes.h << 1.0, -1.0, -1.0, 1.0;
    save_codes(codes, tmp.file("c.slhc"));
    const std::string bytes = slurp(tmp.file("c.slhc"));
    REQUIRE(bytes.size() == 21);  // 4 magic + 4 version + 4 L + 8 n + 1 payload
    CHECK(bytes.substr(0, 4) == "SLHC");
    CHECK(static_cast<unsigned char>(bytes[20]) == 0b00001001);
}

TEST_CASE("code roundtrip is exact for random 10x100 codes") {
    TempDir tmp;
    Rng rng(8);
    const CodeMatrix codes{random_codes(10, 100, rng)};
    save_codes(codes, tmp.file("c.slhc"));
    CHECK(load_codes(tmp.file("c.slhc")).h == codes.h);
}

TEST_CASE("eight-bit codes occupy exactly one byte per sample") {
    TempDir tmp;
    Rng rng(9);
    const Eigen::Index n = 37;
    const CodeMatrix codes{random_codes(8, n, rng)};
    save_codes(codes, tmp.file("c.slhc"));
    CHECK(fs::file_size(tmp.file("c.slhc")) == 20 + static_cast<std::uintmax_t>(n));
}

TEST_CASE("code roundtrips hold over 100 random shapes") {
    TempDir tmp;
    Rng rng(10);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index bits = 1 + i % 19;
        const Eigen::Index n = 1 + (i * 7) % 23;
        const CodeMatrix codes{random_codes(bits, n, rng)};
        save_codes(codes, tmp.file("c.slhc"));
        const CodeMatrix back = load_codes(tmp.file("c.slhc"));
        CHECK(back.h == codes.h);
    }
}

TEST_CASE("pack_code_bytes validates entries and sizes") {
    CodeMatrix bad;
    bad.h = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(pack_code_bytes(bad), std::invalid_argument);

    Rng rng(11);
    const CodeMatrix codes{random_codes(5, 3, rng)};
    auto bytes = pack_code_bytes(codes);
    CHECK(bytes.size() == 3);  // ceil(5/8) per sample
    CHECK(unpack_code_bytes(bytes, 5, 3).h == codes.h);
    bytes.pop_back();
    CHECK_THROWS_AS(unpack_code_bytes(bytes, 5, 3), std::invalid_argument);
}

TEST_CASE("corrupt code headers are rejected") {
    TempDir tmp;
    spit(tmp.file("bad.slhc"), "SLHX\x01\x00\x00\x00");
    CHECK_THROWS_AS(load_codes(tmp.file("bad.slhc")), IoError);
    spit(tmp.file("short.slhc"), "SLHC");
    try {
        load_codes(tmp.file("short.slhc"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.code() == IoErrc::truncated);
    }
}

TEST_CASE("write_file_atomic leaves no temp file behind on failure") {
    TempDir tmp;
    const fs::path missing = tmp.path / "no_such_dir" / "x.bin";
    CHECK_THROWS_AS(write_file_atomic(missing, "abc"), IoError);
    CHECK(!fs::exists(missing));
    CHECK(fs::is_empty(tmp.path));

    const fs::path ok = tmp.file("x.bin");
    write_file_atomic(ok, "abc");
    CHECK(slurp(ok) == "abc");
    write_file_atomic(ok, "xy");
    CHECK(slurp(ok) == "xy");
    CHECK(!fs::exists(tmp.file("x.bin.tmp")));
}

TEST_CASE("make_blobs lays out round-robin labels deterministically") {
    const Dataset a = make_blobs(3, 10, 4, 77);
    const Dataset b = make_blobs(3, 10, 4, 77);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.num_classes == 3);
    CHECK(a.n() == 10);
    CHECK(a.feature_dim() == 4);
    for (Eigen::Index j = 0; j < a.n(); ++j) {
        CHECK(a.labels[static_cast<std::size_t>(j)] == static_cast<int>(j % 3));
    }
    CHECK_THROWS_AS(make_blobs(1, 10, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_blobs(5, 3, 4, 0), std::invalid_argument);
}
