#include "slh/model_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace slh {

namespace {

constexpr std::uint32_t kModelVersion = 1;

void append_frame(std::string& out, const std::string& name, const Matrix& m) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw IoError(IoErrc::bad_value, "save_model: frame name too long");
    }
    if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
        m.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw IoError(IoErrc::dimension_overflow, "save_model: dimensions exceed u32");
    }
    const std::uint16_t len = static_cast<std::uint16_t>(name.size());
    out.append(reinterpret_cast<const char*>(&len), sizeof len);
    out.append(name);
    const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
    out.append(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.append(reinterpret_cast<const char*>(&cols), sizeof cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            out.append(reinterpret_cast<const char*>(&v), sizeof v);
        }
    }
}

void append_scalar(std::string& out, const std::string& name, double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    append_frame(out, name, m);
}

std::map<std::string, Matrix> read_frames(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::io_failure, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string data = std::move(buf).str();

    std::size_t pos = 0;
    auto need = [&](std::size_t len) {
        if (pos + len > data.size()) {
            throw IoError(IoErrc::truncated, path.string() + ": truncated payload");
        }
    };
    need(8);
    if (std::memcmp(data.data(), "SLHM", 4) != 0) {
        throw IoError(IoErrc::bad_magic, path.string() + ": bad magic");
    }
    std::uint32_t version;
    std::memcpy(&version, data.data() + 4, 4);
    if (version != kModelVersion) {
        throw IoError(IoErrc::bad_version, path.string() + ": unsupported SLHM version");
    }
    pos = 8;

    std::map<std::string, Matrix> frames;
    while (pos < data.size()) {
        need(2);
        std::uint16_t len;
        std::memcpy(&len, data.data() + pos, 2);
        pos += 2;
        need(len);
        std::string name(data.data() + pos, len);
        pos += len;
        need(8);
        std::uint32_t rows, cols;
        std::memcpy(&rows, data.data() + pos, 4);
        std::memcpy(&cols, data.data() + pos + 4, 4);
        pos += 8;
        if (std::uint64_t(rows) * cols > (std::uint64_t(1) << 31)) {
            throw IoError(IoErrc::dimension_overflow,
                          path.string() + ": frame '" + name + "' too large");
        }
        need(std::size_t(rows) * cols * 8);
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::uint32_t i = 0; i < rows; ++i) {
            for (std::uint32_t j = 0; j < cols; ++j) {
                double v;
                std::memcpy(&v, data.data() + pos, 8);
                pos += 8;
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            }
        }
        frames[name] = std::move(m);
    }
    return frames;
}

const Matrix& frame(const std::map<std::string, Matrix>& frames,
                    const std::string& name, const std::filesystem::path& path) {
    auto it = frames.find(name);
    if (it == frames.end()) {
        throw IoError(IoErrc::bad_value,
                      path.string() + ": missing frame '" + name + "'");
    }
    return it->second;
}

double scalar(const std::map<std::string, Matrix>& frames, const std::string& name,
              const std::filesystem::path& path) {
    const Matrix& m = frame(frames, name, path);
    if (m.rows() != 1 || m.cols() != 1) {
        throw IoError(IoErrc::bad_value,
                      path.string() + ": frame '" + name + "' is not a scalar");
    }
    return m(0, 0);
}

std::string header() {
    std::string out;
    out.append("SLHM", 4);
    const std::uint32_t version = kModelVersion;
    out.append(reinterpret_cast<const char*>(&version), sizeof version);
    return out;
}

void append_hyper(std::string& out, const Hyperparams& hyper) {
    append_scalar(out, "alpha", hyper.alpha);
    append_scalar(out, "beta", hyper.beta);
    append_scalar(out, "gamma", hyper.gamma);
    append_scalar(out, "mu", hyper.mu);
    append_scalar(out, "lambda", hyper.lambda);
    append_scalar(out, "bits", static_cast<double>(hyper.bits));
    append_scalar(out, "max_iters", static_cast<double>(hyper.max_iters));
    append_scalar(out, "rel_tol", hyper.rel_tol);
}

Hyperparams read_hyper(const std::map<std::string, Matrix>& frames,
                       const std::filesystem::path& path) {
    Hyperparams hyper;
    hyper.alpha = scalar(frames, "alpha", path);
    hyper.beta = scalar(frames, "beta", path);
    hyper.gamma = scalar(frames, "gamma", path);
    hyper.mu = scalar(frames, "mu", path);
    hyper.lambda = scalar(frames, "lambda", path);
    hyper.bits = static_cast<Eigen::Index>(scalar(frames, "bits", path));
    hyper.max_iters = static_cast<int>(scalar(frames, "max_iters", path));
    hyper.rel_tol = scalar(frames, "rel_tol", path);
    return hyper;
}

}  // namespace

void save_model(const RslhModel& model, const std::filesystem::path& path) {
    std::string out = header();
    append_scalar(out, "boosted", 0.0);
    append_frame(out, "W", model.w);
    append_frame(out, "B", model.b);
    append_frame(out, "H", model.h.h);
    append_frame(out, "P", model.p);
    append_frame(out, "R", model.r);
    append_frame(out, "anchors", model.kernel.anchors);
    append_scalar(out, "sigma", model.kernel.sigma);
    append_hyper(out, model.hyper);
    Matrix trace(1, static_cast<Eigen::Index>(model.objective_trace.size()));
    for (std::size_t i = 0; i < model.objective_trace.size(); ++i) {
        trace(0, static_cast<Eigen::Index>(i)) = model.objective_trace[i];
    }
    append_frame(out, "objective_trace", trace);
    write_file_atomic(path, out);
}

void save_model(const BoostedModel& model, const std::filesystem::path& path) {
    std::string out = header();
    append_scalar(out, "boosted", 1.0);
    append_frame(out, "P", model.p_boost);
    append_frame(out, "H", model.h_final.h);
    Matrix selected(1, static_cast<Eigen::Index>(model.selected.size()));
    for (std::size_t i = 0; i < model.selected.size(); ++i) {
        selected(0, static_cast<Eigen::Index>(i)) =
            static_cast<double>(model.selected[i]);
    }
    append_frame(out, "selected", selected);
    append_frame(out, "anchors", model.kernel.anchors);
    append_scalar(out, "sigma", model.kernel.sigma);
    write_file_atomic(path, out);
}

ModelFile load_model(const std::filesystem::path& path) {
    const auto frames = read_frames(path);
    ModelFile file;
    file.boosted = scalar(frames, "boosted", path) != 0.0;
    if (file.boosted) {
        file.boost.p_boost = frame(frames, "P", path);
        file.boost.h_final.h = frame(frames, "H", path);
        const Matrix& sel = frame(frames, "selected", path);
        for (Eigen::Index i = 0; i < sel.cols(); ++i) {
            file.boost.selected.push_back(static_cast<Eigen::Index>(sel(0, i)));
        }
        file.boost.kernel.anchors = frame(frames, "anchors", path);
        file.boost.kernel.sigma = scalar(frames, "sigma", path);
    } else {
        file.plain.w = frame(frames, "W", path);
        file.plain.b = frame(frames, "B", path);
        file.plain.h.h = frame(frames, "H", path);
        file.plain.p = frame(frames, "P", path);
        file.plain.r = frame(frames, "R", path);
        file.plain.kernel.anchors = frame(frames, "anchors", path);
        file.plain.kernel.sigma = scalar(frames, "sigma", path);
        file.plain.hyper = read_hyper(frames, path);
        const Matrix& trace = frame(frames, "objective_trace", path);
        for (Eigen::Index i = 0; i < trace.cols(); ++i) {
            file.plain.objective_trace.push_back(trace(0, i));
        }
    }
    return file;
}

CodeMatrix encode_with(const ModelFile& model, const Matrix& features) {
    return model.boosted ? encode(model.boost, features)
                         : encode(model.plain, features);
}

std::string trace_to_csv(const std::vector<double>& trace) {
    std::string out = "iteration,objective\n";
    char line[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.17g\n", i, trace[i]);
        out += line;
    }
    return out;
}

}  // namespace slh
