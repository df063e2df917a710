#pragma once

#include "slh/boosting.hpp"
#include "slh/rslh.hpp"

#include <filesystem>
#include <string>

namespace slh {

// SLHM container: magic "SLHM", u32 version=1, then named matrix frames until
// EOF. Each frame is u16 name length, the name bytes, u32 rows, u32 cols and
// rows*cols little-endian float64 in row-major order; scalars travel as 1x1
// frames. Frames load order-independently. A "boosted" scalar distinguishes
// the two model kinds.
struct ModelFile {
    bool boosted = false;
    RslhModel plain;
    BoostedModel boost;
};

void save_model(const RslhModel& model, const std::filesystem::path& path);
void save_model(const BoostedModel& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

// Codes for query features with whichever projection the file carries.
CodeMatrix encode_with(const ModelFile& model, const Matrix& features);

// "iteration,objective" rows, full double precision.
std::string trace_to_csv(const std::vector<double>& trace);

}  // namespace slh
