#pragma once

#include <string>

#include "okaem/model.hpp"

namespace okaem::model {

// .okp file: magic "OKAP" | u16 version | u32 d, d_a, heads, d_m, layers |
// f64 p_c, p_m | payload of all tensors in param_tensors order (f64 LE) |
// u64 FNV-1a checksum of the payload. Same framing conventions as .okar.
void write_params(const ModelParams& params, const std::string& path);
ModelParams read_params(const std::string& path);

} // namespace okaem::model
