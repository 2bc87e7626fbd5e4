#pragma once

#include <string>

#include "json.hpp"
#include "rtplan/net/tensor.hpp"

namespace rtplan::net {

// Checkpoint file: one JSON manifest line (tensor names/shapes plus a free
// `meta` object for optimizer hyper, normalizers, ...) followed by a flat
// little-endian float64 blob in name order. Round trips bit-exactly.
void save_checkpoint(const ParamStore& ps, const nlohmann::json& meta, const std::string& path);
ParamStore load_checkpoint(const std::string& path, nlohmann::json* meta = nullptr);

}  // namespace rtplan::net
