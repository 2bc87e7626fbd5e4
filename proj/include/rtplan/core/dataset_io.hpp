#pragma once

#include <string>

#include "rtplan/core/types.hpp"

namespace rtplan {

// Dataset file: one JSON header line (dims, env id, seed, N, trajectory
// lengths) followed by flat little-endian float64 records, each laid out as
// (state, action, reward, next_state, done-as-0/1).
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

// CSV export mirroring the binary record schema, one transition per row.
void export_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace rtplan
