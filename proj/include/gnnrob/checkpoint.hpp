#pragma once

#include <cstdint>
#include <string>

#include "gnnrob/model.hpp"

namespace gnnrob {

/// Binary f64 payload at `path` plus a JSON manifest at `path`.json (kind,
/// layer shapes, aggregation, temperature, seed).
void save_checkpoint(const ModelParams& params, const std::string& path, std::uint64_t seed = 0);
ModelParams load_checkpoint(const std::string& path, std::uint64_t* seed_out = nullptr);

}  // namespace gnnrob
