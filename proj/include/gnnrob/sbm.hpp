#pragma once

#include <cstdint>
#include <vector>

#include "gnnrob/graph.hpp"

namespace gnnrob {

struct SbmConfig {
    std::vector<Index> block_sizes;
    double p_in = 0.1;
    double p_out = 0.01;
    Index feature_dim = 0;       // 0 -> one feature column per block
    double feature_noise = 0.1;  // sigma of the Gaussian added to the one-hot block indicator
    std::uint64_t seed = 0;
};

/// Undirected stochastic block model. Features are the one-hot block
/// indicator plus Gaussian noise; labels are the block ids. Deterministic
/// under the seed.
Graph sbm_generate(const SbmConfig& cfg);

}  // namespace gnnrob
