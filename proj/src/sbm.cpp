#include "gnnrob/sbm.hpp"

#include <random>
#include <stdexcept>

namespace gnnrob {

Graph sbm_generate(const SbmConfig& cfg) {
    if (cfg.block_sizes.empty()) throw std::invalid_argument("sbm: no blocks");
    for (Index s : cfg.block_sizes)
        if (s <= 0) throw std::invalid_argument("sbm: empty block");
    if (!(cfg.p_out >= 0.0 && cfg.p_out < cfg.p_in && cfg.p_in <= 1.0))
        throw std::invalid_argument("sbm: need 0 <= p_out < p_in <= 1");

    const Index blocks = static_cast<Index>(cfg.block_sizes.size());
    Index n = 0;
    std::vector<Index> block_of;
    for (Index b = 0; b < blocks; ++b) {
        n += cfg.block_sizes[static_cast<std::size_t>(b)];
        block_of.insert(block_of.end(),
                        static_cast<std::size_t>(cfg.block_sizes[static_cast<std::size_t>(b)]), b);
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Index> ris, cis;
    std::vector<double> vals;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double p = block_of[static_cast<std::size_t>(i)] == block_of[static_cast<std::size_t>(j)]
                                 ? cfg.p_in
                                 : cfg.p_out;
            if (unif(rng) < p) {
                ris.push_back(i); cis.push_back(j); vals.push_back(1.0);
                ris.push_back(j); cis.push_back(i); vals.push_back(1.0);
            }
        }
    }

    Graph g;
    g.directed = false;
    g.adjacency = CsrMatrix::from_triplets(n, n, std::move(ris), std::move(cis), std::move(vals));
    const Index d = cfg.feature_dim > 0 ? cfg.feature_dim : blocks;
    if (d < blocks) throw std::invalid_argument("sbm: feature_dim below block count");
    g.features = Matrix(n, d);
    std::normal_distribution<double> noise(0.0, cfg.feature_noise);
    for (Index i = 0; i < n; ++i) {
        for (Index c = 0; c < d; ++c) g.features(i, c) = noise(rng);
        g.features(i, block_of[static_cast<std::size_t>(i)]) += 1.0;
    }
    g.labels = std::move(block_of);
    return g;
}

}  // namespace gnnrob
