#include "gnnrob/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gnnrob {

std::vector<double> project_onto_budget(std::vector<double> p, double delta, double xi) {
    if (delta <= 0.0) throw std::invalid_argument("projection: budget must be positive");
    for (double v : p)
        if (!std::isfinite(v)) throw std::invalid_argument("projection: non-finite weight");

    auto clamped_sum = [&](double eta) {
        double s = 0.0;
        for (double v : p) s += std::clamp(v - eta, 0.0, 1.0);
        return s;
    };
    if (clamped_sum(0.0) <= delta) {
        for (double& v : p) v = std::clamp(v, 0.0, 1.0);
        return p;
    }
    double lo = *std::min_element(p.begin(), p.end()) - 1.0;
    double hi = *std::max_element(p.begin(), p.end());
    for (int it = 0; it < 64 && hi - lo > xi; ++it) {
        const double mid = (lo + hi) / 2.0;
        (clamped_sum(mid) > delta ? lo : hi) = mid;
    }
    // hi-side endpoint keeps the budget bound exact (and the map idempotent)
    const double eta = hi;
    for (double& v : p) v = std::clamp(v - eta, 0.0, 1.0);
    return p;
}

std::vector<Index> sample_final(const std::vector<double>& p, Index delta,
                                const std::function<double(const std::vector<Index>&)>& evaluate,
                                Index tries, std::uint64_t seed) {
    constexpr double kMassThreshold = 1e-8;
    std::vector<Index> eligible;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > kMassThreshold) eligible.push_back(static_cast<Index>(i));

    // top-delta mass, ties by lower index
    std::vector<Index> top = eligible;
    std::stable_sort(top.begin(), top.end(), [&](Index a, Index b) {
        return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
    });
    if (static_cast<Index>(top.size()) > delta) top.resize(static_cast<std::size_t>(delta));
    std::sort(top.begin(), top.end());

    std::vector<Index> best = top;
    double best_score = evaluate(top);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index t = 1; t < tries; ++t) {
        std::vector<Index> draw;
        bool ok = false;
        for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
            draw.clear();
            for (Index i : eligible)
                if (unif(rng) < p[static_cast<std::size_t>(i)]) draw.push_back(i);
            ok = static_cast<Index>(draw.size()) <= delta;
        }
        if (!ok) continue;
        const double score = evaluate(draw);
        if (score > best_score) {
            best_score = score;
            best = draw;
        }
    }
    return best;
}

}  // namespace gnnrob
