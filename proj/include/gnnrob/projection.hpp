#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gnnrob/csr.hpp"

namespace gnnrob {

/// Projects relaxed flip probabilities onto { p in [0,1]^b : sum p <= delta }.
/// Clamps first; when the clamped mass exceeds the budget, bisects the shift
/// eta so that sum clamp(p - eta) = delta. At most 64 bisection steps.
std::vector<double> project_onto_budget(std::vector<double> p, double delta, double xi = 1e-5);

/// Final discretization of Bernoulli probabilities under the budget. The
/// first candidate is the top-delta mass (ties broken by lower index); the
/// remaining tries-1 candidates are Bernoulli draws with rejection of budget
/// violations. Returns the positions with the best score per `evaluate`
/// (higher is better).
std::vector<Index> sample_final(const std::vector<double>& p, Index delta,
                                const std::function<double(const std::vector<Index>&)>& evaluate,
                                Index tries, std::uint64_t seed);

}  // namespace gnnrob
