#pragma once

#include <vector>

#include "gnnrob/dense.hpp"

namespace gnnrob {

struct SoftMedianConfig {
    double temperature = 0.5;
};

/// Per dimension, the weighted lower median: the smallest value whose
/// cumulative weight reaches half the total.
std::vector<double> weighted_dimensionwise_median(const Matrix& x, const std::vector<double>& a);

/// softmax(-c / (T sqrt(d)))^T X where c_v is the L2 distance of row v to the
/// dimension-wise median. Optionally returns the softmax weights s.
std::vector<double> soft_median(const Matrix& x, const SoftMedianConfig& cfg,
                                std::vector<double>* weights_out = nullptr);

/// Weighted variant C (s o a)^T X with C = sum(a) / sum(s o a); the
/// dimension-wise median and the distances are weighted by a as well. For
/// T -> infinity this recovers the weighted sum a^T X.
std::vector<double> weighted_soft_median(const Matrix& x, const std::vector<double>& a,
                                         const SoftMedianConfig& cfg,
                                         std::vector<double>* weights_out = nullptr);

/// Reverse pass of weighted_soft_median. The dimension-wise median is treated
/// as locally constant (stop-gradient); gradients flow through the distances
/// and the weighted combination. `gbar` is d loss / d output (length d).
struct WeightedSoftMedianGrads {
    Matrix wrt_x;                 // m x d
    std::vector<double> wrt_a;    // length m
};
WeightedSoftMedianGrads weighted_soft_median_backward(const Matrix& x,
                                                      const std::vector<double>& a,
                                                      const SoftMedianConfig& cfg,
                                                      const std::vector<double>& gbar);

struct BreakdownResult {
    bool bounded = false;      // output stayed inside the inflated clean box
    double max_output_norm = 0.0;
};

/// Replaces `outlier_count` rows with a point mass at magnitude M for each M
/// in `magnitudes`; bounded iff the output stays within the bounding box of
/// the clean rows inflated by factor 2 for every M.
BreakdownResult breakdown_stress(const Matrix& x, const SoftMedianConfig& cfg,
                                 Index outlier_count, const std::vector<double>& magnitudes);

struct BiasResult {
    double bias = 0.0;      // || agg(clean) - agg(perturbed) ||_2
    double rel_bias = 0.0;  // bias / || agg(clean) ||_2
};

/// Distance between the clean and perturbed aggregation outputs, for the Soft
/// Median (use_soft_median) or the plain weighted sum.
BiasResult aggregation_bias(const Matrix& clean_x, const std::vector<double>& clean_a,
                            const Matrix& pert_x, const std::vector<double>& pert_a,
                            const SoftMedianConfig& cfg, bool use_soft_median);

}  // namespace gnnrob
