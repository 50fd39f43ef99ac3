#pragma once

#include <string>
#include <vector>

#include "gnnrob/dense.hpp"

namespace gnnrob {

/// Attacker-maximized global surrogate losses. All variants are oriented so
/// that a larger value means a stronger attack.
enum class LossKind { CE, Margin, CW, NCE, EluMargin, MCE, TanhMargin };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);
std::vector<LossKind> all_loss_kinds();

struct LossEval {
    double value = 0.0;
    Matrix grad_logits;            // n x C
    std::vector<double> per_node;  // length n, zero outside the mask
    std::vector<Index> correct_set;  // V+ within the mask (MCE only)
    bool empty_mce = false;          // MCE with no correctly classified node
};

/// Mean per-node loss over the mask (MCE: over the correctly classified
/// subset of the mask) with the analytic gradient with respect to the logits.
LossEval eval_loss(LossKind kind, const Matrix& logits, const std::vector<Index>& labels,
                   const std::vector<Index>& mask);

struct PropertyReport {
    LossKind kind = LossKind::CE;
    bool gradient_zero_when_misclassified = false;  // (I)
    bool gradient_increasing_when_correct = false;  // (II)
    bool bounded_when_misclassified = false;        // (A)
    bool boundary_seeking_both_sides = false;       // (B)
    std::size_t grid_size = 0;

    std::string to_json() const;
};

/// Symmetric margin grid over (-1, 1): `half` points per side, none at 0 or
/// +/-1.
std::vector<double> default_margin_grid(std::size_t half = 200);

/// Numerically evaluates the four surrogate-loss properties on the binary
/// logit parameterization z = (z0, 0) with correct class 0, where the margin
/// psi determines z0 = log((1+psi)/(1-psi)). Checks, via the analytic
/// d loss / d z_{c*}:
///   (I)  derivative zero (|.| < 1e-9) for every psi < 0
///   (II) derivative strictly increasing in psi on (0, 1)
///   (A)  loss value bounded as psi -> -1 (probed near the endpoint)
///   (B)  derivative negative everywhere, strictly increasing on (0, 1) and
///        strictly decreasing on (-1, 0)
PropertyReport check_loss_properties(LossKind kind, const std::vector<double>& grid);

/// Classification margins psi = min_{c != c*} p_{c*} - p_c per node, from the
/// confidence matrix.
std::vector<double> classification_margins(const Matrix& confidences,
                                           const std::vector<Index>& labels);

struct MarginHistogram {
    std::vector<Index> counts;  // 40 fixed bins over [-1, 1]
    std::vector<double> values;  // raw psi of the masked nodes
};

MarginHistogram margin_distribution(const Matrix& confidences, const std::vector<Index>& labels,
                                    const std::vector<Index>& mask);

}  // namespace gnnrob
