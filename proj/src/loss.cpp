#include "gnnrob/loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gnnrob {

const char* loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::CE: return "CE";
        case LossKind::Margin: return "margin";
        case LossKind::CW: return "CW";
        case LossKind::NCE: return "NCE";
        case LossKind::EluMargin: return "elu-margin";
        case LossKind::MCE: return "MCE";
        case LossKind::TanhMargin: return "tanh-margin";
    }
    return "?";
}

LossKind loss_from_name(const std::string& name) {
    for (LossKind k : all_loss_kinds())
        if (name == loss_name(k)) return k;
    throw std::invalid_argument("unknown loss: " + name);
}

std::vector<LossKind> all_loss_kinds() {
    return {LossKind::CE,  LossKind::Margin, LossKind::CW,        LossKind::NCE,
            LossKind::EluMargin, LossKind::MCE,    LossKind::TanhMargin};
}

namespace {

double logsumexp(const double* z, Index c_count) {
    double mx = z[0];
    for (Index c = 1; c < c_count; ++c) mx = std::max(mx, z[c]);
    double s = 0.0;
    for (Index c = 0; c < c_count; ++c) s += std::exp(z[c] - mx);
    return mx + std::log(s);
}

Index argmax_excluding(const double* z, Index c_count, Index excluded) {
    Index best = excluded == 0 ? 1 : 0;
    for (Index c = 0; c < c_count; ++c)
        if (c != excluded && z[c] > z[best]) best = c;
    return best;
}

Index argmax(const double* z, Index c_count) {
    Index best = 0;
    for (Index c = 1; c < c_count; ++c)
        if (z[c] > z[best]) best = c;
    return best;
}

}  // namespace

LossEval eval_loss(LossKind kind, const Matrix& logits, const std::vector<Index>& labels,
                   const std::vector<Index>& mask) {
    const Index n = logits.rows, c_count = logits.cols;
    if (static_cast<Index>(labels.size()) != n)
        throw std::invalid_argument("eval_loss: label count mismatch");
    if (c_count < 2) throw std::invalid_argument("eval_loss: need at least two classes");

    LossEval out;
    out.grad_logits = Matrix(n, c_count);
    out.per_node.assign(static_cast<std::size_t>(n), 0.0);

    std::vector<Index> active;
    if (kind == LossKind::MCE) {
        for (Index v : mask)
            if (argmax(logits.row(v), c_count) == labels[static_cast<std::size_t>(v)])
                active.push_back(v);
        out.correct_set = active;
        if (active.empty()) {
            out.empty_mce = true;
            return out;
        }
    } else {
        active = mask;
        if (active.empty()) throw std::invalid_argument("eval_loss: empty mask");
    }

    const double scale = 1.0 / static_cast<double>(active.size());
    for (Index v : active) {
        const double* z = logits.row(v);
        double* g = out.grad_logits.row(v);
        const Index cs = labels[static_cast<std::size_t>(v)];
        const Index cm = argmax_excluding(z, c_count, cs);
        double value = 0.0;
        switch (kind) {
            case LossKind::CE:
            case LossKind::MCE: {
                const double lse = logsumexp(z, c_count);
                value = -z[cs] + lse;
                for (Index c = 0; c < c_count; ++c) g[c] = scale * std::exp(z[c] - lse);
                g[cs] -= scale;
                break;
            }
            case LossKind::Margin: {
                value = z[cm] - z[cs];
                g[cm] += scale;
                g[cs] -= scale;
                break;
            }
            case LossKind::CW: {
                const double m = z[cm] - z[cs];
                value = std::min(m, 0.0);
                if (m < 0.0) {
                    g[cm] += scale;
                    g[cs] -= scale;
                }
                break;
            }
            case LossKind::NCE: {
                const double lse = logsumexp(z, c_count);
                value = z[cm] - lse;
                for (Index c = 0; c < c_count; ++c) g[c] = -scale * std::exp(z[c] - lse);
                g[cm] += scale;
                break;
            }
            case LossKind::EluMargin: {
                // -elu(z_{c*} - max_{c != c*} z_c), alpha = 1
                const double u = z[cs] - z[cm];
                const double eu = u > 0.0 ? u : std::expm1(u);
                const double du = u > 0.0 ? 1.0 : std::exp(u);
                value = -eu;
                g[cs] -= scale * du;
                g[cm] += scale * du;
                break;
            }
            case LossKind::TanhMargin: {
                const double t = std::tanh(z[cm] - z[cs]);
                value = t;
                const double d = 1.0 - t * t;
                g[cm] += scale * d;
                g[cs] -= scale * d;
                break;
            }
        }
        out.per_node[static_cast<std::size_t>(v)] = value;
        out.value += scale * value;
    }
    return out;
}

namespace {

/// Derivative of the per-node loss with respect to z_{c*} at margin psi in the
/// binary z = (z0, 0) parameterization (correct class 0).
double derivative_at(LossKind kind, double psi, double* value_out = nullptr) {
    const double p = (1.0 + psi) / 2.0;
    Matrix z(1, 2);
    z(0, 0) = std::log(p / (1.0 - p));
    const LossEval e = eval_loss(kind, z, {0}, {0});
    if (value_out) *value_out = e.value;
    return e.grad_logits(0, 0);
}

}  // namespace

std::vector<double> default_margin_grid(std::size_t half) {
    // symmetric points psi = -1 + (2i - 1)/(2 half), i = 1..2 half; never hits
    // 0 or the endpoints
    std::vector<double> grid;
    grid.reserve(2 * half);
    for (std::size_t i = 1; i <= 2 * half; ++i)
        grid.push_back(-1.0 + (2.0 * static_cast<double>(i) - 1.0) / (2.0 * static_cast<double>(half)));
    return grid;
}

PropertyReport check_loss_properties(LossKind kind, const std::vector<double>& grid) {
    PropertyReport rep;
    rep.kind = kind;
    rep.grid_size = grid.size();

    std::vector<double> neg, pos;
    for (double psi : grid) {
        if (!(psi > -1.0 && psi < 1.0) || psi == 0.0)
            throw std::invalid_argument("loss property grid must lie in (-1,1) away from 0");
        (psi < 0.0 ? neg : pos).push_back(psi);
    }
    std::sort(neg.begin(), neg.end());
    std::sort(pos.begin(), pos.end());

    // (I) zero derivative on the misclassified side
    bool prop_i = true;
    std::vector<double> dneg(neg.size());
    for (std::size_t i = 0; i < neg.size(); ++i) {
        dneg[i] = derivative_at(kind, neg[i]);
        if (std::abs(dneg[i]) >= 1e-9) prop_i = false;
    }

    // (II) strictly increasing derivative on the correct side
    bool prop_ii = true;
    std::vector<double> dpos(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) dpos[i] = derivative_at(kind, pos[i]);
    for (std::size_t i = 1; i < pos.size(); ++i)
        if (!(dpos[i] > dpos[i - 1] + 1e-12)) prop_ii = false;

    // (A) value bounded approaching full misclassification
    double near = 0.0, nearer = 0.0;
    derivative_at(kind, -1.0 + 1e-4, &near);
    derivative_at(kind, -1.0 + 1e-8, &nearer);
    const bool prop_a = std::abs(nearer - near) < 1e-3;

    // (B) negative derivative everywhere, increasing toward the boundary on
    // the correct side and away from -1 on the misclassified side
    bool prop_b = prop_ii;
    for (double d : dneg)
        if (!(d < -1e-12)) prop_b = false;
    for (double d : dpos)
        if (!(d < -1e-12)) prop_b = false;
    for (std::size_t i = 1; i < neg.size(); ++i)
        if (!(dneg[i] < dneg[i - 1] - 1e-12)) prop_b = false;

    rep.gradient_zero_when_misclassified = prop_i;
    rep.gradient_increasing_when_correct = prop_ii;
    rep.bounded_when_misclassified = prop_a;
    rep.boundary_seeking_both_sides = prop_b;
    return rep;
}

std::string PropertyReport::to_json() const {
    std::ostringstream os;
    os << "{\"loss\": \"" << loss_name(kind) << "\""
       << ", \"I\": " << (gradient_zero_when_misclassified ? "true" : "false")
       << ", \"II\": " << (gradient_increasing_when_correct ? "true" : "false")
       << ", \"A\": " << (bounded_when_misclassified ? "true" : "false")
       << ", \"B\": " << (boundary_seeking_both_sides ? "true" : "false")
       << ", \"grid_size\": " << grid_size << "}";
    return os.str();
}

std::vector<double> classification_margins(const Matrix& confidences,
                                           const std::vector<Index>& labels) {
    const Index n = confidences.rows, c_count = confidences.cols;
    std::vector<double> psi(static_cast<std::size_t>(n));
    for (Index v = 0; v < n; ++v) {
        const double* p = confidences.row(v);
        const Index cs = labels[static_cast<std::size_t>(v)];
        double best_other = -1.0;
        for (Index c = 0; c < c_count; ++c)
            if (c != cs) best_other = std::max(best_other, p[c]);
        psi[static_cast<std::size_t>(v)] = p[cs] - best_other;
    }
    return psi;
}

MarginHistogram margin_distribution(const Matrix& confidences, const std::vector<Index>& labels,
                                    const std::vector<Index>& mask) {
    const std::vector<double> psi = classification_margins(confidences, labels);
    MarginHistogram h;
    h.counts.assign(40, 0);
    for (Index v : mask) {
        const double m = psi[static_cast<std::size_t>(v)];
        h.values.push_back(m);
        Index bin = static_cast<Index>(std::floor((m + 1.0) / 2.0 * 40.0));
        bin = std::clamp<Index>(bin, 0, 39);
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    return h;
}

}  // namespace gnnrob
