#include "gnnrob/soft_median.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gnnrob {

namespace {

double total_weight(const std::vector<double>& a) {
    double w = 0.0;
    for (double v : a) {
        if (v < 0.0) throw std::invalid_argument("soft median: negative weight");
        w += v;
    }
    if (w <= 0.0) throw std::invalid_argument("soft median: weights sum to zero");
    return w;
}

/// Distances of rows to the (weighted) dimension-wise median and the softmax
/// of their negated, temperature-scaled values.
std::vector<double> softmax_weights(const Matrix& x, const std::vector<double>& med,
                                    double temperature) {
    const Index m = x.rows, d = x.cols;
    std::vector<double> z(static_cast<std::size_t>(m));
    const double scale = -1.0 / (temperature * std::sqrt(static_cast<double>(d)));
    for (Index v = 0; v < m; ++v) {
        double c2 = 0.0;
        for (Index j = 0; j < d; ++j) {
            const double diff = med[static_cast<std::size_t>(j)] - x(v, j);
            c2 += diff * diff;
        }
        z[static_cast<std::size_t>(v)] = scale * std::sqrt(c2);
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return z;
}

}  // namespace

std::vector<double> weighted_dimensionwise_median(const Matrix& x, const std::vector<double>& a) {
    const Index m = x.rows, d = x.cols;
    if (static_cast<Index>(a.size()) != m)
        throw std::invalid_argument("weighted median: weight length mismatch");
    const double half = total_weight(a) / 2.0;
    std::vector<double> med(static_cast<std::size_t>(d));
    std::vector<Index> order(static_cast<std::size_t>(m));
    for (Index j = 0; j < d; ++j) {
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(), [&](Index u, Index v) { return x(u, j) < x(v, j); });
        double cum = 0.0;
        for (Index v : order) {
            cum += a[static_cast<std::size_t>(v)];
            if (cum >= half) {
                med[static_cast<std::size_t>(j)] = x(v, j);
                break;
            }
        }
    }
    return med;
}

std::vector<double> soft_median(const Matrix& x, const SoftMedianConfig& cfg,
                                std::vector<double>* weights_out) {
    if (x.rows < 1) throw std::invalid_argument("soft median: no rows");
    const std::vector<double> ones(static_cast<std::size_t>(x.rows), 1.0);
    const std::vector<double> med = weighted_dimensionwise_median(x, ones);
    const std::vector<double> s = softmax_weights(x, med, cfg.temperature);
    std::vector<double> out(static_cast<std::size_t>(x.cols), 0.0);
    for (Index v = 0; v < x.rows; ++v)
        for (Index j = 0; j < x.cols; ++j)
            out[static_cast<std::size_t>(j)] += s[static_cast<std::size_t>(v)] * x(v, j);
    if (weights_out) *weights_out = s;
    return out;
}

std::vector<double> weighted_soft_median(const Matrix& x, const std::vector<double>& a,
                                         const SoftMedianConfig& cfg,
                                         std::vector<double>* weights_out) {
    const Index m = x.rows, d = x.cols;
    const double w = total_weight(a);
    const std::vector<double> med = weighted_dimensionwise_median(x, a);
    const std::vector<double> s = softmax_weights(x, med, cfg.temperature);
    double sa = 0.0;
    for (Index v = 0; v < m; ++v)
        sa += s[static_cast<std::size_t>(v)] * a[static_cast<std::size_t>(v)];
    const double c_norm = w / sa;
    std::vector<double> out(static_cast<std::size_t>(d), 0.0);
    for (Index v = 0; v < m; ++v) {
        const double coeff = c_norm * s[static_cast<std::size_t>(v)] * a[static_cast<std::size_t>(v)];
        for (Index j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += coeff * x(v, j);
    }
    if (weights_out) *weights_out = s;
    return out;
}

WeightedSoftMedianGrads weighted_soft_median_backward(const Matrix& x,
                                                      const std::vector<double>& a,
                                                      const SoftMedianConfig& cfg,
                                                      const std::vector<double>& gbar) {
    const Index m = x.rows, d = x.cols;
    if (static_cast<Index>(gbar.size()) != d)
        throw std::invalid_argument("soft median backward: gradient length mismatch");
    const double w = total_weight(a);
    const std::vector<double> med = weighted_dimensionwise_median(x, a);
    const std::vector<double> s = softmax_weights(x, med, cfg.temperature);
    double sa = 0.0;
    for (Index v = 0; v < m; ++v)
        sa += s[static_cast<std::size_t>(v)] * a[static_cast<std::size_t>(v)];
    const double c_norm = w / sa;

    std::vector<double> out(static_cast<std::size_t>(d), 0.0);
    for (Index v = 0; v < m; ++v) {
        const double coeff = c_norm * s[static_cast<std::size_t>(v)] * a[static_cast<std::size_t>(v)];
        for (Index j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += coeff * x(v, j);
    }
    double g_dot_o = 0.0;
    for (Index j = 0; j < d; ++j) g_dot_o += gbar[static_cast<std::size_t>(j)] * out[static_cast<std::size_t>(j)];

    WeightedSoftMedianGrads grads;
    grads.wrt_x = Matrix(m, d);
    grads.wrt_a.assign(static_cast<std::size_t>(m), 0.0);

    // through the softmax weights: g_s[v] = a_v (C (g.X_v) - (g.o)/S)
    std::vector<double> g_dot_x(static_cast<std::size_t>(m));
    std::vector<double> g_s(static_cast<std::size_t>(m));
    for (Index v = 0; v < m; ++v) {
        double dot = 0.0;
        for (Index j = 0; j < d; ++j) dot += gbar[static_cast<std::size_t>(j)] * x(v, j);
        g_dot_x[static_cast<std::size_t>(v)] = dot;
        g_s[static_cast<std::size_t>(v)] =
            a[static_cast<std::size_t>(v)] * (c_norm * dot - g_dot_o / sa);
    }
    double s_dot_gs = 0.0;
    for (Index v = 0; v < m; ++v)
        s_dot_gs += s[static_cast<std::size_t>(v)] * g_s[static_cast<std::size_t>(v)];

    const double dist_scale = -1.0 / (cfg.temperature * std::sqrt(static_cast<double>(d)));
    for (Index v = 0; v < m; ++v) {
        const double sv = s[static_cast<std::size_t>(v)];
        const double av = a[static_cast<std::size_t>(v)];
        const double g_z = sv * (g_s[static_cast<std::size_t>(v)] - s_dot_gs);
        const double g_c = g_z * dist_scale;
        double c_v = 0.0;
        for (Index j = 0; j < d; ++j) {
            const double diff = med[static_cast<std::size_t>(j)] - x(v, j);
            c_v += diff * diff;
        }
        c_v = std::sqrt(c_v);
        for (Index j = 0; j < d; ++j) {
            double g = c_norm * sv * av * gbar[static_cast<std::size_t>(j)];
            if (c_v > 0.0)
                g += g_c * (x(v, j) - med[static_cast<std::size_t>(j)]) / c_v;
            grads.wrt_x(v, j) = g;
        }
        grads.wrt_a[static_cast<std::size_t>(v)] =
            g_dot_o / w - sv * g_dot_o / sa + c_norm * sv * g_dot_x[static_cast<std::size_t>(v)];
    }
    return grads;
}

BreakdownResult breakdown_stress(const Matrix& x, const SoftMedianConfig& cfg,
                                 Index outlier_count, const std::vector<double>& magnitudes) {
    const Index m = x.rows, d = x.cols;
    if (outlier_count < 0 || outlier_count > m)
        throw std::invalid_argument("breakdown: bad outlier count");
    std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) {
        double mn = x(0, j), mx = x(0, j);
        for (Index v = 1; v < m; ++v) {
            mn = std::min(mn, x(v, j));
            mx = std::max(mx, x(v, j));
        }
        const double c = (mn + mx) / 2.0;
        lo[static_cast<std::size_t>(j)] = c - 2.0 * (c - mn);
        hi[static_cast<std::size_t>(j)] = c + 2.0 * (mx - c);
    }

    BreakdownResult res;
    res.bounded = true;
    Matrix pert = x;
    for (double mag : magnitudes) {
        for (Index v = 0; v < outlier_count; ++v)
            for (Index j = 0; j < d; ++j) pert(v, j) = mag;
        const std::vector<double> out = soft_median(pert, cfg);
        double norm = 0.0;
        for (Index j = 0; j < d; ++j) {
            const double o = out[static_cast<std::size_t>(j)];
            norm += o * o;
            if (o < lo[static_cast<std::size_t>(j)] || o > hi[static_cast<std::size_t>(j)])
                res.bounded = false;
        }
        res.max_output_norm = std::max(res.max_output_norm, std::sqrt(norm));
    }
    return res;
}

BiasResult aggregation_bias(const Matrix& clean_x, const std::vector<double>& clean_a,
                            const Matrix& pert_x, const std::vector<double>& pert_a,
                            const SoftMedianConfig& cfg, bool use_soft_median) {
    if (clean_x.cols != pert_x.cols)
        throw std::invalid_argument("aggregation bias: dimension mismatch");
    auto agg = [&](const Matrix& x, const std::vector<double>& a) {
        if (use_soft_median) return weighted_soft_median(x, a, cfg);
        std::vector<double> out(static_cast<std::size_t>(x.cols), 0.0);
        for (Index v = 0; v < x.rows; ++v)
            for (Index j = 0; j < x.cols; ++j)
                out[static_cast<std::size_t>(j)] += a[static_cast<std::size_t>(v)] * x(v, j);
        return out;
    };
    const std::vector<double> c = agg(clean_x, clean_a);
    const std::vector<double> p = agg(pert_x, pert_a);
    BiasResult r;
    double cn = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const double diff = c[j] - p[j];
        r.bias += diff * diff;
        cn += c[j] * c[j];
    }
    r.bias = std::sqrt(r.bias);
    cn = std::sqrt(cn);
    r.rel_bias = cn > 0.0 ? r.bias / cn : r.bias;
    return r;
}

}  // namespace gnnrob
