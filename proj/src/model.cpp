#include "gnnrob/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "gnnrob/loss.hpp"
#include "gnnrob/soft_median.hpp"

namespace gnnrob {

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::GCN: return "gcn";
        case ModelKind::SGC: return "sgc";
        case ModelKind::GDC: return "gdc";
        case ModelKind::PPRGo: return "pprgo";
    }
    return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
    for (ModelKind k : {ModelKind::GCN, ModelKind::SGC, ModelKind::GDC, ModelKind::PPRGo})
        if (name == model_kind_name(k)) return k;
    throw std::invalid_argument("unknown model kind: " + name);
}

const char* aggregation_name(Aggregation agg) {
    return agg == Aggregation::WeightedSum ? "weighted-sum" : "soft-median";
}

Aggregation aggregation_from_name(const std::string& name) {
    if (name == "weighted-sum") return Aggregation::WeightedSum;
    if (name == "soft-median") return Aggregation::SoftMedian;
    throw std::invalid_argument("unknown aggregation: " + name);
}

void ModelParams::check_shapes() const {
    if (layer_weights.empty()) throw std::invalid_argument("model: no layers");
    if (biases.size() != layer_weights.size())
        throw std::invalid_argument("model: bias/weight layer count mismatch");
    for (std::size_t l = 0; l < layer_weights.size(); ++l) {
        if (static_cast<Index>(biases[l].size()) != layer_weights[l].cols)
            throw std::invalid_argument("model: bias length mismatch");
        if (l > 0 && layer_weights[l].rows != layer_weights[l - 1].cols)
            throw std::invalid_argument("model: layer shape chain broken");
    }
}

ModelParams init_params(ModelKind kind, Index in_dim, Index hidden_dim, Index n_classes,
                        Index n_layers, std::uint64_t seed, Aggregation aggregation,
                        double temperature) {
    if (n_layers < 1) throw std::invalid_argument("model: need at least one layer");
    ModelParams p;
    p.kind = kind;
    p.aggregation = aggregation;
    p.temperature = temperature;
    if (kind == ModelKind::SGC) n_layers = 1;

    std::mt19937_64 rng(seed);
    auto glorot = [&](Index rows, Index cols) {
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        std::uniform_real_distribution<double> u(-limit, limit);
        Matrix w(rows, cols);
        for (double& v : w.data) v = u(rng);
        return w;
    };
    for (Index l = 0; l < n_layers; ++l) {
        const Index din = l == 0 ? in_dim : hidden_dim;
        const Index dout = l == n_layers - 1 ? n_classes : hidden_dim;
        p.layer_weights.push_back(glorot(din, dout));
        p.biases.emplace_back(static_cast<std::size_t>(dout), 0.0);
    }
    p.check_shapes();
    return p;
}

Prediction make_prediction(Matrix logits, const std::vector<Index>* labels) {
    Prediction pred;
    pred.confidences = Matrix(logits.rows, logits.cols);
    for (Index v = 0; v < logits.rows; ++v) {
        const double* z = logits.row(v);
        double mx = z[0];
        for (Index c = 1; c < logits.cols; ++c) mx = std::max(mx, z[c]);
        double sum = 0.0;
        for (Index c = 0; c < logits.cols; ++c) {
            pred.confidences(v, c) = std::exp(z[c] - mx);
            sum += pred.confidences(v, c);
        }
        for (Index c = 0; c < logits.cols; ++c) pred.confidences(v, c) /= sum;
    }
    pred.logits = std::move(logits);
    if (labels) pred.margins = classification_margins(pred.confidences, *labels);
    return pred;
}

namespace {

Matrix add_bias(Matrix m, const std::vector<double>& b) {
    for (Index r = 0; r < m.rows; ++r)
        for (Index c = 0; c < m.cols; ++c) m(r, c) += b[static_cast<std::size_t>(c)];
    return m;
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (double& v : out.data) v = std::max(v, 0.0);
    return out;
}

Matrix spmm_mat(const CsrMatrix& a, const Matrix& x) {
    Matrix out(a.n_rows, x.cols);
    spmm(a, x.data.data(), x.cols, out.data.data());
    return out;
}

/// Per-node weighted Soft Median aggregation of message rows.
Matrix aggregate_soft_median(const CsrMatrix& mp, const Matrix& messages, double temperature) {
    Matrix out(mp.n_rows, messages.cols);
    SoftMedianConfig cfg{temperature};
    for (Index v = 0; v < mp.n_rows; ++v) {
        const Index begin = mp.row_begin(v), end = mp.row_end(v);
        if (begin == end) continue;
        Matrix nbr(end - begin, messages.cols);
        std::vector<double> a(static_cast<std::size_t>(end - begin));
        for (Index k = begin; k < end; ++k) {
            const Index u = mp.col_indices[static_cast<std::size_t>(k)];
            a[static_cast<std::size_t>(k - begin)] = mp.values[static_cast<std::size_t>(k)];
            std::copy(messages.row(u), messages.row(u) + messages.cols, nbr.row(k - begin));
        }
        const std::vector<double> agg = weighted_soft_median(nbr, a, cfg);
        std::copy(agg.begin(), agg.end(), out.row(v));
    }
    return out;
}

Matrix aggregate(const ModelParams& params, const CsrMatrix& mp, const Matrix& messages) {
    if (params.aggregation == Aggregation::WeightedSum) return spmm_mat(mp, messages);
    return aggregate_soft_median(mp, messages, params.temperature);
}

/// Backward of the aggregation with respect to the message rows.
Matrix aggregate_backward(const ModelParams& params, const CsrMatrix& mp, const Matrix& messages,
                          const Matrix& grad_out) {
    if (params.aggregation == Aggregation::WeightedSum) {
        return spmm_mat(mp.transposed(), grad_out);
    }
    Matrix grad_msg(messages.rows, messages.cols);
    SoftMedianConfig cfg{params.temperature};
    for (Index v = 0; v < mp.n_rows; ++v) {
        const Index begin = mp.row_begin(v), end = mp.row_end(v);
        if (begin == end) continue;
        Matrix nbr(end - begin, messages.cols);
        std::vector<double> a(static_cast<std::size_t>(end - begin));
        for (Index k = begin; k < end; ++k) {
            const Index u = mp.col_indices[static_cast<std::size_t>(k)];
            a[static_cast<std::size_t>(k - begin)] = mp.values[static_cast<std::size_t>(k)];
            std::copy(messages.row(u), messages.row(u) + messages.cols, nbr.row(k - begin));
        }
        std::vector<double> gbar(grad_out.row(v), grad_out.row(v) + grad_out.cols);
        const WeightedSoftMedianGrads g = weighted_soft_median_backward(nbr, a, cfg, gbar);
        for (Index k = begin; k < end; ++k) {
            const Index u = mp.col_indices[static_cast<std::size_t>(k)];
            for (Index j = 0; j < messages.cols; ++j)
                grad_msg(u, j) += g.wrt_x(k - begin, j);
        }
    }
    return grad_msg;
}

}  // namespace

Prediction forward(const ModelParams& params, const CsrMatrix& mp_matrix, const Matrix& x,
                   ForwardTape* tape, const std::vector<Index>* labels) {
    params.check_shapes();
    if (mp_matrix.n_cols != x.rows || params.in_dim() != x.cols)
        throw std::invalid_argument("forward: shape mismatch");
    if (tape) {
        *tape = ForwardTape{};
        tape->mp = mp_matrix;
    }

    Matrix h = x;
    if (params.kind == ModelKind::SGC) {
        for (Index s = 0; s < params.propagation_steps; ++s) h = spmm_mat(mp_matrix, h);
        Matrix z = add_bias(matmul(h, params.layer_weights[0]), params.biases[0]);
        if (tape) {
            tape->inputs.push_back(h);
            tape->messages.push_back(z);
            tape->pre_acts.push_back(z);
        }
        return make_prediction(std::move(z), labels);
    }

    const Index n_layers = params.n_layers();
    for (Index l = 0; l < n_layers; ++l) {
        Matrix m = matmul(h, params.layer_weights[static_cast<std::size_t>(l)]);
        Matrix z = add_bias(aggregate(params, mp_matrix, m), params.biases[static_cast<std::size_t>(l)]);
        if (tape) {
            tape->inputs.push_back(h);
            tape->messages.push_back(m);
            tape->pre_acts.push_back(z);
        }
        h = l + 1 < n_layers ? relu(z) : std::move(z);
    }
    return make_prediction(std::move(h), labels);
}

Matrix pprgo_encode(const ModelParams& params, const Matrix& x) {
    params.check_shapes();
    Matrix h = x;
    const Index n_layers = params.n_layers();
    for (Index l = 0; l < n_layers; ++l) {
        Matrix z = add_bias(matmul(h, params.layer_weights[static_cast<std::size_t>(l)]),
                            params.biases[static_cast<std::size_t>(l)]);
        h = l + 1 < n_layers ? relu(z) : std::move(z);
    }
    return h;
}

namespace {

Matrix gather_rows(const Matrix& m, const SparseRow& row, std::vector<double>* weights) {
    Matrix nbr(static_cast<Index>(row.size()), m.cols);
    weights->resize(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
        (*weights)[i] = row[i].second;
        std::copy(m.row(row[i].first), m.row(row[i].first) + m.cols, nbr.row(static_cast<Index>(i)));
    }
    return nbr;
}

}  // namespace

std::vector<double> pprgo_aggregate(const ModelParams& params, const SparseRow& row,
                                    const Matrix& encoded) {
    std::vector<double> out(static_cast<std::size_t>(encoded.cols), 0.0);
    if (row.empty()) return out;
    if (params.aggregation == Aggregation::WeightedSum) {
        for (const auto& [u, w] : row)
            for (Index c = 0; c < encoded.cols; ++c)
                out[static_cast<std::size_t>(c)] += w * encoded(u, c);
        return out;
    }
    std::vector<double> a;
    const Matrix nbr = gather_rows(encoded, row, &a);
    return weighted_soft_median(nbr, a, SoftMedianConfig{params.temperature});
}

Prediction pprgo_forward(const ModelParams& params, const PprMatrix& ppr, const Matrix& x,
                         const std::vector<Index>& nodes, const std::vector<Index>* labels) {
    const Matrix encoded = pprgo_encode(params, x);
    Matrix logits(static_cast<Index>(nodes.size()), encoded.cols);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const SparseRow* row = ppr.row_for(nodes[i]);
        if (!row) throw std::invalid_argument("pprgo: missing PPR row for node " +
                                              std::to_string(nodes[i]));
        const std::vector<double> z = pprgo_aggregate(params, *row, encoded);
        std::copy(z.begin(), z.end(), logits.row(static_cast<Index>(i)));
    }
    if (labels) {
        std::vector<Index> node_labels(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i)
            node_labels[i] = (*labels)[static_cast<std::size_t>(nodes[i])];
        return make_prediction(std::move(logits), &node_labels);
    }
    return make_prediction(std::move(logits));
}

std::vector<double> pprgo_row_gradient(const ModelParams& params, const SparseRow& row,
                                       const Matrix& encoded, const std::vector<double>& gbar) {
    std::vector<double> grad(row.size(), 0.0);
    if (params.aggregation == Aggregation::WeightedSum) {
        for (std::size_t i = 0; i < row.size(); ++i)
            for (Index c = 0; c < encoded.cols; ++c)
                grad[i] += gbar[static_cast<std::size_t>(c)] * encoded(row[i].first, c);
        return grad;
    }
    std::vector<double> a;
    const Matrix nbr = gather_rows(encoded, row, &a);
    return weighted_soft_median_backward(nbr, a, SoftMedianConfig{params.temperature}, gbar).wrt_a;
}

ParamGrads backward_wrt_params(const ForwardTape& tape, const ModelParams& params,
                               const Matrix& grad_logits) {
    const Index n_layers = params.n_layers();
    if (static_cast<Index>(tape.pre_acts.size()) != n_layers)
        throw std::invalid_argument("backward: tape does not match model");
    ParamGrads grads;
    grads.weights.resize(static_cast<std::size_t>(n_layers));
    grads.biases.resize(static_cast<std::size_t>(n_layers));

    Matrix g = grad_logits;  // d loss / d Z^l
    for (Index l = n_layers - 1; l >= 0; --l) {
        const std::size_t li = static_cast<std::size_t>(l);
        grads.biases[li].assign(static_cast<std::size_t>(params.layer_weights[li].cols), 0.0);
        for (Index r = 0; r < g.rows; ++r)
            for (Index c = 0; c < g.cols; ++c) grads.biases[li][static_cast<std::size_t>(c)] += g(r, c);

        Matrix grad_msg = params.kind == ModelKind::SGC
                              ? g
                              : aggregate_backward(params, tape.mp, tape.messages[li], g);
        grads.weights[li] = matmul_transposed_a(tape.inputs[li], grad_msg);
        if (l > 0) {
            g = matmul_transposed_b(grad_msg, params.layer_weights[li]);
            const Matrix& z = tape.pre_acts[li - 1];
            for (Index r = 0; r < g.rows; ++r)
                for (Index c = 0; c < g.cols; ++c)
                    if (z(r, c) <= 0.0) g(r, c) = 0.0;
        }
    }
    return grads;
}

Matrix pprgo_backward_to_encoded(const ModelParams& params, const PprMatrix& ppr,
                                 const std::vector<Index>& nodes, const Matrix& encoded,
                                 const Matrix& grad_logits) {
    Matrix grad_enc(encoded.rows, encoded.cols);
    SoftMedianConfig cfg{params.temperature};
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const SparseRow* row = ppr.row_for(nodes[i]);
        if (!row) throw std::invalid_argument("pprgo backward: missing PPR row");
        if (row->empty()) continue;
        const double* gz = grad_logits.row(static_cast<Index>(i));
        if (params.aggregation == Aggregation::WeightedSum) {
            for (const auto& [u, w] : *row)
                for (Index c = 0; c < encoded.cols; ++c) grad_enc(u, c) += w * gz[c];
        } else {
            std::vector<double> a;
            const Matrix nbr = gather_rows(encoded, *row, &a);
            std::vector<double> gbar(gz, gz + encoded.cols);
            const WeightedSoftMedianGrads g = weighted_soft_median_backward(nbr, a, cfg, gbar);
            for (std::size_t k = 0; k < row->size(); ++k)
                for (Index c = 0; c < encoded.cols; ++c)
                    grad_enc((*row)[k].first, c) += g.wrt_x(static_cast<Index>(k), c);
        }
    }
    return grad_enc;
}

ParamGrads pprgo_encoder_backward(const ModelParams& params, const Matrix& x,
                                  const Matrix& grad_encoded) {
    const Index n_layers = params.n_layers();
    std::vector<Matrix> inputs, pre_acts;
    Matrix h = x;
    for (Index l = 0; l < n_layers; ++l) {
        inputs.push_back(h);
        Matrix z = add_bias(matmul(h, params.layer_weights[static_cast<std::size_t>(l)]),
                            params.biases[static_cast<std::size_t>(l)]);
        pre_acts.push_back(z);
        h = l + 1 < n_layers ? relu(z) : std::move(z);
    }

    ParamGrads grads;
    grads.weights.resize(static_cast<std::size_t>(n_layers));
    grads.biases.resize(static_cast<std::size_t>(n_layers));
    Matrix g = grad_encoded;
    for (Index l = n_layers - 1; l >= 0; --l) {
        const std::size_t li = static_cast<std::size_t>(l);
        grads.biases[li].assign(static_cast<std::size_t>(params.layer_weights[li].cols), 0.0);
        for (Index r = 0; r < g.rows; ++r)
            for (Index c = 0; c < g.cols; ++c) grads.biases[li][static_cast<std::size_t>(c)] += g(r, c);
        grads.weights[li] = matmul_transposed_a(inputs[li], g);
        if (l > 0) {
            g = matmul_transposed_b(g, params.layer_weights[li]);
            const Matrix& z = pre_acts[li - 1];
            for (Index r = 0; r < g.rows; ++r)
                for (Index c = 0; c < g.cols; ++c)
                    if (z(r, c) <= 0.0) g(r, c) = 0.0;
        }
    }
    return grads;
}

std::vector<double> backward_wrt_edges(const ForwardTape& tape, const ModelParams& params,
                                       const Matrix& grad_logits,
                                       const CsrMatrix& clean_adjacency,
                                       const CsrMatrix& perturbed_adjacency,
                                       const std::vector<std::pair<Index, Index>>& candidates,
                                       bool directed, bool freeze_normalization) {
    if (params.aggregation != Aggregation::WeightedSum)
        throw std::invalid_argument("edge gradients require weighted-sum aggregation");
    if (params.kind == ModelKind::SGC || params.kind == ModelKind::PPRGo)
        throw std::invalid_argument("edge gradients support layered message-passing models only");
    const Index n_layers = params.n_layers();
    if (static_cast<Index>(tape.pre_acts.size()) != n_layers)
        throw std::invalid_argument("edge gradients: stale tape");

    // Per-layer d loss / d Z^l, top down.
    std::vector<Matrix> g_layers(static_cast<std::size_t>(n_layers));
    g_layers.back() = grad_logits;
    for (Index l = n_layers - 1; l > 0; --l) {
        const std::size_t li = static_cast<std::size_t>(l);
        Matrix grad_msg = spmm_mat(tape.mp.transposed(), g_layers[li]);
        Matrix g = matmul_transposed_b(grad_msg, params.layer_weights[li]);
        const Matrix& z = tape.pre_acts[li - 1];
        for (Index r = 0; r < g.rows; ++r)
            for (Index c = 0; c < g.cols; ++c)
                if (z(r, c) <= 0.0) g(r, c) = 0.0;
        g_layers[li - 1] = std::move(g);
    }

    // s_at(u, v) = d loss / d mp(u, v) = sum_l G^l_u . M^l_v
    auto s_at = [&](Index u, Index v) {
        double s = 0.0;
        for (Index l = 0; l < n_layers; ++l) {
            const Matrix& g = g_layers[static_cast<std::size_t>(l)];
            const Matrix& m = tape.messages[static_cast<std::size_t>(l)];
            const double* gu = g.row(u);
            const double* mv = m.row(v);
            for (Index c = 0; c < g.cols; ++c) s += gu[c] * mv[c];
        }
        return s;
    };

    const Index n = perturbed_adjacency.n_rows;
    std::vector<double> deg = perturbed_adjacency.row_sums();
    for (double& d : deg) d += 1.0;  // self-loop

    std::vector<double> row_acc, col_acc;
    if (!freeze_normalization) {
        row_acc.assign(static_cast<std::size_t>(n), 0.0);
        col_acc.assign(static_cast<std::size_t>(n), 0.0);
        for (Index u = 0; u < n; ++u)
            for (Index k = tape.mp.row_begin(u); k < tape.mp.row_end(u); ++k) {
                const Index v = tape.mp.col_indices[static_cast<std::size_t>(k)];
                const double contrib = tape.mp.values[static_cast<std::size_t>(k)] * s_at(u, v);
                row_acc[static_cast<std::size_t>(u)] += contrib;
                col_acc[static_cast<std::size_t>(v)] += contrib;
            }
    }

    std::vector<double> grads(candidates.size(), 0.0);
    for (std::size_t e = 0; e < candidates.size(); ++e) {
        const auto [i, j] = candidates[e];
        if (i == j) throw std::invalid_argument("edge gradients: self-loop candidate");
        const double di = deg[static_cast<std::size_t>(i)], dj = deg[static_cast<std::size_t>(j)];
        double grad_w = s_at(i, j);
        if (!directed) grad_w += s_at(j, i);
        grad_w /= std::sqrt(di * dj);
        if (!freeze_normalization) {
            grad_w -= (row_acc[static_cast<std::size_t>(i)] + col_acc[static_cast<std::size_t>(i)]) /
                      (2.0 * di);
            if (!directed)
                grad_w -= (row_acc[static_cast<std::size_t>(j)] + col_acc[static_cast<std::size_t>(j)]) /
                          (2.0 * dj);
        }
        const double sign = clean_adjacency.at(i, j) > 0.0 ? -1.0 : 1.0;
        grads[e] = sign * grad_w;
    }
    return grads;
}

}  // namespace gnnrob
