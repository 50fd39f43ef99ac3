#include "gnnrob/train.hpp"

#include <cmath>
#include <stdexcept>

#include "gnnrob/loss.hpp"

namespace gnnrob {

std::vector<Index> predict_classes(const Matrix& logits) {
    std::vector<Index> out(static_cast<std::size_t>(logits.rows));
    for (Index r = 0; r < logits.rows; ++r) {
        const double* z = logits.row(r);
        Index best = 0;
        for (Index c = 1; c < logits.cols; ++c)
            if (z[c] > z[best]) best = c;
        out[static_cast<std::size_t>(r)] = best;
    }
    return out;
}

namespace {

struct AdamState {
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    Index step = 0;

    explicit AdamState(const ModelParams& p) {
        for (const Matrix& w : p.layer_weights) {
            m_w.emplace_back(w.rows, w.cols);
            v_w.emplace_back(w.rows, w.cols);
        }
        for (const auto& b : p.biases) {
            m_b.emplace_back(b.size(), 0.0);
            v_b.emplace_back(b.size(), 0.0);
        }
    }

    void update(ModelParams& p, const ParamGrads& g, const TrainConfig& cfg) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        auto apply = [&](double& param, double grad, double& m, double& v) {
            grad += cfg.weight_decay * param;
            m = beta1 * m + (1.0 - beta1) * grad;
            v = beta2 * v + (1.0 - beta2) * grad * grad;
            param -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        };
        for (std::size_t l = 0; l < p.layer_weights.size(); ++l) {
            for (std::size_t i = 0; i < p.layer_weights[l].data.size(); ++i)
                apply(p.layer_weights[l].data[i], g.weights[l].data[i], m_w[l].data[i],
                      v_w[l].data[i]);
            for (std::size_t i = 0; i < p.biases[l].size(); ++i)
                apply(p.biases[l][i], g.biases[l][i], m_b[l][i], v_b[l][i]);
        }
    }
};

}  // namespace

ModelParams train(ModelParams params, const Graph& g, const CsrMatrix& mp_matrix,
                  const TrainConfig& cfg, TrainRecord* record) {
    if (g.splits.train.empty() || g.splits.valid.empty())
        throw std::invalid_argument("train: splits missing");
    AdamState adam(params);
    ModelParams best = params;
    Index best_epoch = -1;
    double best_acc = -1.0;

    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
        ForwardTape tape;
        const Prediction pred = forward(params, mp_matrix, g.features, &tape);
        const LossEval loss = eval_loss(LossKind::CE, pred.logits, g.labels, g.splits.train);
        if (!std::isfinite(loss.value)) throw std::runtime_error("train: loss diverged");
        const ParamGrads grads = backward_wrt_params(tape, params, loss.grad_logits);
        adam.update(params, grads, cfg);

        const double vacc = accuracy(predict_classes(pred.logits), g.labels, g.splits.valid);
        if (record) {
            record->train_loss.push_back(loss.value);
            record->valid_acc.push_back(vacc);
        }
        if (vacc > best_acc) {
            best_acc = vacc;
            best = params;
            best_epoch = epoch;
        } else if (epoch - best_epoch >= cfg.patience) {
            break;
        }
    }
    if (record) {
        record->best_epoch = best_epoch;
        record->best_valid_acc = best_acc;
    }
    return best_epoch < 0 ? params : best;
}

ModelParams train_pprgo(ModelParams params, const Graph& g, const PprMatrix& ppr,
                        const TrainConfig& cfg, TrainRecord* record) {
    if (g.splits.train.empty() || g.splits.valid.empty())
        throw std::invalid_argument("train: splits missing");
    AdamState adam(params);
    ModelParams best = params;
    Index best_epoch = -1;
    double best_acc = -1.0;

    std::vector<Index> train_labels(g.splits.train.size());
    for (std::size_t i = 0; i < g.splits.train.size(); ++i)
        train_labels[i] = g.labels[static_cast<std::size_t>(g.splits.train[i])];
    std::vector<Index> all_train(g.splits.train.size());
    for (std::size_t i = 0; i < all_train.size(); ++i) all_train[i] = static_cast<Index>(i);
    std::vector<Index> valid_labels(g.splits.valid.size());
    for (std::size_t i = 0; i < g.splits.valid.size(); ++i)
        valid_labels[i] = g.labels[static_cast<std::size_t>(g.splits.valid[i])];
    std::vector<Index> all_valid(g.splits.valid.size());
    for (std::size_t i = 0; i < all_valid.size(); ++i) all_valid[i] = static_cast<Index>(i);

    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Matrix encoded = pprgo_encode(params, g.features);
        Matrix logits(static_cast<Index>(g.splits.train.size()), encoded.cols);
        for (std::size_t i = 0; i < g.splits.train.size(); ++i) {
            const SparseRow* row = ppr.row_for(g.splits.train[i]);
            if (!row) throw std::invalid_argument("train: missing PPR row for train node");
            const std::vector<double> z = pprgo_aggregate(params, *row, encoded);
            std::copy(z.begin(), z.end(), logits.row(static_cast<Index>(i)));
        }
        const LossEval loss = eval_loss(LossKind::CE, logits, train_labels, all_train);
        if (!std::isfinite(loss.value)) throw std::runtime_error("train: loss diverged");
        const Matrix grad_enc =
            pprgo_backward_to_encoded(params, ppr, g.splits.train, encoded, loss.grad_logits);
        const ParamGrads grads = pprgo_encoder_backward(params, g.features, grad_enc);
        adam.update(params, grads, cfg);

        const Prediction vpred = pprgo_forward(params, ppr, g.features, g.splits.valid);
        const double vacc = accuracy(predict_classes(vpred.logits), valid_labels, all_valid);
        if (record) {
            record->train_loss.push_back(loss.value);
            record->valid_acc.push_back(vacc);
        }
        if (vacc > best_acc) {
            best_acc = vacc;
            best = params;
            best_epoch = epoch;
        } else if (epoch - best_epoch >= cfg.patience) {
            break;
        }
    }
    if (record) {
        record->best_epoch = best_epoch;
        record->best_valid_acc = best_acc;
    }
    return best_epoch < 0 ? params : best;
}

}  // namespace gnnrob
