#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "gnnrob/checkpoint.hpp"
#include "gnnrob/loss.hpp"
#include "gnnrob/model.hpp"
#include "gnnrob/sbm.hpp"
#include "gnnrob/train.hpp"

using namespace gnnrob;

namespace {

Graph sbm_fixture(std::vector<Index> sizes, double p_in, double p_out, std::uint64_t seed) {
    SbmConfig cfg;
    cfg.block_sizes = sizes;
    cfg.p_in = p_in;
    cfg.p_out = p_out;
    cfg.seed = seed;
    Graph g = sbm_generate(cfg);
    // train + valid need 2 * per_class nodes per class, and some must be left
    // over for the test split
    const Index smallest = *std::min_element(sizes.begin(), sizes.end());
    g.splits = sample_splits(g.labels, std::max<Index>(1, std::min<Index>(10, smallest / 3)),
                             seed + 1);
    return g;
}

CsrMatrix path_graph(Index n) {
    std::vector<Index> ris, cis;
    std::vector<double> vals;
    for (Index i = 0; i + 1 < n; ++i) {
        ris.push_back(i);
        cis.push_back(i + 1);
        vals.push_back(1.0);
        ris.push_back(i + 1);
        cis.push_back(i);
        vals.push_back(1.0);
    }
    return CsrMatrix::from_triplets(n, n, std::move(ris), std::move(cis), std::move(vals));
}

/// A xor p for a single undirected candidate, as used by the attacks.
CsrMatrix perturb_one(const CsrMatrix& clean, Index i, Index j, double w) {
    std::vector<Index> ris, cis;
    std::vector<double> vals;
    for (Index r = 0; r < clean.n_rows; ++r)
        for (Index k = clean.row_begin(r); k < clean.row_end(r); ++k) {
            ris.push_back(r);
            cis.push_back(clean.col_indices[static_cast<std::size_t>(k)]);
            vals.push_back(clean.values[static_cast<std::size_t>(k)]);
        }
    const double sign = clean.at(i, j) > 0.0 ? -1.0 : 1.0;
    ris.push_back(i);
    cis.push_back(j);
    vals.push_back(sign * w);
    ris.push_back(j);
    cis.push_back(i);
    vals.push_back(sign * w);
    return CsrMatrix::from_triplets(clean.n_rows, clean.n_cols, std::move(ris), std::move(cis),
                                    std::move(vals));
}

}  // namespace

TEST_CASE("forward worked examples") {
    SUBCASE("zero weights give zero logits and zero margins") {
        ModelParams p = init_params(ModelKind::GCN, 3, 4, 2, 2, 0);
        for (Matrix& w : p.layer_weights)
            for (double& v : w.data) v = 0.0;
        const Graph g = sbm_fixture({5, 5}, 0.5, 0.1, 2);
        const Prediction pred = forward(p, gcn_normalize(g.adjacency),
                                        Matrix(10, 3), nullptr, &g.labels);
        for (double v : pred.logits.data) CHECK(v == 0.0);
        for (double m : pred.margins) CHECK(m == doctest::Approx(0.0));
    }
    SUBCASE("single node with identity message passing is a linear layer") {
        ModelParams p = init_params(ModelKind::GCN, 2, 4, 3, 1, 7);
        Matrix x(1, 2);
        x(0, 0) = 1.5;
        x(0, 1) = -0.5;
        const CsrMatrix eye = CsrMatrix::from_triplets(1, 1, {0}, {0}, {1.0});
        const Prediction pred = forward(p, eye, x);
        for (Index c = 0; c < 3; ++c) {
            const double ref = 1.5 * p.layer_weights[0](0, c) - 0.5 * p.layer_weights[0](1, c) +
                               p.biases[0][static_cast<std::size_t>(c)];
            CHECK(pred.logits(0, c) == doctest::Approx(ref));
        }
    }
    SUBCASE("sgc equals repeated propagation followed by one linear map") {
        const Graph g = sbm_fixture({8, 8}, 0.4, 0.1, 3);
        ModelParams p = init_params(ModelKind::SGC, g.num_feature_dims(), 4, 2, 1, 5);
        p.propagation_steps = 2;
        const CsrMatrix mp = gcn_normalize(g.adjacency);
        const Prediction pred = forward(p, mp, g.features);

        Matrix h = g.features;
        for (int s = 0; s < 2; ++s) {
            Matrix next(h.rows, h.cols);
            spmm(mp, h.data.data(), h.cols, next.data.data());
            h = std::move(next);
        }
        const Matrix ref = matmul(h, p.layer_weights[0]);
        for (Index v = 0; v < g.num_nodes(); ++v)
            for (Index c = 0; c < 2; ++c)
                CHECK(pred.logits(v, c) ==
                      doctest::Approx(ref(v, c) + p.biases[0][static_cast<std::size_t>(c)])
                          .epsilon(1e-10));
    }
}

TEST_CASE("pprgo forward") {
    const Graph g = sbm_fixture({25, 25}, 0.3, 0.03, 11);
    ModelParams p = init_params(ModelKind::PPRGo, g.num_feature_dims(), 8, 2, 2, 13);
    const Matrix enc = pprgo_encode(p, g.features);

    SUBCASE("one-hot row returns the node's own encoding") {
        SparseRow row{{7, 1.0}};
        const std::vector<double> out = pprgo_aggregate(p, row, enc);
        CHECK(out[0] == doctest::Approx(enc(7, 0)));
        CHECK(out[1] == doctest::Approx(enc(7, 1)));
    }
    SUBCASE("uniform row over identical encodings collapses to one of them") {
        Matrix twin = enc;
        for (Index c = 0; c < enc.cols; ++c) twin(3, c) = twin(2, c);
        SparseRow row{{2, 0.5}, {3, 0.5}};
        const std::vector<double> out = pprgo_aggregate(p, row, twin);
        CHECK(out[0] == doctest::Approx(twin(2, 0)));
        CHECK(out[1] == doctest::Approx(twin(2, 1)));
    }
    SUBCASE("weighted sum matches the dense product") {
        TeleportConfig cfg;
        cfg.k = 16;
        std::vector<Index> sources;
        for (Index i = 0; i < g.num_nodes(); ++i) sources.push_back(i);
        const PprMatrix ppr = ppr_power_iteration(g, cfg, sources);
        const Prediction pred = pprgo_forward(p, ppr, g.features, sources);
        for (Index v = 0; v < g.num_nodes(); ++v) {
            std::vector<double> ref(2, 0.0);
            for (const auto& [j, w] : *ppr.row_for(v))
                for (Index c = 0; c < 2; ++c) ref[static_cast<std::size_t>(c)] += w * enc(j, c);
            CHECK(pred.logits(v, 0) == doctest::Approx(ref[0]).epsilon(1e-12));
            CHECK(pred.logits(v, 1) == doctest::Approx(ref[1]).epsilon(1e-12));
        }
    }
}

TEST_CASE("edge-weight gradients") {
    const Graph g = sbm_fixture({15, 15}, 0.3, 0.05, 17);
    ModelParams p = init_params(ModelKind::GCN, g.num_feature_dims(), 8, 2, 2, 19);

    auto loss_at = [&](Index i, Index j, double w) {
        const CsrMatrix pert = perturb_one(g.adjacency, i, j, w);
        const Prediction pred = forward(p, gcn_normalize(pert), g.features);
        return eval_loss(LossKind::TanhMargin, pred.logits, g.labels, g.splits.test);
    };
    auto analytic = [&](Index i, Index j, double w, double scale_grad = 1.0) {
        const CsrMatrix pert = perturb_one(g.adjacency, i, j, w);
        ForwardTape tape;
        const Prediction pred = forward(p, gcn_normalize(pert), g.features, &tape);
        LossEval le = eval_loss(LossKind::TanhMargin, pred.logits, g.labels, g.splits.test);
        for (double& v : le.grad_logits.data) v *= scale_grad;
        return backward_wrt_edges(tape, p, le.grad_logits, g.adjacency, pert, {{i, j}}, false)[0];
    };

    SUBCASE("finite differences") {
        const double h = 1e-5;
        for (auto [i, j, w] : {std::tuple<Index, Index, double>{0, 20, 0.3},
                               {1, 2, 0.4},
                               {5, 28, 0.05}}) {
            const double fd = (loss_at(i, j, w + h).value - loss_at(i, j, w - h).value) / (2 * h);
            CHECK(analytic(i, j, w) == doctest::Approx(fd).epsilon(1e-4));
        }
    }
    SUBCASE("doubling the loss doubles the gradient") {
        const double g1 = analytic(0, 20, 0.3);
        const double g2 = analytic(0, 20, 0.3, 2.0);
        CHECK(g2 == doctest::Approx(2.0 * g1).epsilon(1e-12));
    }
}

TEST_CASE("candidates outside every receptive field get zero gradient") {
    const Index n = 9;
    const CsrMatrix a = path_graph(n);
    Graph g;
    g.adjacency = a;
    g.features = Matrix(n, 2);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (double& v : g.features.data) v = unif(rng);
    g.labels.assign(static_cast<std::size_t>(n), 0);
    g.labels[1] = 1;

    ModelParams p = init_params(ModelKind::GCN, 2, 4, 2, 2, 29);
    const CsrMatrix pert = perturb_one(a, 6, 8, 0.5);  // 6+ hops from node 0
    ForwardTape tape;
    const Prediction pred = forward(p, gcn_normalize(pert), g.features, &tape);
    const LossEval le = eval_loss(LossKind::CE, pred.logits, g.labels, {0});  // loss on node 0 only
    const std::vector<double> grad =
        backward_wrt_edges(tape, p, le.grad_logits, a, pert, {{6, 8}}, false);
    CHECK(grad[0] == 0.0);
}

TEST_CASE("parameter gradients match finite differences") {
    const Graph g = sbm_fixture({10, 10}, 0.4, 0.05, 31);
    ModelParams p = init_params(ModelKind::GCN, g.num_feature_dims(), 5, 2, 2, 37);
    const CsrMatrix mp = gcn_normalize(g.adjacency);

    auto loss_of = [&](const ModelParams& params) {
        const Prediction pred = forward(params, mp, g.features);
        return eval_loss(LossKind::CE, pred.logits, g.labels, g.splits.train).value;
    };
    ForwardTape tape;
    const Prediction pred = forward(p, mp, g.features, &tape);
    const LossEval le = eval_loss(LossKind::CE, pred.logits, g.labels, g.splits.train);
    const ParamGrads grads = backward_wrt_params(tape, p, le.grad_logits);

    const double h = 1e-6;
    for (std::size_t l = 0; l < p.layer_weights.size(); ++l) {
        for (Index r = 0; r < p.layer_weights[l].rows; r += 2)
            for (Index c = 0; c < p.layer_weights[l].cols; c += 2) {
                ModelParams up = p, dn = p;
                up.layer_weights[l](r, c) += h;
                dn.layer_weights[l](r, c) -= h;
                const double fd = (loss_of(up) - loss_of(dn)) / (2 * h);
                CHECK(grads.weights[l](r, c) == doctest::Approx(fd).epsilon(1e-4));
            }
        ModelParams up = p, dn = p;
        up.biases[l][0] += h;
        dn.biases[l][0] -= h;
        const double fd = (loss_of(up) - loss_of(dn)) / (2 * h);
        CHECK(grads.biases[l][0] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("training") {
    SUBCASE("separable 2-block sbm reaches high test accuracy") {
        Graph g = sbm_fixture({100, 100}, 0.1, 0.01, 41);
        ModelParams init = init_params(ModelKind::GCN, g.num_feature_dims(), 16, 2, 2, 43);
        TrainConfig cfg;
        cfg.epochs = 800;
        cfg.patience = 200;
        cfg.seed = 43;
        TrainRecord rec;
        const ModelParams trained = train(init, g, gcn_normalize(g.adjacency), cfg, &rec);
        const Prediction pred = forward(trained, gcn_normalize(g.adjacency), g.features);
        CHECK(accuracy(predict_classes(pred.logits), g.labels, g.splits.test) >= 0.95);
        CHECK(rec.best_epoch >= 0);
    }
    SUBCASE("zero-epoch budget returns the initialization") {
        const Graph g = sbm_fixture({10, 10}, 0.4, 0.05, 47);
        ModelParams init = init_params(ModelKind::GCN, g.num_feature_dims(), 4, 2, 2, 53);
        TrainConfig cfg;
        cfg.epochs = 0;
        const ModelParams out = train(init, g, gcn_normalize(g.adjacency), cfg);
        for (std::size_t l = 0; l < init.layer_weights.size(); ++l)
            CHECK(out.layer_weights[l].data == init.layer_weights[l].data);
    }
    SUBCASE("training is deterministic under the seed") {
        Graph g = sbm_fixture({20, 20}, 0.3, 0.03, 59);
        TrainConfig cfg;
        cfg.epochs = 50;
        cfg.seed = 61;
        const ModelParams a = train(init_params(ModelKind::GCN, g.num_feature_dims(), 4, 2, 2, 61),
                                    g, gcn_normalize(g.adjacency), cfg);
        const ModelParams b = train(init_params(ModelKind::GCN, g.num_feature_dims(), 4, 2, 2, 61),
                                    g, gcn_normalize(g.adjacency), cfg);
        for (std::size_t l = 0; l < a.layer_weights.size(); ++l)
            CHECK(a.layer_weights[l].data == b.layer_weights[l].data);
    }
}

TEST_CASE("checkpoint round trip preserves the forward pass") {
    const Graph g = sbm_fixture({12, 12}, 0.3, 0.05, 67);
    ModelParams p = init_params(ModelKind::GDC, g.num_feature_dims(), 6, 2, 2, 71,
                                Aggregation::SoftMedian, 0.4);
    const auto path =
        (std::filesystem::temp_directory_path() / "gnnrob_test_ckpt.bin").string();
    save_checkpoint(p, path, 71);
    std::uint64_t seed = 0;
    const ModelParams l = load_checkpoint(path, &seed);
    CHECK(seed == 71);
    CHECK(l.kind == ModelKind::GDC);
    CHECK(l.aggregation == Aggregation::SoftMedian);
    CHECK(l.temperature == doctest::Approx(0.4));
    for (std::size_t i = 0; i < p.layer_weights.size(); ++i) {
        CHECK(l.layer_weights[i].data == p.layer_weights[i].data);
        CHECK(l.biases[i] == p.biases[i]);
    }
}
