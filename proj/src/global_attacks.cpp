#include "gnnrob/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "gnnrob/candidate_space.hpp"
#include "gnnrob/graph_io.hpp"
#include "gnnrob/projection.hpp"
#include "gnnrob/train.hpp"

namespace gnnrob {

namespace {

constexpr double kFloor = 1e-12;      // zero-weight representation
constexpr double kNonzero = 1e-9;     // treated as carrying mass

SpaceCodec global_codec(const Graph& g) {
    SpaceCodec codec;
    codec.space = g.directed ? CandidateSpace::DirectedOffDiagonal : CandidateSpace::UpperTriangular;
    codec.n = g.num_nodes();
    return codec;
}

void require_attackable(const ModelParams& params) {
    if (params.kind != ModelKind::GCN || params.aggregation != Aggregation::WeightedSum)
        throw std::invalid_argument(
            "gradient attacks operate on a weighted-sum GCN surrogate; attack other models by "
            "transferring its perturbation");
}

/// A xor p as a weighted adjacency matrix over the candidate pairs.
CsrMatrix relaxed_adjacency(const CsrMatrix& clean, bool directed,
                            const std::vector<std::pair<Index, Index>>& pairs,
                            const std::vector<double>& weights) {
    std::vector<Index> ris(clean.col_indices.size()), cis = clean.col_indices;
    std::vector<double> vals = clean.values;
    for (Index r = 0; r < clean.n_rows; ++r)
        for (Index k = clean.row_begin(r); k < clean.row_end(r); ++k)
            ris[static_cast<std::size_t>(k)] = r;
    for (std::size_t e = 0; e < pairs.size(); ++e) {
        const auto [i, j] = pairs[e];
        const double sign = clean.at(i, j) > 0.0 ? -1.0 : 1.0;
        ris.push_back(i);
        cis.push_back(j);
        vals.push_back(sign * weights[e]);
        if (!directed) {
            ris.push_back(j);
            cis.push_back(i);
            vals.push_back(sign * weights[e]);
        }
    }
    return CsrMatrix::from_triplets(clean.n_rows, clean.n_cols, std::move(ris), std::move(cis),
                                    std::move(vals));
}

double discrete_attack_loss(const Graph& g, const ModelParams& params, LossKind loss,
                            const CsrMatrix& adjacency) {
    const Prediction pred = forward(params, gcn_normalize(adjacency), g.features);
    return eval_loss(loss, pred.logits, g.labels, g.splits.test).value;
}

double discrete_accuracy(const Graph& g, const ModelParams& params, const CsrMatrix& adjacency) {
    const Prediction pred = forward(params, gcn_normalize(adjacency), g.features);
    return accuracy(predict_classes(pred.logits), g.labels, g.splits.test);
}

struct BlockState {
    std::vector<Index> indices;  // sorted candidate-space indices
    std::vector<double> weights;
};

struct StageBest {
    double loss = -std::numeric_limits<double>::infinity();
    Index epoch = -1;
    BlockState state;
};

AttackResult prbcd_core(const Graph& g, const ModelParams& params, LossKind loss,
                        AttackBudget budget, const GlobalAttackConfig& cfg, bool full_block) {
    require_attackable(params);
    if (g.splits.test.empty()) throw std::invalid_argument("attack: test split missing");
    const SpaceCodec codec = global_codec(g);
    const Index space = codec.size();
    const Index delta = budget.delta;
    if (delta < 1) throw std::invalid_argument("attack: budget must be at least 1");
    const Index nominal_b = full_block ? space : std::min(cfg.block_size, space);
    if (nominal_b < delta) throw std::invalid_argument("attack: block size below budget");
    const Index e_res = full_block ? 0 : std::min(cfg.resample_epochs, cfg.epochs);

    std::mt19937_64 rng(cfg.seed);
    BlockState block;
    block.indices = sample_block(codec, nominal_b, rng);
    block.weights.assign(block.indices.size(), kFloor);

    const double n2 = static_cast<double>(g.num_nodes()) * static_cast<double>(g.num_nodes());
    double lr = cfg.base_lr * static_cast<double>(delta) *
                std::sqrt(static_cast<double>(nominal_b) / n2);

    AttackResult result;
    result.seed = cfg.seed;
    StageBest best_sample, best_tune;
    Index plateau = 0;

    auto evaluate_state = [&](const BlockState& s, ForwardTape* tape, LossEval* le,
                              CsrMatrix* pert_out, double* acc) {
        std::vector<std::pair<Index, Index>> pairs(s.indices.size());
        for (std::size_t e = 0; e < s.indices.size(); ++e) pairs[e] = codec.decode(s.indices[e]);
        CsrMatrix pert = relaxed_adjacency(g.adjacency, g.directed, pairs, s.weights);
        const Prediction pred = forward(params, gcn_normalize(pert), g.features, tape);
        *le = eval_loss(loss, pred.logits, g.labels, g.splits.test);
        if (!std::isfinite(le->value)) throw std::runtime_error("attack: non-finite loss");
        if (acc) *acc = accuracy(predict_classes(pred.logits), g.labels, g.splits.test);
        if (pert_out) *pert_out = std::move(pert);
        return pairs;
    };

    for (Index t = 1; t <= cfg.epochs; ++t) {
        if (t == e_res + 1 && best_sample.epoch >= 0) block = best_sample.state;
        ForwardTape tape;
        LossEval le;
        CsrMatrix pert;
        double acc = 0.0;
        const std::vector<std::pair<Index, Index>> pairs =
            evaluate_state(block, &tape, &le, &pert, &acc);
        result.trace.emplace_back(le.value, acc);

        StageBest& best = t <= e_res ? best_sample : best_tune;
        if (le.value > best.loss) {
            best.loss = le.value;
            best.epoch = t - 1;
            best.state = block;
            plateau = 0;
        } else if (t > e_res && ++plateau >= cfg.plateau_patience) {
            lr *= cfg.lr_decay;
            plateau = 0;
        }

        const std::vector<double> grads =
            backward_wrt_edges(tape, params, le.grad_logits, g.adjacency, pert, pairs, g.directed,
                               cfg.freeze_normalization);
        for (std::size_t e = 0; e < block.weights.size(); ++e) block.weights[e] += lr * grads[e];
        block.weights = project_onto_budget(std::move(block.weights), static_cast<double>(delta));
        for (double& w : block.weights) w = std::max(w, kFloor);

        if (t <= e_res) {
            // survival of the fittest: keep the promising half (or all nonzero
            // entries when sparse enough), resample the rest
            const Index b_now = static_cast<Index>(block.indices.size());
            std::vector<Index> order(block.indices.size());
            std::iota(order.begin(), order.end(), Index{0});
            Index nonzero = 0;
            for (double w : block.weights)
                if (w > kNonzero) ++nonzero;
            std::vector<bool> keep(block.indices.size(), false);
            if (nonzero > b_now / 2) {
                std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
                    return block.weights[static_cast<std::size_t>(a)] >
                           block.weights[static_cast<std::size_t>(b)];
                });
                for (Index k = 0; k < b_now / 2; ++k) keep[static_cast<std::size_t>(order[k])] = true;
            } else {
                for (std::size_t e = 0; e < block.weights.size(); ++e)
                    if (block.weights[e] > kNonzero) keep[e] = true;
            }
            BlockState next;
            for (std::size_t e = 0; e < block.indices.size(); ++e)
                if (keep[e]) {
                    next.indices.push_back(block.indices[e]);
                    next.weights.push_back(block.weights[e]);
                }
            const Index refill = nominal_b - static_cast<Index>(next.indices.size());
            if (refill > 0) {
                const std::vector<Index> fresh = sample_block(codec, refill, rng, next.indices);
                for (Index e : fresh) {
                    next.indices.push_back(e);
                    next.weights.push_back(kFloor);
                }
                std::vector<Index> order2(next.indices.size());
                std::iota(order2.begin(), order2.end(), Index{0});
                std::sort(order2.begin(), order2.end(), [&](Index a, Index b) {
                    return next.indices[static_cast<std::size_t>(a)] <
                           next.indices[static_cast<std::size_t>(b)];
                });
                BlockState sorted;
                for (Index e : order2) {
                    sorted.indices.push_back(next.indices[static_cast<std::size_t>(e)]);
                    sorted.weights.push_back(next.weights[static_cast<std::size_t>(e)]);
                }
                next = std::move(sorted);
            }
            block = std::move(next);
        }
        result.state_bytes = std::max(result.state_bytes,
                                      block.indices.size() * 24 + result.trace.size() * 16);
    }
    {
        // final state never entered the loop evaluation
        ForwardTape tape;
        LossEval le;
        evaluate_state(block, &tape, &le, nullptr, nullptr);
        StageBest& best = e_res >= cfg.epochs ? best_sample : best_tune;
        if (le.value > best.loss) {
            best.loss = le.value;
            best.epoch = cfg.epochs;
            best.state = block;
        }
    }

    const StageBest& final_best = best_tune.epoch >= 0 ? best_tune : best_sample;
    block = final_best.state;
    result.best_epoch = final_best.epoch;

    auto evaluate_flips = [&](const std::vector<Index>& positions) {
        std::vector<std::pair<Index, Index>> flips;
        for (Index pos : positions)
            flips.push_back(codec.decode(block.indices[static_cast<std::size_t>(pos)]));
        return discrete_attack_loss(g, params, loss,
                                    apply_flips(g.adjacency, flips, g.directed));
    };
    const std::vector<Index> chosen =
        sample_final(block.weights, delta, evaluate_flips, cfg.sample_tries, cfg.seed ^ 0x9e3779b9ull);
    for (Index pos : chosen)
        result.flips.push_back(codec.decode(block.indices[static_cast<std::size_t>(pos)]));
    result.perturbed_adjacency = apply_flips(g.adjacency, result.flips, g.directed);
    result.clean_acc = discrete_accuracy(g, params, g.adjacency);
    result.adv_acc = discrete_accuracy(g, params, result.perturbed_adjacency);
    return result;
}

AttackResult grbcd_core(const Graph& g, const ModelParams& params, LossKind loss,
                        AttackBudget budget, const GlobalAttackConfig& cfg, bool full_block) {
    require_attackable(params);
    if (g.splits.test.empty()) throw std::invalid_argument("attack: test split missing");
    const SpaceCodec codec = global_codec(g);
    const Index space = codec.size();
    const Index delta = budget.delta;
    if (delta < 1) throw std::invalid_argument("attack: budget must be at least 1");
    const Index epochs = std::max<Index>(cfg.epochs, 1);
    const Index nominal_b = full_block ? space : std::min(cfg.block_size, space);
    if (nominal_b < (delta + epochs - 1) / epochs)
        throw std::invalid_argument("attack: block size below per-epoch budget");

    std::mt19937_64 rng(cfg.seed);
    AttackResult result;
    result.seed = cfg.seed;
    CsrMatrix current = g.adjacency;
    std::vector<Index> flipped_sorted;
    double best_loss = -std::numeric_limits<double>::infinity();

    for (Index t = 1; t <= epochs; ++t) {
        const Index delta_t = delta * t / epochs - delta * (t - 1) / epochs;
        const std::vector<Index> block = sample_block(codec, nominal_b, rng, flipped_sorted);
        std::vector<std::pair<Index, Index>> pairs(block.size());
        for (std::size_t e = 0; e < block.size(); ++e) pairs[e] = codec.decode(block[e]);

        ForwardTape tape;
        const Prediction pred = forward(params, gcn_normalize(current), g.features, &tape);
        const LossEval le = eval_loss(loss, pred.logits, g.labels, g.splits.test);
        if (!std::isfinite(le.value)) throw std::runtime_error("attack: non-finite loss");
        result.trace.emplace_back(le.value,
                                  accuracy(predict_classes(pred.logits), g.labels, g.splits.test));
        if (le.value > best_loss) {
            best_loss = le.value;
            result.best_epoch = t - 1;
        }
        result.state_bytes = std::max(result.state_bytes,
                                      block.size() * 16 + result.trace.size() * 16);
        if (delta_t == 0) continue;

        const std::vector<double> grads = backward_wrt_edges(
            tape, params, le.grad_logits, current, current, pairs, g.directed,
            cfg.freeze_normalization);
        std::vector<Index> order(block.size());
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return grads[static_cast<std::size_t>(a)] > grads[static_cast<std::size_t>(b)];
        });
        std::vector<std::pair<Index, Index>> chosen;
        for (Index k = 0; k < static_cast<Index>(order.size()) && static_cast<Index>(chosen.size()) < delta_t; ++k)
            chosen.push_back(pairs[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
        current = apply_flips(current, chosen, g.directed);
        for (std::size_t k = 0; k < chosen.size(); ++k) {
            result.flips.push_back(chosen[k]);
            flipped_sorted.push_back(codec.encode(chosen[k].first, chosen[k].second));
        }
        std::sort(flipped_sorted.begin(), flipped_sorted.end());
    }

    result.perturbed_adjacency = std::move(current);
    result.clean_acc = discrete_accuracy(g, params, g.adjacency);
    result.adv_acc = discrete_accuracy(g, params, result.perturbed_adjacency);
    return result;
}

}  // namespace

AttackBudget budget_from_epsilon(const Graph& g, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("attack: epsilon must be in (0, 1]");
    AttackBudget b;
    b.epsilon = epsilon;
    b.delta = std::max<Index>(1, static_cast<Index>(epsilon * static_cast<double>(g.num_edges())));
    return b;
}

AttackResult prbcd_global(const Graph& g, const ModelParams& params, LossKind loss,
                          AttackBudget budget, const GlobalAttackConfig& cfg) {
    return prbcd_core(g, params, loss, budget, cfg, false);
}

AttackResult pgd_dense(const Graph& g, const ModelParams& params, LossKind loss,
                       AttackBudget budget, const GlobalAttackConfig& cfg) {
    if (g.num_nodes() > cfg.dense_cap)
        throw std::runtime_error("pgd_dense: graph exceeds the dense candidate-space cap");
    return prbcd_core(g, params, loss, budget, cfg, true);
}

AttackResult grbcd_global(const Graph& g, const ModelParams& params, LossKind loss,
                          AttackBudget budget, const GlobalAttackConfig& cfg) {
    return grbcd_core(g, params, loss, budget, cfg, false);
}

AttackResult fgsm_dense(const Graph& g, const ModelParams& params, LossKind loss,
                        AttackBudget budget, const GlobalAttackConfig& cfg) {
    if (g.num_nodes() > cfg.dense_cap)
        throw std::runtime_error("fgsm_dense: graph exceeds the dense candidate-space cap");
    GlobalAttackConfig one_per_step = cfg;
    one_per_step.epochs = budget.delta;
    return grbcd_core(g, params, loss, budget, one_per_step, true);
}

AttackResult dice(const Graph& g, AttackBudget budget, std::uint64_t seed) {
    if (g.directed) throw std::invalid_argument("dice: undirected graphs only");
    const Index n = g.num_nodes();
    const Index delta = budget.delta;
    const Index n_add = static_cast<Index>(std::llround(0.6 * static_cast<double>(delta)));
    const Index n_del = delta - n_add;

    std::mt19937_64 rng(seed);
    std::vector<double> deg = g.adjacency.row_sums();
    std::vector<std::pair<Index, Index>> same_label_edges;
    for (Index i = 0; i < n; ++i)
        for (Index k = g.adjacency.row_begin(i); k < g.adjacency.row_end(i); ++k) {
            const Index j = g.adjacency.col_indices[static_cast<std::size_t>(k)];
            if (j > i && g.labels[static_cast<std::size_t>(i)] == g.labels[static_cast<std::size_t>(j)])
                same_label_edges.emplace_back(i, j);
        }

    AttackResult result;
    result.seed = seed;
    // deletions: same-label edges, never dropping a node to degree zero
    std::vector<bool> deleted(same_label_edges.size(), false);
    Index deletions = 0;
    for (Index attempt = 0; deletions < n_del; ++attempt) {
        if (attempt > 1000 * delta + 1000)
            throw std::runtime_error("dice: cannot place the deletion budget");
        if (same_label_edges.empty()) throw std::runtime_error("dice: no same-label edges");
        std::uniform_int_distribution<std::size_t> pick(0, same_label_edges.size() - 1);
        const std::size_t e = pick(rng);
        if (deleted[e]) continue;
        const auto [i, j] = same_label_edges[e];
        if (deg[static_cast<std::size_t>(i)] <= 1.0 || deg[static_cast<std::size_t>(j)] <= 1.0)
            continue;
        deleted[e] = true;
        deg[static_cast<std::size_t>(i)] -= 1.0;
        deg[static_cast<std::size_t>(j)] -= 1.0;
        result.flips.emplace_back(i, j);
        ++deletions;
    }
    // additions: different-label non-edges
    std::uniform_int_distribution<Index> node(0, n - 1);
    std::vector<std::pair<Index, Index>> added;
    for (Index attempt = 0; static_cast<Index>(added.size()) < n_add; ++attempt) {
        if (attempt > 1000 * delta + 1000)
            throw std::runtime_error("dice: cannot place the addition budget");
        Index i = node(rng), j = node(rng);
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        if (g.labels[static_cast<std::size_t>(i)] == g.labels[static_cast<std::size_t>(j)]) continue;
        if (g.adjacency.at(i, j) > 0.0) continue;
        if (std::find(added.begin(), added.end(), std::make_pair(i, j)) != added.end()) continue;
        added.emplace_back(i, j);
    }
    result.flips.insert(result.flips.end(), added.begin(), added.end());
    result.perturbed_adjacency = apply_flips(g.adjacency, result.flips, g.directed);
    result.state_bytes = result.flips.size() * 16;
    return result;
}

void save_attack_result(const AttackResult& result, const std::string& json_path,
                        const std::string& diff_path) {
    nlohmann::json flips = nlohmann::json::array();
    for (auto [i, j] : result.flips) flips.push_back({i, j});
    nlohmann::json trace = nlohmann::json::array();
    for (auto [l, a] : result.trace) trace.push_back({l, a});
    nlohmann::json j{{"flips", flips},
                     {"trace", trace},
                     {"best_epoch", result.best_epoch},
                     {"seed", result.seed},
                     {"clean_acc", result.clean_acc},
                     {"adv_acc", result.adv_acc},
                     {"state_bytes", result.state_bytes}};
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write " + json_path);
    out << j.dump(2) << '\n';
    save_edge_diff(result.flips, diff_path);
}

}  // namespace gnnrob
