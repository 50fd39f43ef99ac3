#include "gnnrob/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gnnrob/candidate_space.hpp"
#include "gnnrob/graph_io.hpp"
#include "gnnrob/projection.hpp"

namespace gnnrob {

namespace {

constexpr double kFloor = 1e-12;
constexpr double kNonzero = 1e-9;

double margin_from_logits(const std::vector<double>& z, Index label) {
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < z.size(); ++c)
        if (static_cast<Index>(c) != label) best_other = std::max(best_other, z[c]);
    return z[static_cast<std::size_t>(label)] - best_other;
}

/// d(-margin)/d logits: e_{best other} - e_{label}.
std::vector<double> margin_loss_grad(const std::vector<double>& z, Index label) {
    std::size_t best = label == 0 ? 1 : 0;
    for (std::size_t c = 0; c < z.size(); ++c)
        if (static_cast<Index>(c) != label && z[c] > z[best]) best = c;
    std::vector<double> g(z.size(), 0.0);
    g[best] += 1.0;
    g[static_cast<std::size_t>(label)] -= 1.0;
    return g;
}

SparseRow target_row_with_fallback(const CsrMatrix& adjacency, Index target) {
    SparseRow a_i;
    for (Index k = adjacency.row_begin(target); k < adjacency.row_end(target); ++k)
        a_i.emplace_back(adjacency.col_indices[static_cast<std::size_t>(k)],
                         adjacency.values[static_cast<std::size_t>(k)]);
    if (a_i.empty()) a_i.emplace_back(target, 1.0);  // dangling self-loop
    return a_i;
}

DegreeVector degrees_with_dangling(const CsrMatrix& adjacency) {
    DegreeVector degs = weighted_degrees(adjacency);
    for (double& d : degs.degrees)
        if (d <= 0.0) d = 1.0;
    return degs;
}

/// Margin of the target after toggling the given row entries, with the PPR
/// row recomputed from scratch on the perturbed graph.
double exact_margin_after_flips(const Graph& g, const ModelParams& params,
                                const TeleportConfig& tcfg, const Matrix& encoded, Index target,
                                const std::vector<Index>& cols) {
    std::vector<std::pair<Index, Index>> pairs;
    pairs.reserve(cols.size());
    for (Index c : cols) pairs.emplace_back(target, c);
    const CsrMatrix perturbed = apply_flips(g.adjacency, pairs, /*directed=*/true);
    const PprMatrix ppr = ppr_power_iteration(perturbed, tcfg, {target});
    const std::vector<double> z = pprgo_aggregate(params, *ppr.row_for(target), encoded);
    return margin_from_logits(z, g.labels[static_cast<std::size_t>(target)]);
}

/// The rank-one update is exact algebra on the *sparsified* PPR rows, so the
/// resulting row can dip a hair below zero where the stored rows were
/// truncated. Negative mass is nonphysical (and the weighted Soft Median
/// rejects it), so it is clamped; the matching gradient entries are zeroed.
SparseRow clamp_nonnegative(const SparseRow& row) {
    SparseRow out = row;
    for (auto& entry : out) entry.second = std::max(entry.second, 0.0);
    return out;
}

void zero_clamped_gradient(const SparseRow& row, std::vector<double>& grad) {
    for (std::size_t e = 0; e < row.size(); ++e)
        if (row[e].second < 0.0) grad[e] = 0.0;
}

}  // namespace

LocalAttackResult prbcd_local_pprgo(const Graph& g, const ModelParams& params,
                                    const PprMatrix& ppr, const TeleportConfig& tcfg,
                                    Index target, Index delta, const LocalAttackConfig& cfg) {
    if (target < 0 || target >= g.num_nodes()) throw std::invalid_argument("local attack: bad target");
    if (delta < 0) throw std::invalid_argument("local attack: budget must be nonnegative");
    if (delta >= cfg.block_size) throw std::invalid_argument("local attack: budget must be below the block size");
    if (!ppr.row_for(target)) throw std::invalid_argument("local attack: target lacks a PPR row");

    const Index label = g.labels[static_cast<std::size_t>(target)];
    const Matrix encoded = pprgo_encode(params, g.features);
    const SparseRow a_i = target_row_with_fallback(g.adjacency, target);
    const DegreeVector degs = degrees_with_dangling(g.adjacency);

    LocalAttackResult result;
    result.margin_clean =
        margin_from_logits(pprgo_aggregate(params, *ppr.row_for(target), encoded), label);
    if (delta == 0) {  // empty budget: nothing to optimize
        result.margin_approx = result.margin_clean;
        result.margin_exact =
            exact_margin_after_flips(g, params, tcfg, encoded, target, {});
        result.flipped = result.margin_exact < 0.0;
        return result;
    }

    SpaceCodec codec;
    codec.space = CandidateSpace::IncomingRow;
    codec.n = g.num_nodes();
    codec.target = target;
    const Index space = codec.size();
    const Index nominal_b = std::min(cfg.block_size, space);
    const Index e_res = std::min(cfg.resample_epochs, cfg.epochs);

    double row_sum = 0.0;
    for (const auto& entry : a_i) row_sum += entry.second;

    std::mt19937_64 rng(cfg.seed);
    std::vector<Index> indices = sample_block(codec, nominal_b, rng);
    std::vector<double> weights(indices.size(), kFloor);
    double lr = cfg.base_lr * static_cast<double>(delta) *
                std::sqrt(static_cast<double>(nominal_b) / static_cast<double>(space));

    auto candidates_of = [&](const std::vector<Index>& idx, const std::vector<double>& w) {
        std::vector<UpdateCandidate> cands(idx.size());
        for (std::size_t e = 0; e < idx.size(); ++e) {
            const Index col = codec.decode(idx[e]).first;
            cands[e].col = col;
            cands[e].weight = w[e];
            cands[e].sign = g.adjacency.at(target, col) > 0.0 ? -1.0 : 1.0;
        }
        return cands;
    };

    // the relaxed row must keep positive mass; with a budget equal to the
    // degree the ascent can otherwise drive the removal weights to the full
    // row sum and make the rank-one update singular
    auto cap_removal_mass = [&](const std::vector<Index>& idx, std::vector<double>& w) {
        double removal = 0.0, insertion = 0.0;
        for (std::size_t e = 0; e < idx.size(); ++e) {
            const Index col = codec.decode(idx[e]).first;
            (g.adjacency.at(target, col) > 0.0 ? removal : insertion) += w[e];
        }
        const double cap = 0.99 * row_sum + insertion;
        if (removal <= cap) return;
        const double scale = cap / removal;
        for (std::size_t e = 0; e < idx.size(); ++e)
            if (g.adjacency.at(target, codec.decode(idx[e]).first) > 0.0)
                w[e] = std::max(w[e] * scale, kFloor);
    };

    struct Best {
        double loss = -std::numeric_limits<double>::infinity();
        std::vector<Index> indices;
        std::vector<double> weights;
        bool set = false;
    } best_sample, best_tune;
    Index plateau = 0;

    for (Index t = 1; t <= cfg.epochs; ++t) {
        if (t == e_res + 1 && best_sample.set) {
            indices = best_sample.indices;
            weights = best_sample.weights;
        }
        const std::vector<UpdateCandidate> cands = candidates_of(indices, weights);
        const RowUpdateResult update = ppr_row_rank_one_update(ppr, target, a_i, degs, cands, tcfg.alpha);
        const SparseRow row = clamp_nonnegative(update.row);
        const std::vector<double> z = pprgo_aggregate(params, row, encoded);
        const double loss = -margin_from_logits(z, label);
        if (!std::isfinite(loss)) throw std::runtime_error("local attack: non-finite loss");

        Best& best = t <= e_res ? best_sample : best_tune;
        if (loss > best.loss) {
            best.loss = loss;
            best.indices = indices;
            best.weights = weights;
            best.set = true;
            plateau = 0;
        } else if (t > e_res && ++plateau >= cfg.plateau_patience) {
            lr *= cfg.lr_decay;
            plateau = 0;
        }

        const std::vector<double> gbar = margin_loss_grad(z, label);
        std::vector<double> grad_pi = pprgo_row_gradient(params, row, encoded, gbar);
        zero_clamped_gradient(update.row, grad_pi);
        const std::vector<double> grad_w = update.vjp(grad_pi);
        for (std::size_t e = 0; e < weights.size(); ++e) weights[e] += lr * grad_w[e];
        weights = project_onto_budget(std::move(weights), static_cast<double>(delta));
        for (double& w : weights) w = std::max(w, kFloor);
        cap_removal_mass(indices, weights);

        if (t <= e_res) {
            const Index b_now = static_cast<Index>(indices.size());
            Index nonzero = 0;
            for (double w : weights)
                if (w > kNonzero) ++nonzero;
            std::vector<bool> keep(indices.size(), false);
            if (nonzero > b_now / 2) {
                std::vector<Index> order(indices.size());
                std::iota(order.begin(), order.end(), Index{0});
                std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
                    return weights[static_cast<std::size_t>(a)] > weights[static_cast<std::size_t>(b)];
                });
                for (Index k = 0; k < b_now / 2; ++k) keep[static_cast<std::size_t>(order[k])] = true;
            } else {
                for (std::size_t e = 0; e < weights.size(); ++e)
                    if (weights[e] > kNonzero) keep[e] = true;
            }
            std::vector<Index> kept_idx;
            std::vector<double> kept_w;
            for (std::size_t e = 0; e < indices.size(); ++e)
                if (keep[e]) {
                    kept_idx.push_back(indices[e]);
                    kept_w.push_back(weights[e]);
                }
            const Index refill = nominal_b - static_cast<Index>(kept_idx.size());
            if (refill > 0) {
                for (Index e : sample_block(codec, refill, rng, kept_idx)) {
                    kept_idx.push_back(e);
                    kept_w.push_back(kFloor);
                }
                std::vector<Index> order(kept_idx.size());
                std::iota(order.begin(), order.end(), Index{0});
                std::sort(order.begin(), order.end(), [&](Index a, Index b) {
                    return kept_idx[static_cast<std::size_t>(a)] < kept_idx[static_cast<std::size_t>(b)];
                });
                std::vector<Index> si;
                std::vector<double> sw;
                for (Index e : order) {
                    si.push_back(kept_idx[static_cast<std::size_t>(e)]);
                    sw.push_back(kept_w[static_cast<std::size_t>(e)]);
                }
                kept_idx = std::move(si);
                kept_w = std::move(sw);
            }
            indices = std::move(kept_idx);
            weights = std::move(kept_w);
        }
        result.state_bytes = std::max(result.state_bytes, indices.size() * 24);
    }

    const Best& final_best = best_tune.set ? best_tune : best_sample;
    indices = final_best.indices;
    weights = final_best.weights;

    auto perturbed_row_sum = [&](const std::vector<UpdateCandidate>& cands) {
        double sum = row_sum;
        for (const UpdateCandidate& c : cands) sum += c.sign * c.weight;
        return sum;
    };
    auto evaluate_flips = [&](const std::vector<Index>& positions) {
        std::vector<double> w(indices.size(), 0.0);
        for (Index pos : positions) w[static_cast<std::size_t>(pos)] = 1.0;
        const std::vector<UpdateCandidate> cands = candidates_of(indices, w);
        if (perturbed_row_sum(cands) <= kNonzero)  // every incoming edge removed
            return -std::numeric_limits<double>::infinity();
        const RowUpdateResult upd = ppr_row_rank_one_update(ppr, target, a_i, degs, cands,
                                                            tcfg.alpha);
        return -margin_from_logits(pprgo_aggregate(params, clamp_nonnegative(upd.row), encoded),
                                   label);
    };
    const std::vector<Index> chosen =
        sample_final(weights, delta, evaluate_flips, cfg.sample_tries, cfg.seed ^ 0x9e3779b9ull);
    for (Index pos : chosen)
        result.flipped_cols.push_back(codec.decode(indices[static_cast<std::size_t>(pos)]).first);
    std::sort(result.flipped_cols.begin(), result.flipped_cols.end());

    bool approx_feasible = true;
    {
        std::vector<double> w(indices.size(), 0.0);
        for (Index pos : chosen) w[static_cast<std::size_t>(pos)] = 1.0;
        const std::vector<UpdateCandidate> cands = candidates_of(indices, w);
        approx_feasible = perturbed_row_sum(cands) > kNonzero;
        if (approx_feasible) {
            const RowUpdateResult upd = ppr_row_rank_one_update(ppr, target, a_i, degs, cands,
                                                                tcfg.alpha);
            result.margin_approx = margin_from_logits(
                pprgo_aggregate(params, clamp_nonnegative(upd.row), encoded), label);
        }
    }
    result.margin_exact =
        exact_margin_after_flips(g, params, tcfg, encoded, target, result.flipped_cols);
    // removing every incoming edge leaves nothing for the rank-one update to
    // work with; the recomputation (with its dangling fallback) stands in
    if (!approx_feasible) result.margin_approx = result.margin_exact;
    result.flipped = result.margin_exact < 0.0;
    return result;
}

LocalAttackResult dice_local(const Graph& g, const ModelParams& params,
                             const TeleportConfig& tcfg, Index target, Index delta,
                             std::uint64_t seed) {
    if (target < 0 || target >= g.num_nodes()) throw std::invalid_argument("dice_local: bad target");
    if (delta < 1) throw std::invalid_argument("dice_local: budget must be at least 1");

    const Index n = g.num_nodes();
    const Index label = g.labels[static_cast<std::size_t>(target)];
    const Matrix encoded = pprgo_encode(params, g.features);
    const PprMatrix clean_ppr = ppr_power_iteration(g.adjacency, tcfg, {target});

    LocalAttackResult result;
    result.margin_clean =
        margin_from_logits(pprgo_aggregate(params, *clean_ppr.row_for(target), encoded), label);

    std::mt19937_64 rng(seed);
    const Index n_add = static_cast<Index>(std::llround(0.6 * static_cast<double>(delta)));
    Index n_del = delta - n_add;

    std::vector<Index> same_label_neighbors;
    Index row_size = 0;
    for (Index k = g.adjacency.row_begin(target); k < g.adjacency.row_end(target); ++k) {
        const Index j = g.adjacency.col_indices[static_cast<std::size_t>(k)];
        ++row_size;
        if (g.labels[static_cast<std::size_t>(j)] == label) same_label_neighbors.push_back(j);
    }

    std::vector<Index> cols;
    // deletions: same-label neighbors, keeping the row nonempty
    std::shuffle(same_label_neighbors.begin(), same_label_neighbors.end(), rng);
    for (Index j : same_label_neighbors) {
        if (n_del == 0 || row_size <= 1) break;
        cols.push_back(j);
        --row_size;
        --n_del;
    }
    // additions fill the rest of the budget (unplaceable deletions included)
    std::uniform_int_distribution<Index> node(0, n - 1);
    for (Index attempt = 0; static_cast<Index>(cols.size()) < delta; ++attempt) {
        if (attempt > 1000 * delta + 1000)
            throw std::runtime_error("dice_local: cannot place the addition budget");
        const Index j = node(rng);
        if (j == target) continue;
        if (g.labels[static_cast<std::size_t>(j)] == label) continue;
        if (g.adjacency.at(target, j) > 0.0) continue;
        if (std::find(cols.begin(), cols.end(), j) != cols.end()) continue;
        cols.push_back(j);
    }

    result.flipped_cols = cols;
    std::sort(result.flipped_cols.begin(), result.flipped_cols.end());

    // rank-one approximation needs rows for the touched columns too
    {
        std::vector<Index> sources;
        sources.push_back(target);
        const SparseRow a_i = target_row_with_fallback(g.adjacency, target);
        for (auto [j, w] : a_i)
            if (j != target) sources.push_back(j);
        for (Index j : cols) sources.push_back(j);
        std::sort(sources.begin(), sources.end());
        sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
        const PprMatrix ppr = ppr_power_iteration(g.adjacency, tcfg, sources);
        const DegreeVector degs = degrees_with_dangling(g.adjacency);
        std::vector<UpdateCandidate> cands(cols.size());
        for (std::size_t e = 0; e < cols.size(); ++e) {
            cands[e].col = cols[e];
            cands[e].weight = 1.0;
            cands[e].sign = g.adjacency.at(target, cols[e]) > 0.0 ? -1.0 : 1.0;
        }
        const RowUpdateResult upd = ppr_row_rank_one_update(ppr, target, a_i, degs, cands, tcfg.alpha);
        result.margin_approx = margin_from_logits(
            pprgo_aggregate(params, clamp_nonnegative(upd.row), encoded), label);
    }
    result.margin_exact =
        exact_margin_after_flips(g, params, tcfg, encoded, target, result.flipped_cols);
    result.flipped = result.margin_exact < 0.0;
    result.state_bytes = result.flipped_cols.size() * 8;
    return result;
}

}  // namespace gnnrob
