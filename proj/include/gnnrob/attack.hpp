#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gnnrob/graph.hpp"
#include "gnnrob/loss.hpp"
#include "gnnrob/model.hpp"
#include "gnnrob/ppr.hpp"

namespace gnnrob {

struct AttackBudget {
    Index delta = 1;
    double epsilon = 0.0;
};

/// delta = floor(epsilon * m), at least 1.
AttackBudget budget_from_epsilon(const Graph& g, double epsilon);

struct GlobalAttackConfig {
    Index block_size = 10000;
    Index epochs = 500;
    Index resample_epochs = 400;  // remaining epochs fine-tune without resampling
    double base_lr = 0.1;
    Index sample_tries = 10;
    double lr_decay = 0.5;       // fine-tuning decay on plateau
    Index plateau_patience = 10;
    bool freeze_normalization = false;
    Index dense_cap = 5000;      // pgd_dense / fgsm_dense node limit
    std::uint64_t seed = 0;
};

struct AttackResult {
    std::vector<std::pair<Index, Index>> flips;
    CsrMatrix perturbed_adjacency;
    std::vector<std::pair<double, double>> trace;  // per epoch (loss, relaxed accuracy)
    Index best_epoch = -1;
    std::uint64_t seed = 0;
    double clean_acc = 0.0;
    double adv_acc = 0.0;
    std::size_t state_bytes = 0;  // peak attack-owned state
};

/// Projected randomized block coordinate descent over relaxed edge weights;
/// evaluated on the test split. Requires block_size >= delta.
AttackResult prbcd_global(const Graph& g, const ModelParams& params, LossKind loss,
                          AttackBudget budget, const GlobalAttackConfig& cfg);

/// Greedy variant: per epoch, flips the top-gradient block entries
/// permanently under an even budget schedule. Requires
/// block_size >= ceil(delta / epochs).
AttackResult grbcd_global(const Graph& g, const ModelParams& params, LossKind loss,
                          AttackBudget budget, const GlobalAttackConfig& cfg);

/// Dense L0 PGD: the PR-BCD update rule with the full candidate space and no
/// resampling. Errors out above cfg.dense_cap nodes.
AttackResult pgd_dense(const Graph& g, const ModelParams& params, LossKind loss,
                       AttackBudget budget, const GlobalAttackConfig& cfg);

/// One best-gradient flip per step for delta steps (greedy full-block).
AttackResult fgsm_dense(const Graph& g, const ModelParams& params, LossKind loss,
                        AttackBudget budget, const GlobalAttackConfig& cfg);

/// Random baseline: deletes same-label edges (40% of budget, never
/// disconnecting a node) and adds different-label edges (60%).
AttackResult dice(const Graph& g, AttackBudget budget, std::uint64_t seed);

void save_attack_result(const AttackResult& result, const std::string& json_path,
                        const std::string& diff_path);

struct LocalAttackConfig {
    Index block_size = 128;
    Index epochs = 200;
    Index resample_epochs = 100;
    double base_lr = 0.5;
    Index sample_tries = 10;
    double lr_decay = 0.5;
    Index plateau_patience = 10;
    std::uint64_t seed = 0;
};

struct LocalAttackResult {
    std::vector<Index> flipped_cols;  // incoming edges of the target toggled
    double margin_clean = 0.0;
    double margin_approx = 0.0;  // from the rank-one PPR row update
    double margin_exact = 0.0;   // PPR recomputed on the perturbed graph
    bool flipped = false;        // margin_exact < 0
    std::size_t state_bytes = 0;
};

/// Local PR-BCD on PPRGo: optimizes relaxed weights over the incoming edges
/// of the target through the differentiable rank-one PPR row update; the
/// final margin is recomputed with power-iteration PPR on the perturbed row.
/// Requires delta < block_size and a PprMatrix holding rows for all nodes.
LocalAttackResult prbcd_local_pprgo(const Graph& g, const ModelParams& params,
                                    const PprMatrix& ppr, const TeleportConfig& tcfg,
                                    Index target, Index delta, const LocalAttackConfig& cfg);

/// DICE restricted to the target's incoming edges, evaluated like the local
/// PR-BCD attack.
LocalAttackResult dice_local(const Graph& g, const ModelParams& params,
                             const TeleportConfig& tcfg, Index target, Index delta,
                             std::uint64_t seed);

}  // namespace gnnrob
