#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnnrob/attack.hpp"
#include "gnnrob/graph.hpp"
#include "gnnrob/model.hpp"
#include "gnnrob/sbm.hpp"
#include "gnnrob/train.hpp"

namespace gnnrob {

/// Invalid or inconsistent experiment configuration (CLI exit code 2);
/// anything else thrown during a run maps to exit code 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetSpec {
    // file-backed dataset
    std::string edge_path, feature_path, label_path, split_path;
    bool directed = false;
    // synthetic alternative
    bool synthetic = false;
    SbmConfig sbm;
    Index split_per_class = 20;
    std::uint64_t split_seed = 1;
};

struct ModelSpec {
    ModelKind kind = ModelKind::GCN;
    Index hidden_dim = 64;
    Index n_layers = 2;
    Aggregation aggregation = Aggregation::WeightedSum;
    double temperature = 0.5;
    Index propagation_steps = 2;
    TeleportConfig teleport;  // GDC diffusion / PPRGo rows
};

struct AttackSpec {
    std::vector<std::string> kinds{"prbcd"};  // prbcd | grbcd | pgd | fgsm | dice
    std::vector<LossKind> losses{LossKind::TanhMargin};
    std::vector<double> epsilons{0.1};
    GlobalAttackConfig global;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    ModelSpec model;
    bool has_victim = false;
    ModelSpec victim;  // transfer target, evaluated on the perturbed graph
    AttackSpec attack;
    TrainConfig train;
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir = "runs";
    Index threads = 1;
    std::string config_echo;  // raw JSON for provenance
};

/// Parses and validates a JSON experiment config. Throws ConfigError.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

Graph load_dataset(const DatasetSpec& spec);

/// Message-passing matrix for layered models: normalized adjacency for
/// GCN/SGC, diffusion matrix for GDC.
CsrMatrix message_passing_matrix(const ModelSpec& spec, const CsrMatrix& adjacency);

std::string checkpoint_path(const std::string& dir, const std::string& tag, std::uint64_t seed);

/// Trains one model per seed and writes checkpoints plus a metrics record
/// under out_dir. `tag` distinguishes surrogate and victim checkpoints.
struct TrainOutcome {
    std::uint64_t seed = 0;
    double clean_test_acc = 0.0;
    double best_valid_acc = 0.0;
    Index best_epoch = -1;
    double runtime_s = 0.0;
    std::string checkpoint;
};
std::vector<TrainOutcome> run_training(const ExperimentConfig& cfg, const Graph& g,
                                       const ModelSpec& spec, const std::string& tag);

struct CellResult {
    std::string attack;
    LossKind loss = LossKind::TanhMargin;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    double adv_acc = 0.0;
    double clean_acc = 0.0;
    double runtime_s = 0.0;
    std::size_t peak_bytes = 0;
};

/// Executes every (attack, loss, epsilon, seed) cell in a worker pool.
/// Surrogate checkpoints must exist (tag "surrogate"); with a victim spec the
/// perturbed graph is re-evaluated on the victim checkpoints (tag "victim").
std::vector<CellResult> run_attack_campaign(const ExperimentConfig& cfg, const Graph& g);

void write_cells_csv(const std::vector<CellResult>& cells, const std::string& path);

/// Per (attack, loss, epsilon) aggregate: mean and three standard errors.
struct AggregateRow {
    std::string attack;
    LossKind loss = LossKind::TanhMargin;
    double epsilon = 0.0;
    Index n_seeds = 0;
    double adv_acc_mean = 0.0, adv_acc_3se = 0.0;
    double clean_acc_mean = 0.0;
    double runtime_s_mean = 0.0;
    double peak_bytes_mean = 0.0;
};
std::vector<AggregateRow> aggregate_cells(const std::vector<CellResult>& cells);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);

std::vector<CellResult> read_cells_csv(const std::string& path);

/// Renders report.md plus summary.csv from the cells.csv / campaign.json
/// files found in the run directory (one level of subdirectories scanned).
/// Throws ConfigError when no completed run is present.
void run_report(const std::string& run_dir);

std::string git_describe();

}  // namespace gnnrob
