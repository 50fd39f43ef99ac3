#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gnnrob/checkpoint.hpp"
#include "gnnrob/graph_io.hpp"
#include "gnnrob/loss.hpp"
#include "gnnrob/ppr.hpp"
#include "gnnrob/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gnnrob;

namespace {

struct CommonFlags {
    std::string config_path;
    std::int64_t seed = -1;
    std::int64_t threads = 0;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags* f, bool config_required = true) {
    auto* opt = cmd->add_option("--config", f->config_path, "experiment config (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", f->seed, "override the seed list with a single seed");
    cmd->add_option("--threads", f->threads, "worker threads");
    cmd->add_option("--out", f->out_dir, "output directory");
}

ExperimentConfig load_with_overrides(const CommonFlags& f) {
    ExperimentConfig cfg = load_experiment_config(f.config_path);
    if (f.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(f.seed)};
    if (f.threads > 0) cfg.threads = f.threads;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    return cfg;
}

int cmd_train(const CommonFlags& f) {
    const ExperimentConfig cfg = load_with_overrides(f);
    const Graph g = load_dataset(cfg.dataset);
    const std::vector<TrainOutcome> out = run_training(cfg, g, cfg.model, "surrogate");
    for (const TrainOutcome& o : out)
        std::cout << "surrogate seed " << o.seed << ": clean test acc " << o.clean_test_acc
                  << " (valid " << o.best_valid_acc << ", epoch " << o.best_epoch << ", "
                  << o.runtime_s << " s)\n";
    if (cfg.has_victim) {
        const std::vector<TrainOutcome> vout = run_training(cfg, g, cfg.victim, "victim");
        for (const TrainOutcome& o : vout)
            std::cout << "victim seed " << o.seed << ": clean test acc " << o.clean_test_acc
                      << " (" << o.runtime_s << " s)\n";
    }
    return 0;
}

int cmd_attack(const CommonFlags& f) {
    const ExperimentConfig cfg = load_with_overrides(f);
    const Graph g = load_dataset(cfg.dataset);
    const std::vector<CellResult> cells = run_attack_campaign(cfg, g);
    for (const AggregateRow& r : aggregate_cells(cells))
        std::cout << r.attack << " " << loss_name(r.loss) << " eps=" << r.epsilon << ": adv acc "
                  << r.adv_acc_mean << " +- " << r.adv_acc_3se << " (clean " << r.clean_acc_mean
                  << ")\n";
    std::cout << "wrote " << cfg.out_dir << "/cells.csv and aggregate.csv\n";
    return 0;
}

int cmd_defend_eval(const CommonFlags& f, const std::string& checkpoint,
                    const std::string& diff_path) {
    const ExperimentConfig cfg = load_with_overrides(f);
    const ModelSpec& spec = cfg.has_victim ? cfg.victim : cfg.model;
    Graph g = load_dataset(cfg.dataset);
    if (!fs::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint);
    const ModelParams params = load_checkpoint(checkpoint);
    if (params.in_dim() != g.num_feature_dims() || params.out_dim() != g.num_classes())
        throw ConfigError("checkpoint does not match dataset dimensions");

    CsrMatrix adjacency = g.adjacency;
    if (!diff_path.empty()) {
        if (!fs::exists(diff_path)) throw ConfigError("diff file not found: " + diff_path);
        adjacency = apply_flips(adjacency, load_edge_diff(diff_path), g.directed);
    }

    Matrix confidences;
    std::vector<Index> labels;
    std::vector<Index> mask;
    if (spec.kind == ModelKind::PPRGo) {
        std::vector<Index> all(static_cast<std::size_t>(g.num_nodes()));
        for (Index i = 0; i < g.num_nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
        const PprMatrix ppr = ppr_power_iteration(adjacency, spec.teleport, all);
        const Prediction pred = pprgo_forward(params, ppr, g.features, g.splits.test);
        confidences = pred.confidences;
        for (std::size_t i = 0; i < g.splits.test.size(); ++i) {
            labels.push_back(g.labels[static_cast<std::size_t>(g.splits.test[i])]);
            mask.push_back(static_cast<Index>(i));
        }
    } else {
        const Prediction pred = forward(params, message_passing_matrix(spec, adjacency), g.features);
        confidences = pred.confidences;
        labels = g.labels;
        mask = g.splits.test;
    }

    std::vector<Index> cls(static_cast<std::size_t>(confidences.rows));
    for (Index i = 0; i < confidences.rows; ++i) {
        Index best = 0;
        for (Index c = 1; c < confidences.cols; ++c)
            if (confidences(i, c) > confidences(i, best)) best = c;
        cls[static_cast<std::size_t>(i)] = best;
    }
    const double acc = accuracy(cls, labels, mask);
    const MarginHistogram hist = margin_distribution(confidences, labels, mask);

    fs::create_directories(cfg.out_dir);
    std::ofstream csv(cfg.out_dir + "/margins.csv");
    csv << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < hist.counts.size(); ++b)
        csv << -1.0 + 2.0 * static_cast<double>(b) / hist.counts.size() << ','
            << -1.0 + 2.0 * static_cast<double>(b + 1) / hist.counts.size() << ','
            << hist.counts[b] << '\n';

    json record{{"phase", "defend-eval"},
                {"git", git_describe()},
                {"checkpoint", checkpoint},
                {"diff", diff_path},
                {"model", model_kind_name(spec.kind)},
                {"aggregation", aggregation_name(spec.aggregation)},
                {"accuracy", acc}};
    std::ofstream out(cfg.out_dir + "/defend_eval.json");
    out << record.dump(2) << '\n';
    std::cout << "accuracy " << acc << (diff_path.empty() ? " (clean)" : " (perturbed)") << "\n";
    return 0;
}

int cmd_ppr(const CommonFlags& f) {
    const ExperimentConfig cfg = load_with_overrides(f);
    const Graph g = load_dataset(cfg.dataset);
    std::vector<Index> sources(static_cast<std::size_t>(g.num_nodes()));
    for (Index i = 0; i < g.num_nodes(); ++i) sources[static_cast<std::size_t>(i)] = i;
    const PprMatrix ppr = ppr_power_iteration(g, cfg.model.teleport, sources);
    fs::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/ppr.bin";
    save_ppr(ppr, cfg.model.teleport, path);
    std::cout << "wrote " << path << " (" << ppr.rows.size() << " rows, alpha "
              << cfg.model.teleport.alpha << ", k " << cfg.model.teleport.k << ")\n";
    return 0;
}

int cmd_loss_check(const CommonFlags& f) {
    const std::string out_dir = f.out_dir.empty() ? "." : f.out_dir;
    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/loss_properties.json");
    const std::vector<double> grid = default_margin_grid();
    out << "[\n";
    const std::vector<LossKind> kinds = all_loss_kinds();
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const PropertyReport r = check_loss_properties(kinds[i], grid);
        std::cout << r.to_json() << '\n';
        out << "  " << r.to_json() << (i + 1 < kinds.size() ? "," : "") << '\n';
    }
    out << "]\n";
    return 0;
}

int cmd_report(const CommonFlags& f) {
    const std::string dir = f.out_dir.empty() ? "." : f.out_dir;
    run_report(dir);
    std::cout << "wrote " << dir << "/report.md and summary.csv\n";
    return 0;
}

int cmd_sbm_gen(const CommonFlags& f) {
    const ExperimentConfig cfg = load_with_overrides(f);
    if (!cfg.dataset.synthetic) throw ConfigError("sbm-gen needs a dataset.sbm block");
    const Graph g = load_dataset(cfg.dataset);
    fs::create_directories(cfg.out_dir);
    save_graph(g, cfg.out_dir + "/edges.txt", cfg.out_dir + "/features.csv",
               cfg.out_dir + "/labels.txt");
    save_splits(g.splits, cfg.out_dir + "/splits.json");
    std::cout << "wrote " << g.num_nodes() << " nodes, " << g.num_edges() << " edges to "
              << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structure attacks, robust aggregation, and PPR tooling for graph models"};
    app.require_subcommand(1);

    CommonFlags train_f, attack_f, defend_f, ppr_f, loss_f, report_f, sbm_f;
    std::string defend_checkpoint, defend_diff;

    add_common(app.add_subcommand("train", "train surrogate (and victim) models"), &train_f);
    add_common(app.add_subcommand("attack", "run the attack campaign"), &attack_f);
    CLI::App* defend = app.add_subcommand("defend-eval", "evaluate a checkpoint on clean or perturbed data");
    add_common(defend, &defend_f);
    defend->add_option("--checkpoint", defend_checkpoint, "model checkpoint")->required();
    defend->add_option("--diff", defend_diff, "edge-list diff to apply before evaluating");
    add_common(app.add_subcommand("ppr", "precompute top-k PPR rows"), &ppr_f);
    add_common(app.add_subcommand("loss-check", "emit surrogate-loss property reports"), &loss_f,
               false);
    add_common(app.add_subcommand("report", "summarize completed runs under --out"), &report_f,
               false);
    add_common(app.add_subcommand("sbm-gen", "generate and save a synthetic dataset"), &sbm_f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand("train")) return cmd_train(train_f);
        if (app.got_subcommand("attack")) return cmd_attack(attack_f);
        if (app.got_subcommand("defend-eval"))
            return cmd_defend_eval(defend_f, defend_checkpoint, defend_diff);
        if (app.got_subcommand("ppr")) return cmd_ppr(ppr_f);
        if (app.got_subcommand("loss-check")) return cmd_loss_check(loss_f);
        if (app.got_subcommand("report")) return cmd_report(report_f);
        if (app.got_subcommand("sbm-gen")) return cmd_sbm_gen(sbm_f);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
