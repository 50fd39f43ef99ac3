#include "gnnrob/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gnnrob/checkpoint.hpp"
#include "gnnrob/graph_io.hpp"
#include "gnnrob/ppr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gnnrob {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void require_file(const std::string& path, const std::string& what) {
    require(fs::exists(path), what + " not found: " + path);
}

DatasetSpec parse_dataset(const json& j) {
    DatasetSpec d;
    if (j.contains("sbm")) {
        d.synthetic = true;
        const json& s = j.at("sbm");
        d.sbm.block_sizes = s.at("block_sizes").get<std::vector<Index>>();
        d.sbm.p_in = s.value("p_in", d.sbm.p_in);
        d.sbm.p_out = s.value("p_out", d.sbm.p_out);
        d.sbm.feature_dim = s.value("feature_dim", d.sbm.feature_dim);
        d.sbm.feature_noise = s.value("feature_noise", d.sbm.feature_noise);
        d.sbm.seed = s.value("seed", d.sbm.seed);
        require(!d.sbm.block_sizes.empty(), "sbm.block_sizes must be nonempty");
    } else {
        d.edge_path = j.at("edges").get<std::string>();
        d.feature_path = j.at("features").get<std::string>();
        d.label_path = j.at("labels").get<std::string>();
        d.split_path = j.value("splits", std::string{});
        d.directed = j.value("directed", false);
        require_file(d.edge_path, "edge file");
        require_file(d.feature_path, "feature file");
        require_file(d.label_path, "label file");
        if (!d.split_path.empty()) require_file(d.split_path, "split file");
    }
    d.split_per_class = j.value("split_per_class", d.split_per_class);
    d.split_seed = j.value("split_seed", d.split_seed);
    return d;
}

ModelSpec parse_model(const json& j) {
    ModelSpec m;
    m.kind = model_kind_from_name(j.value("kind", std::string{"gcn"}));
    m.hidden_dim = j.value("hidden_dim", m.hidden_dim);
    m.n_layers = j.value("n_layers", m.n_layers);
    m.aggregation = aggregation_from_name(j.value("aggregation", std::string{"weighted-sum"}));
    m.temperature = j.value("temperature", m.temperature);
    m.propagation_steps = j.value("propagation_steps", m.propagation_steps);
    if (j.contains("teleport")) {
        const json& t = j.at("teleport");
        m.teleport.alpha = t.value("alpha", m.teleport.alpha);
        m.teleport.k = t.value("k", m.teleport.k);
        m.teleport.tol = t.value("tol", m.teleport.tol);
        m.teleport.max_iter = t.value("max_iter", m.teleport.max_iter);
        m.teleport.validate();
    }
    require(m.hidden_dim > 0 && m.n_layers > 0, "model dims must be positive");
    return m;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string{"config is not valid JSON: "} + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.dataset = parse_dataset(j.at("dataset"));
        if (j.contains("model")) cfg.model = parse_model(j.at("model"));
        if (j.contains("victim")) {
            cfg.has_victim = true;
            cfg.victim = parse_model(j.at("victim"));
        }
        if (j.contains("attack")) {
            const json& a = j.at("attack");
            if (a.contains("kinds")) cfg.attack.kinds = a.at("kinds").get<std::vector<std::string>>();
            if (a.contains("losses")) {
                cfg.attack.losses.clear();
                for (const auto& name : a.at("losses"))
                    cfg.attack.losses.push_back(loss_from_name(name.get<std::string>()));
            }
            if (a.contains("epsilons")) cfg.attack.epsilons = a.at("epsilons").get<std::vector<double>>();
            GlobalAttackConfig& g = cfg.attack.global;
            g.block_size = a.value("block_size", g.block_size);
            g.epochs = a.value("epochs", g.epochs);
            g.resample_epochs = a.value("resample_epochs", g.resample_epochs);
            g.base_lr = a.value("base_lr", g.base_lr);
            g.sample_tries = a.value("sample_tries", g.sample_tries);
            g.dense_cap = a.value("dense_cap", g.dense_cap);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            cfg.train.lr = t.value("lr", cfg.train.lr);
            cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
            cfg.train.epochs = t.value("epochs", cfg.train.epochs);
            cfg.train.patience = t.value("patience", cfg.train.patience);
        }
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.threads = j.value("threads", cfg.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string{"config schema violation: "} + e.what());
    }
    require(!cfg.seeds.empty(), "seeds must be nonempty");
    require(!cfg.attack.epsilons.empty(), "epsilon list must be nonempty");
    for (double eps : cfg.attack.epsilons)
        require(eps > 0.0 && eps <= 1.0, "epsilon values must lie in (0, 1]");
    for (const std::string& k : cfg.attack.kinds)
        require(k == "prbcd" || k == "grbcd" || k == "pgd" || k == "fgsm" || k == "dice",
                "unknown attack kind: " + k);
    require(cfg.threads >= 1, "threads must be at least 1");
    // environment overrides: output directory and thread count only
    if (const char* env = std::getenv("GNNROB_OUT_DIR")) cfg.out_dir = env;
    if (const char* env = std::getenv("GNNROB_THREADS")) cfg.threads = std::stoll(env);
    cfg.config_echo = j.dump(2);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

Graph load_dataset(const DatasetSpec& spec) {
    Graph g;
    if (spec.synthetic) {
        g = sbm_generate(spec.sbm);
    } else {
        LoadOptions opts;
        opts.directed = spec.directed;
        if (!spec.split_path.empty()) opts.split_path = spec.split_path;
        g = load_graph(spec.edge_path, spec.feature_path, spec.label_path, opts);
    }
    if (g.splits.train.empty())
        g.splits = sample_splits(g.labels, spec.split_per_class, spec.split_seed);
    g.check_invariants();
    return g;
}

CsrMatrix message_passing_matrix(const ModelSpec& spec, const CsrMatrix& adjacency) {
    switch (spec.kind) {
        case ModelKind::GCN:
        case ModelKind::SGC: return gcn_normalize(adjacency);
        case ModelKind::GDC: return gdc_preprocess(adjacency, spec.teleport);
        case ModelKind::PPRGo: throw ConfigError("pprgo has no message-passing matrix");
    }
    throw std::logic_error("unreachable");
}

std::string checkpoint_path(const std::string& dir, const std::string& tag, std::uint64_t seed) {
    return dir + "/" + tag + "_seed" + std::to_string(seed) + ".ckpt";
}

namespace {

ModelParams build_and_train(const ModelSpec& spec, const Graph& g, const TrainConfig& tcfg,
                            TrainRecord* record) {
    ModelParams params = init_params(spec.kind, g.num_feature_dims(), spec.hidden_dim,
                                     g.num_classes(), spec.n_layers, tcfg.seed,
                                     spec.aggregation, spec.temperature);
    params.propagation_steps = spec.propagation_steps;
    if (spec.kind == ModelKind::PPRGo) {
        std::vector<Index> all(static_cast<std::size_t>(g.num_nodes()));
        for (Index i = 0; i < g.num_nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
        const PprMatrix ppr = ppr_power_iteration(g, spec.teleport, all);
        return train_pprgo(std::move(params), g, ppr, tcfg, record);
    }
    return train(std::move(params), g, message_passing_matrix(spec, g.adjacency), tcfg, record);
}

double evaluate_model(const ModelSpec& spec, const ModelParams& params, const Graph& g,
                      const CsrMatrix& adjacency) {
    if (spec.kind == ModelKind::PPRGo) {
        std::vector<Index> all(static_cast<std::size_t>(g.num_nodes()));
        for (Index i = 0; i < g.num_nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
        PprMatrix ppr = ppr_power_iteration(adjacency, spec.teleport, all);
        const Prediction pred = pprgo_forward(params, ppr, g.features, g.splits.test);
        std::vector<Index> cls = predict_classes(pred.logits);
        Index hit = 0;
        for (std::size_t i = 0; i < g.splits.test.size(); ++i)
            if (cls[i] == g.labels[static_cast<std::size_t>(g.splits.test[i])]) ++hit;
        return g.splits.test.empty() ? 0.0 : static_cast<double>(hit) / g.splits.test.size();
    }
    const Prediction pred = forward(params, message_passing_matrix(spec, adjacency), g.features);
    return accuracy(predict_classes(pred.logits), g.labels, g.splits.test);
}

void write_text_atomically(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << text;
    }
    fs::rename(tmp, path);
}

}  // namespace

std::string git_describe() {
    FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
    if (!pipe) return "unknown";
    char buf[128] = {0};
    std::string out;
    while (fgets(buf, sizeof(buf), pipe)) out += buf;
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

std::vector<TrainOutcome> run_training(const ExperimentConfig& cfg, const Graph& g,
                                       const ModelSpec& spec, const std::string& tag) {
    fs::create_directories(cfg.out_dir);
    std::vector<TrainOutcome> outcomes;
    json records = json::array();
    for (std::uint64_t seed : cfg.seeds) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainConfig tcfg = cfg.train;
        tcfg.seed = seed;
        TrainRecord rec;
        const ModelParams params = build_and_train(spec, g, tcfg, &rec);
        TrainOutcome o;
        o.seed = seed;
        o.best_valid_acc = rec.best_valid_acc;
        o.best_epoch = rec.best_epoch;
        o.clean_test_acc = evaluate_model(spec, params, g, g.adjacency);
        o.runtime_s = seconds_since(t0);
        o.checkpoint = checkpoint_path(cfg.out_dir, tag, seed);
        save_checkpoint(params, o.checkpoint, seed);
        outcomes.push_back(o);
        records.push_back({{"seed", seed},
                           {"clean_test_acc", o.clean_test_acc},
                           {"best_valid_acc", o.best_valid_acc},
                           {"best_epoch", o.best_epoch},
                           {"runtime_s", o.runtime_s},
                           {"checkpoint", o.checkpoint}});
    }
    json record{{"phase", "train"},
                {"tag", tag},
                {"git", git_describe()},
                {"model", model_kind_name(spec.kind)},
                {"config", json::parse(cfg.config_echo.empty() ? "{}" : cfg.config_echo)},
                {"cells", records}};
    write_text_atomically(cfg.out_dir + "/train_" + tag + ".json", record.dump(2) + "\n");
    return outcomes;
}

std::vector<CellResult> run_attack_campaign(const ExperimentConfig& cfg, const Graph& g) {
    fs::create_directories(cfg.out_dir);
    struct Cell {
        std::string kind;
        LossKind loss;
        double epsilon;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const std::string& kind : cfg.attack.kinds)
        for (LossKind loss : cfg.attack.losses)
            for (double eps : cfg.attack.epsilons)
                for (std::uint64_t seed : cfg.seeds) cells.push_back({kind, loss, eps, seed});

    // per-seed surrogate (and optional victim) checkpoints, loaded up front
    std::map<std::uint64_t, ModelParams> surrogates, victims;
    for (std::uint64_t seed : cfg.seeds) {
        const std::string sp = checkpoint_path(cfg.out_dir, "surrogate", seed);
        require_file(sp, "surrogate checkpoint");
        ModelParams p = load_checkpoint(sp);
        if (p.in_dim() != g.num_feature_dims() || p.out_dim() != g.num_classes())
            throw ConfigError("checkpoint does not match dataset dimensions: " + sp);
        surrogates.emplace(seed, std::move(p));
        if (cfg.has_victim) {
            const std::string vp = checkpoint_path(cfg.out_dir, "victim", seed);
            require_file(vp, "victim checkpoint");
            ModelParams v = load_checkpoint(vp);
            if (v.in_dim() != g.num_feature_dims() || v.out_dim() != g.num_classes())
                throw ConfigError("checkpoint does not match dataset dimensions: " + vp);
            victims.emplace(seed, std::move(v));
        }
    }

    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            const Cell& cell = cells[idx];
            try {
                const auto t0 = std::chrono::steady_clock::now();
                GlobalAttackConfig acfg = cfg.attack.global;
                acfg.seed = cell.seed;
                const AttackBudget budget = budget_from_epsilon(g, cell.epsilon);
                const ModelParams& surrogate = surrogates.at(cell.seed);

                AttackResult ar;
                if (cell.kind == "prbcd") ar = prbcd_global(g, surrogate, cell.loss, budget, acfg);
                else if (cell.kind == "grbcd") ar = grbcd_global(g, surrogate, cell.loss, budget, acfg);
                else if (cell.kind == "pgd") ar = pgd_dense(g, surrogate, cell.loss, budget, acfg);
                else if (cell.kind == "fgsm") ar = fgsm_dense(g, surrogate, cell.loss, budget, acfg);
                else ar = dice(g, budget, cell.seed);

                CellResult r;
                r.attack = cell.kind;
                r.loss = cell.loss;
                r.epsilon = cell.epsilon;
                r.seed = cell.seed;
                r.peak_bytes = ar.state_bytes;
                const ModelSpec& eval_spec = cfg.has_victim ? cfg.victim : cfg.model;
                const ModelParams& eval_params =
                    cfg.has_victim ? victims.at(cell.seed) : surrogate;
                r.clean_acc = evaluate_model(eval_spec, eval_params, g, g.adjacency);
                r.adv_acc = evaluate_model(eval_spec, eval_params, g, ar.perturbed_adjacency);
                r.runtime_s = seconds_since(t0);

                std::ostringstream stem;
                stem << cfg.out_dir << "/" << cell.kind << "_" << loss_name(cell.loss) << "_eps"
                     << cell.epsilon << "_seed" << cell.seed;
                save_attack_result(ar, stem.str() + ".json", stem.str() + ".diff");
                results[idx] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), cells.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t + 1 < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    write_cells_csv(results, cfg.out_dir + "/cells.csv");
    write_aggregate_csv(aggregate_cells(results), cfg.out_dir + "/aggregate.csv");
    json record{{"phase", "attack"},
                {"git", git_describe()},
                {"model", model_kind_name(cfg.model.kind)},
                {"aggregation", aggregation_name(cfg.model.aggregation)},
                {"victim", cfg.has_victim ? model_kind_name(cfg.victim.kind) : "none"},
                {"victim_aggregation",
                 cfg.has_victim ? aggregation_name(cfg.victim.aggregation) : "none"},
                {"n_nodes", g.num_nodes()},
                {"n_edges", g.num_edges()},
                {"config", json::parse(cfg.config_echo.empty() ? "{}" : cfg.config_echo)}};
    write_text_atomically(cfg.out_dir + "/campaign.json", record.dump(2) + "\n");
    return results;
}

void write_cells_csv(const std::vector<CellResult>& cells, const std::string& path) {
    std::ostringstream out;
    out << "attack,loss,epsilon,seed,adv_acc,clean_acc,runtime_s,peak_bytes\n";
    for (const CellResult& c : cells)
        out << c.attack << ',' << loss_name(c.loss) << ',' << c.epsilon << ',' << c.seed << ','
            << c.adv_acc << ',' << c.clean_acc << ',' << c.runtime_s << ',' << c.peak_bytes
            << '\n';
    write_text_atomically(path, out.str());
}

std::vector<CellResult> read_cells_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<CellResult> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        CellResult c;
        std::getline(ss, c.attack, ',');
        std::getline(ss, field, ',');
        c.loss = loss_from_name(field);
        std::getline(ss, field, ',');
        c.epsilon = std::stod(field);
        std::getline(ss, field, ',');
        c.seed = std::stoull(field);
        std::getline(ss, field, ',');
        c.adv_acc = std::stod(field);
        std::getline(ss, field, ',');
        c.clean_acc = std::stod(field);
        std::getline(ss, field, ',');
        c.runtime_s = std::stod(field);
        std::getline(ss, field, ',');
        c.peak_bytes = std::stoull(field);
        cells.push_back(std::move(c));
    }
    return cells;
}

std::vector<AggregateRow> aggregate_cells(const std::vector<CellResult>& cells) {
    std::map<std::tuple<std::string, int, double>, std::vector<const CellResult*>> groups;
    for (const CellResult& c : cells)
        groups[{c.attack, static_cast<int>(c.loss), c.epsilon}].push_back(&c);
    std::vector<AggregateRow> rows;
    for (const auto& [key, group] : groups) {
        AggregateRow r;
        r.attack = std::get<0>(key);
        r.loss = static_cast<LossKind>(std::get<1>(key));
        r.epsilon = std::get<2>(key);
        r.n_seeds = static_cast<Index>(group.size());
        double sum = 0.0, sum2 = 0.0;
        for (const CellResult* c : group) {
            sum += c->adv_acc;
            sum2 += c->adv_acc * c->adv_acc;
            r.clean_acc_mean += c->clean_acc;
            r.runtime_s_mean += c->runtime_s;
            r.peak_bytes_mean += static_cast<double>(c->peak_bytes);
        }
        const double k = static_cast<double>(group.size());
        r.adv_acc_mean = sum / k;
        r.clean_acc_mean /= k;
        r.runtime_s_mean /= k;
        r.peak_bytes_mean /= k;
        if (group.size() > 1) {
            const double var = std::max(0.0, (sum2 - sum * sum / k) / (k - 1.0));
            r.adv_acc_3se = 3.0 * std::sqrt(var / k);  // 3-sigma error of the mean
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
    std::ostringstream out;
    out << "attack,loss,epsilon,n_seeds,adv_acc_mean,adv_acc_3se,clean_acc_mean,"
           "runtime_s_mean,peak_bytes_mean\n";
    for (const AggregateRow& r : rows)
        out << r.attack << ',' << loss_name(r.loss) << ',' << r.epsilon << ',' << r.n_seeds << ','
            << r.adv_acc_mean << ',' << r.adv_acc_3se << ',' << r.clean_acc_mean << ','
            << r.runtime_s_mean << ',' << r.peak_bytes_mean << '\n';
    write_text_atomically(path, out.str());
}

void run_report(const std::string& run_dir) {
    struct Campaign {
        std::string name;  // architecture label
        Index n_nodes = 0;
        std::vector<CellResult> cells;
    };
    std::vector<Campaign> campaigns;

    auto try_load = [&](const fs::path& dir) {
        const fs::path csv = dir / "cells.csv";
        if (!fs::exists(csv)) return;
        Campaign c;
        c.name = dir.filename().string();
        const fs::path meta = dir / "campaign.json";
        if (fs::exists(meta)) {
            std::ifstream in(meta);
            json j = json::parse(in);
            std::string victim = j.value("victim", std::string{"none"});
            std::string model = victim != "none" ? victim : j.value("model", c.name);
            std::string agg = victim != "none" ? j.value("victim_aggregation", std::string{})
                                               : j.value("aggregation", std::string{});
            c.name = agg.empty() || agg == "weighted-sum" || agg == "none"
                         ? model
                         : model + " (" + agg + ")";
            c.n_nodes = j.value("n_nodes", Index{0});
        }
        c.cells = read_cells_csv(csv.string());
        campaigns.push_back(std::move(c));
    };

    if (!fs::exists(run_dir)) throw ConfigError("run directory not found: " + run_dir);
    try_load(fs::path(run_dir));
    for (const auto& entry : fs::directory_iterator(run_dir))
        if (entry.is_directory()) try_load(entry.path());
    if (campaigns.empty()) throw ConfigError("no completed runs under " + run_dir);

    std::vector<std::string> attacks;
    for (const Campaign& c : campaigns)
        for (const CellResult& cell : c.cells)
            if (std::find(attacks.begin(), attacks.end(), cell.attack) == attacks.end())
                attacks.push_back(cell.attack);
    std::sort(attacks.begin(), attacks.end());

    auto mean_adv = [](const std::vector<CellResult>& cells, const std::string& attack,
                       const LossKind* loss) -> double {
        double sum = 0.0;
        Index n = 0;
        for (const CellResult& c : cells)
            if (c.attack == attack && (!loss || c.loss == *loss)) {
                sum += c.adv_acc;
                ++n;
            }
        return n == 0 ? std::nan("") : sum / static_cast<double>(n);
    };
    auto cell_text = [](double v) {
        if (std::isnan(v)) return std::string{"-"};
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", v);
        return std::string{buf};
    };

    std::ostringstream md, csv;
    md << "# Attack campaign report\n\n## Adversarial accuracy by architecture and attack\n\n";
    md << "| architecture | clean |";
    for (const std::string& a : attacks) md << ' ' << a << " |";
    md << " peak attack bytes | dense n^2 x 4B |\n|---|---|";
    for (std::size_t i = 0; i < attacks.size(); ++i) md << "---|";
    md << "---|---|\n";
    csv << "architecture,attack,loss,epsilon,adv_acc_mean,adv_acc_3se,clean_acc_mean\n";
    for (const Campaign& c : campaigns) {
        double clean = 0.0, peak = 0.0;
        for (const CellResult& cell : c.cells) {
            clean += cell.clean_acc;
            peak = std::max(peak, static_cast<double>(cell.peak_bytes));
        }
        clean /= static_cast<double>(c.cells.size());
        md << "| " << c.name << " | " << cell_text(clean) << " |";
        for (const std::string& a : attacks) md << ' ' << cell_text(mean_adv(c.cells, a, nullptr)) << " |";
        const double dense = 4.0 * static_cast<double>(c.n_nodes) * static_cast<double>(c.n_nodes);
        md << ' ' << static_cast<std::size_t>(peak) << " | "
           << (c.n_nodes > 0 ? std::to_string(static_cast<std::size_t>(dense)) : "-") << " |\n";
        for (const AggregateRow& r : aggregate_cells(c.cells))
            csv << c.name << ',' << r.attack << ',' << loss_name(r.loss) << ',' << r.epsilon << ','
                << r.adv_acc_mean << ',' << r.adv_acc_3se << ',' << r.clean_acc_mean << '\n';
    }

    // loss comparison: rows = losses, columns = attacks, pooled over campaigns
    std::vector<LossKind> losses;
    for (const Campaign& c : campaigns)
        for (const CellResult& cell : c.cells)
            if (std::find(losses.begin(), losses.end(), cell.loss) == losses.end())
                losses.push_back(cell.loss);
    md << "\n## Adversarial accuracy by surrogate loss\n\n| loss |";
    for (const std::string& a : attacks) md << ' ' << a << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < attacks.size(); ++i) md << "---|";
    md << '\n';
    for (LossKind loss : losses) {
        md << "| " << loss_name(loss) << " |";
        for (const std::string& a : attacks) {
            double sum = 0.0;
            Index n = 0;
            for (const Campaign& c : campaigns) {
                const double v = mean_adv(c.cells, a, &loss);
                if (!std::isnan(v)) {
                    sum += v;
                    ++n;
                }
            }
            md << ' ' << cell_text(n == 0 ? std::nan("") : sum / static_cast<double>(n)) << " |";
        }
        md << '\n';
    }
    md << "\ngit: " << git_describe() << '\n';

    write_text_atomically(run_dir + std::string{"/report.md"}, md.str());
    write_text_atomically(run_dir + std::string{"/summary.csv"}, csv.str());
}

}  // namespace gnnrob
