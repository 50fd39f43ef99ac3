#include "gnnrob/graph_io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gnnrob {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

Matrix load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                parse_fail(path, lineno, "bad feature value '" + tok + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            parse_fail(path, lineno, "inconsistent feature row length");
        rows.push_back(std::move(row));
    }
    Matrix x(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), x.row(static_cast<Index>(r)));
    return x;
}

Matrix load_features_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::uint32_t n = 0, d = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&d), 4);
    if (!in) throw std::runtime_error(path + ": truncated binary feature header");
    Matrix x(static_cast<Index>(n), static_cast<Index>(d));
    std::vector<float> buf(static_cast<std::size_t>(n) * d);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!in) throw std::runtime_error(path + ": truncated binary feature payload");
    for (std::size_t i = 0; i < buf.size(); ++i) x.data[i] = static_cast<double>(buf[i]);
    return x;
}

bool looks_binary(const std::string& path) {
    return path.size() > 4 && path.substr(path.size() - 4) == ".bin";
}

}  // namespace

Graph load_graph(const std::string& edge_path, const std::string& feature_path,
                 const std::string& label_path, const LoadOptions& opts) {
    Graph g;
    g.directed = opts.directed;
    g.features = looks_binary(feature_path) ? load_features_bin(feature_path)
                                            : load_features_csv(feature_path);
    const Index n = g.features.rows;

    {
        std::ifstream in(label_path);
        if (!in) throw std::runtime_error("cannot open label file: " + label_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                g.labels.push_back(static_cast<Index>(std::stoll(line)));
            } catch (const std::exception&) {
                parse_fail(label_path, lineno, "bad label '" + line + "'");
            }
        }
        if (static_cast<Index>(g.labels.size()) != n)
            throw std::runtime_error(label_path + ": label count does not match feature rows");
    }

    std::vector<Index> ris, cis;
    std::vector<double> vals;
    {
        std::ifstream in(edge_path);
        if (!in) throw std::runtime_error("cannot open edge file: " + edge_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::stringstream ss(line);
            long long src = 0, dst = 0;
            double w = 1.0;
            if (!(ss >> src >> dst)) parse_fail(edge_path, lineno, "expected 'src dst [weight]'");
            ss >> w;  // optional
            if (src < 0 || src >= n || dst < 0 || dst >= n)
                parse_fail(edge_path, lineno, "node index out of bounds");
            ris.push_back(src);
            cis.push_back(dst);
            vals.push_back(w);
            if (!opts.directed && src != dst) {
                ris.push_back(dst);
                cis.push_back(src);
                vals.push_back(w);
            }
        }
    }
    g.adjacency = CsrMatrix::from_triplets(n, n, std::move(ris), std::move(cis), std::move(vals));

    if (opts.split_path) g.splits = load_splits(*opts.split_path);
    if (opts.extract_lcc) g = largest_connected_component(g);
    g.check_invariants();
    return g;
}

void save_graph(const Graph& g, const std::string& edge_path, const std::string& feature_path,
                const std::string& label_path) {
    {
        std::ofstream out(edge_path);
        for (Index r = 0; r < g.num_nodes(); ++r)
            for (Index k = g.adjacency.row_begin(r); k < g.adjacency.row_end(r); ++k) {
                const Index c = g.adjacency.col_indices[static_cast<std::size_t>(k)];
                if (!g.directed && c < r) continue;  // store one direction
                out << r << ' ' << c;
                const double v = g.adjacency.values[static_cast<std::size_t>(k)];
                if (v != 1.0) out << ' ' << v;
                out << '\n';
            }
    }
    {
        std::ofstream out(feature_path);
        out.precision(17);
        for (Index r = 0; r < g.features.rows; ++r) {
            for (Index c = 0; c < g.features.cols; ++c) {
                if (c) out << ',';
                out << g.features(r, c);
            }
            out << '\n';
        }
    }
    {
        std::ofstream out(label_path);
        for (Index y : g.labels) out << y << '\n';
    }
}

Splits load_splits(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open split file: " + path);
    nlohmann::json j;
    in >> j;
    Splits s;
    for (auto v : j.at("train")) s.train.push_back(v.get<Index>());
    for (auto v : j.at("valid")) s.valid.push_back(v.get<Index>());
    for (auto v : j.at("test")) s.test.push_back(v.get<Index>());
    return s;
}

void save_splits(const Splits& s, const std::string& path) {
    nlohmann::json j{{"train", s.train}, {"valid", s.valid}, {"test", s.test}};
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

void save_edge_diff(const std::vector<std::pair<Index, Index>>& flips, const std::string& path) {
    std::ofstream out(path);
    for (auto [i, j] : flips) out << i << ' ' << j << '\n';
}

std::vector<std::pair<Index, Index>> load_edge_diff(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open diff file: " + path);
    std::vector<std::pair<Index, Index>> flips;
    long long i, j;
    while (in >> i >> j) flips.emplace_back(i, j);
    return flips;
}

CsrMatrix apply_flips(const CsrMatrix& adjacency, const std::vector<std::pair<Index, Index>>& flips,
                      bool directed) {
    std::vector<Index> ris(adjacency.col_indices.size()), cis = adjacency.col_indices;
    std::vector<double> vals = adjacency.values;
    for (Index r = 0; r < adjacency.n_rows; ++r)
        for (Index k = adjacency.row_begin(r); k < adjacency.row_end(r); ++k)
            ris[static_cast<std::size_t>(k)] = r;
    auto flip_one = [&](Index i, Index j) {
        // XOR against the current 0/1 entry: +1 toggles absent -> present, and
        // -1 cancels an existing unit entry (from_triplets sums duplicates,
        // then we drop exact zeros below).
        const double present = adjacency.at(i, j);
        ris.push_back(i);
        cis.push_back(j);
        vals.push_back(present > 0.0 ? -present : 1.0);
    };
    for (auto [i, j] : flips) {
        flip_one(i, j);
        if (!directed && i != j) flip_one(j, i);
    }
    CsrMatrix merged = CsrMatrix::from_triplets(adjacency.n_rows, adjacency.n_cols,
                                                std::move(ris), std::move(cis), std::move(vals));
    // strip exact zeros produced by removals
    CsrMatrix out(merged.n_rows, merged.n_cols);
    for (Index r = 0; r < merged.n_rows; ++r) {
        for (Index k = merged.row_begin(r); k < merged.row_end(r); ++k) {
            if (merged.values[static_cast<std::size_t>(k)] == 0.0) continue;
            out.col_indices.push_back(merged.col_indices[static_cast<std::size_t>(k)]);
            out.values.push_back(merged.values[static_cast<std::size_t>(k)]);
        }
        out.row_offsets[static_cast<std::size_t>(r) + 1] = static_cast<Index>(out.col_indices.size());
    }
    return out;
}

}  // namespace gnnrob
