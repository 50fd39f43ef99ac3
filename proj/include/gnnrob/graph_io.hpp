#pragma once

#include <optional>
#include <string>

#include "gnnrob/graph.hpp"

namespace gnnrob {

struct LoadOptions {
    bool directed = false;
    bool extract_lcc = false;
    std::optional<std::string> split_path;  // JSON with train/valid/test arrays
};

/// Loads a graph from an edge list ("src dst [weight]" per line), a feature
/// file (CSV, or raw little-endian f32 with an 8-byte u32 (n, d) header), and
/// a label file (one integer per line). Duplicate edges merge by summation;
/// for undirected graphs each edge is mirrored before merging.
Graph load_graph(const std::string& edge_path, const std::string& feature_path,
                 const std::string& label_path, const LoadOptions& opts = {});

void save_graph(const Graph& g, const std::string& edge_path, const std::string& feature_path,
                const std::string& label_path);

Splits load_splits(const std::string& path);
void save_splits(const Splits& s, const std::string& path);

/// Edge-list diff: "+ i j" adds an edge, "- i j" removes one. Applying a diff
/// twice restores the original adjacency.
void save_edge_diff(const std::vector<std::pair<Index, Index>>& flips, const std::string& path);
std::vector<std::pair<Index, Index>> load_edge_diff(const std::string& path);

/// XOR-applies edge flips to a 0/1 adjacency. For undirected graphs each flip
/// toggles both (i, j) and (j, i).
CsrMatrix apply_flips(const CsrMatrix& adjacency, const std::vector<std::pair<Index, Index>>& flips,
                      bool directed);

}  // namespace gnnrob
