#pragma once

#include <vector>

#include "gnnrob/csr.hpp"
#include "gnnrob/dense.hpp"

namespace gnnrob {

struct Splits {
    std::vector<Index> train;
    std::vector<Index> valid;
    std::vector<Index> test;
};

/// Attributed graph: CSR adjacency, dense features, class labels, and the
/// train/valid/test node split.
struct Graph {
    CsrMatrix adjacency;  // n x n
    Matrix features;      // n x d
    std::vector<Index> labels;
    bool directed = false;
    Splits splits;

    Index num_nodes() const { return adjacency.n_rows; }
    Index num_feature_dims() const { return features.cols; }
    Index num_classes() const;

    /// Edge count as used for relative budgets: nnz for directed graphs,
    /// nnz/2 for undirected ones (each edge stored twice).
    Index num_edges() const;

    void check_invariants() const;

    /// Adjacency footprint at 32- and 64-bit value width (indices stay 64-bit).
    std::pair<std::size_t, std::size_t> adjacency_bytes() const;
};

/// Weighted row sums of an adjacency matrix.
struct DegreeVector {
    std::vector<double> degrees;
};

DegreeVector weighted_degrees(const CsrMatrix& adjacency);

/// Symmetric GCN normalization D^{-1/2} (A + I) D^{-1/2} with self-loops
/// added. Isolated nodes end up with a lone self-loop of weight 1.
CsrMatrix gcn_normalize(const CsrMatrix& adjacency);
CsrMatrix gcn_normalize(const Graph& g);

/// Scales every nonempty row to sum 1; empty rows stay empty.
CsrMatrix row_normalize(const CsrMatrix& m);

/// Fraction of masked nodes whose prediction matches the label.
double accuracy(const std::vector<Index>& predictions, const std::vector<Index>& labels,
                const std::vector<Index>& mask);

/// Restricts the graph to its largest connected component (edges treated as
/// undirected for connectivity). Returns the induced subgraph together with
/// the kept original node ids.
Graph largest_connected_component(const Graph& g, std::vector<Index>* kept_nodes = nullptr);

/// Samples `per_class` train and validation nodes per class (seeded); the
/// remainder becomes the test set.
Splits sample_splits(const std::vector<Index>& labels, Index per_class, std::uint64_t seed);

}  // namespace gnnrob
