#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gnnrob/graph.hpp"

namespace gnnrob {

struct TeleportConfig {
    double alpha = 0.15;  // teleport / restart probability
    Index k = 64;         // per-row top-k sparsification
    double tol = 1e-9;
    Index max_iter = 1000;

    void validate() const;
};

/// Sparse row of scores: sorted (index, value) pairs.
using SparseRow = std::vector<std::pair<Index, double>>;

/// Row-wise top-k-sparsified personalized PageRank scores.
struct PprMatrix {
    Index n = 0;
    std::vector<SparseRow> rows;        // indexed by populated source
    std::vector<Index> sources;         // which node each row belongs to
    std::vector<Index> row_of_node;     // node -> position in rows, or -1

    const SparseRow* row_for(Index node) const {
        const Index p = row_of_node[static_cast<std::size_t>(node)];
        return p < 0 ? nullptr : &rows[static_cast<std::size_t>(p)];
    }
};

/// Dense-inverse oracle: alpha (I - (1-alpha) D^{-1} A)^{-1}. Dangling nodes
/// get a self-loop before normalization. Intended for n <= 2000.
Matrix ppr_exact(const Graph& g, const TeleportConfig& cfg);
Matrix ppr_exact(const CsrMatrix& adjacency, const TeleportConfig& cfg);

/// Power iteration for the requested source rows, followed by top-k
/// sparsification (largest k raw scores kept, no renormalization unless
/// `renormalize`). Throws on non-convergence, carrying the residual.
PprMatrix ppr_power_iteration(const Graph& g, const TeleportConfig& cfg,
                              const std::vector<Index>& sources, bool renormalize = false);
PprMatrix ppr_power_iteration(const CsrMatrix& adjacency, const TeleportConfig& cfg,
                              const std::vector<Index>& sources, bool renormalize = false);

/// Expected number of distinct nonzero columns touched by a b-candidate
/// rank-one update against a top-k PPR matrix: (n^b - (n-k)^b) / n^(b-1),
/// evaluated in log space.
double expected_nonzero_columns(Index n, Index k, Index b);

/// GDC preprocessing: top-k PPR, max-symmetrized, then row-normalized.
CsrMatrix gdc_preprocess(const Graph& g, const TeleportConfig& cfg);
CsrMatrix gdc_preprocess(const CsrMatrix& adjacency, const TeleportConfig& cfg);

/// One candidate incoming edge of the rank-one update: column index, the
/// relaxed weight in [0, 1], and the XOR sign (+1 insertion of a missing
/// edge, -1 removal of an existing one).
struct UpdateCandidate {
    Index col = 0;
    double weight = 0.0;
    double sign = 1.0;
};

struct RowUpdateResult {
    SparseRow row;  // perturbed PPR row of the target, sorted by index
    /// Vector-Jacobian product: given the gradient of a scalar loss with
    /// respect to `row` (aligned with it), returns d loss / d weight for each
    /// candidate. O(b k) like the forward update.
    std::function<std::vector<double>(const std::vector<double>&)> vjp;
    double denominator = 0.0;  // 1 + v Pi'_{:i}
};

/// Sherman-Morrison rank-one update of PPR row `target` after reweighting its
/// incoming edges by the candidates (XOR semantics against `a_i`). `ppr` must
/// hold rows for the target and for every node that is either a current
/// neighbor in `a_i` or a candidate. `a_i` is the unnormalized adjacency row
/// (with the dangling self-loop applied if any). Throws on a (near-)singular
/// denominator.
RowUpdateResult ppr_row_rank_one_update(const PprMatrix& ppr, Index target, const SparseRow& a_i,
                                        const DegreeVector& degs,
                                        const std::vector<UpdateCandidate>& candidates,
                                        double alpha);

/// Count of distinct columns appearing in the given PPR rows (the r of the
/// update-cost analysis).
Index distinct_columns(const PprMatrix& ppr, const std::vector<Index>& nodes);

void save_ppr(const PprMatrix& ppr, const TeleportConfig& cfg, const std::string& path);
PprMatrix load_ppr(const std::string& path, TeleportConfig* cfg_out = nullptr);

}  // namespace gnnrob
