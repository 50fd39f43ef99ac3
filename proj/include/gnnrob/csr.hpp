#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gnnrob {

using Index = std::int64_t;

/// Sparse matrix in compressed sparse row format. Rows keep their column
/// indices strictly increasing; duplicate entries are merged at build time.
struct CsrMatrix {
    Index n_rows = 0;
    Index n_cols = 0;
    std::vector<Index> row_offsets;  // length n_rows + 1
    std::vector<Index> col_indices;
    std::vector<double> values;

    CsrMatrix() = default;
    CsrMatrix(Index rows, Index cols)
        : n_rows(rows), n_cols(cols), row_offsets(static_cast<std::size_t>(rows) + 1, 0) {}

    Index nnz() const { return static_cast<Index>(col_indices.size()); }

    Index row_begin(Index r) const { return row_offsets[static_cast<std::size_t>(r)]; }
    Index row_end(Index r) const { return row_offsets[static_cast<std::size_t>(r) + 1]; }

    /// Entry lookup by binary search within the row; 0.0 if absent.
    double at(Index r, Index c) const;

    /// Builds a CSR matrix from possibly unsorted triplets. Duplicates are
    /// merged by summing their values.
    static CsrMatrix from_triplets(Index rows, Index cols,
                                   std::vector<Index> ris, std::vector<Index> cis,
                                   std::vector<double> vals);

    std::vector<double> to_dense() const;  // row-major n_rows x n_cols
    static CsrMatrix from_dense(Index rows, Index cols, const std::vector<double>& dense,
                                double drop_below = 0.0);

    CsrMatrix transposed() const;

    /// Element-wise max(M, M^T); requires a square matrix.
    CsrMatrix max_symmetrized() const;

    std::vector<double> row_sums() const;

    bool is_symmetric(double tol = 0.0) const;

    /// Validates the structural invariants (sorted rows, bounds, finite
    /// values); throws std::invalid_argument on violation.
    void check_invariants() const;

    /// Storage footprint in bytes at the given floating-point width.
    std::size_t storage_bytes(std::size_t value_width) const;
};

/// y = M x
void spmv(const CsrMatrix& m, const double* x, double* y);

/// Y = M X for a dense row-major X with `cols` columns.
void spmm(const CsrMatrix& m, const double* x, Index cols, double* y);

}  // namespace gnnrob
