#pragma once

#include <cstddef>
#include <vector>

#include "gnnrob/csr.hpp"

namespace gnnrob {

/// Row-major dense matrix of doubles. Only what the models and the dense PPR
/// oracle need; not a general linear algebra library.
struct Matrix {
    Index rows = 0;
    Index cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(Index r, Index c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(Index r, Index c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(Index r, Index c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    double* row(Index r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(Index r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_transposed_a(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_transposed_b(const Matrix& a, const Matrix& b);  // a b^T

/// Solves A X = B in place via LU with partial pivoting; returns X.
/// Throws std::runtime_error on a (numerically) singular system.
Matrix lu_solve(Matrix a, Matrix b);

}  // namespace gnnrob
