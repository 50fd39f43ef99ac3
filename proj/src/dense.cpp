#include "gnnrob/dense.hpp"

#include <cmath>
#include <stdexcept>

namespace gnnrob {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
    Matrix c(a.rows, b.cols);
    for (Index i = 0; i < a.rows; ++i) {
        for (Index k = 0; k < a.cols; ++k) {
            const double av = a(i, k);
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            double* crow = c.row(i);
            for (Index j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Matrix matmul_transposed_a(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_transposed_a: shape mismatch");
    Matrix c(a.cols, b.cols);
    for (Index k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (Index i = 0; i < a.cols; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c.row(i);
            for (Index j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Matrix matmul_transposed_b(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_transposed_b: shape mismatch");
    Matrix c(a.rows, b.rows);
    for (Index i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (Index j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (Index k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix lu_solve(Matrix a, Matrix b) {
    if (a.rows != a.cols || a.rows != b.rows) throw std::invalid_argument("lu_solve: shape mismatch");
    const Index n = a.rows;
    for (Index col = 0; col < n; ++col) {
        Index pivot = col;
        double best = std::abs(a(col, col));
        for (Index r = col + 1; r < n; ++r) {
            const double v = std::abs(a(r, col));
            if (v > best) { best = v; pivot = r; }
        }
        if (best < 1e-300) throw std::runtime_error("lu_solve: singular system");
        if (pivot != col) {
            for (Index c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
            for (Index c = 0; c < b.cols; ++c) std::swap(b(col, c), b(pivot, c));
        }
        const double inv = 1.0 / a(col, col);
        for (Index r = col + 1; r < n; ++r) {
            const double f = a(r, col) * inv;
            if (f == 0.0) continue;
            a(r, col) = 0.0;
            for (Index c = col + 1; c < n; ++c) a(r, c) -= f * a(col, c);
            for (Index c = 0; c < b.cols; ++c) b(r, c) -= f * b(col, c);
        }
    }
    for (Index col = n - 1; col >= 0; --col) {
        const double inv = 1.0 / a(col, col);
        for (Index c = 0; c < b.cols; ++c) b(col, c) *= inv;
        for (Index r = 0; r < col; ++r) {
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (Index c = 0; c < b.cols; ++c) b(r, c) -= f * b(col, c);
        }
    }
    return b;
}

}  // namespace gnnrob
