#include "gnnrob/csr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gnnrob {

double CsrMatrix::at(Index r, Index c) const {
    auto first = col_indices.begin() + row_begin(r);
    auto last = col_indices.begin() + row_end(r);
    auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return 0.0;
    return values[static_cast<std::size_t>(it - col_indices.begin())];
}

CsrMatrix CsrMatrix::from_triplets(Index rows, Index cols,
                                   std::vector<Index> ris, std::vector<Index> cis,
                                   std::vector<double> vals) {
    if (ris.size() != cis.size() || ris.size() != vals.size())
        throw std::invalid_argument("from_triplets: length mismatch");
    const std::size_t n = ris.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ris[a] != ris[b]) return ris[a] < ris[b];
        return cis[a] < cis[b];
    });

    CsrMatrix m(rows, cols);
    m.col_indices.reserve(n);
    m.values.reserve(n);
    Index prev_r = -1, prev_c = -1;
    for (std::size_t k = 0; k < n; ++k) {
        const Index r = ris[order[k]];
        const Index c = cis[order[k]];
        const double v = vals[order[k]];
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw std::out_of_range("from_triplets: index out of bounds");
        if (r == prev_r && c == prev_c) {
            m.values.back() += v;  // duplicates merge by summation
            continue;
        }
        m.col_indices.push_back(c);
        m.values.push_back(v);
        m.row_offsets[static_cast<std::size_t>(r) + 1]++;
        prev_r = r;
        prev_c = c;
    }
    for (std::size_t r = 1; r < m.row_offsets.size(); ++r)
        m.row_offsets[r] += m.row_offsets[r - 1];
    return m;
}

std::vector<double> CsrMatrix::to_dense() const {
    std::vector<double> d(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols), 0.0);
    for (Index r = 0; r < n_rows; ++r)
        for (Index k = row_begin(r); k < row_end(r); ++k)
            d[static_cast<std::size_t>(r) * n_cols + col_indices[static_cast<std::size_t>(k)]] =
                values[static_cast<std::size_t>(k)];
    return d;
}

CsrMatrix CsrMatrix::from_dense(Index rows, Index cols, const std::vector<double>& dense,
                                double drop_below) {
    CsrMatrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            const double v = dense[static_cast<std::size_t>(r) * cols + c];
            if (std::abs(v) > drop_below) {
                m.col_indices.push_back(c);
                m.values.push_back(v);
            }
        }
        m.row_offsets[static_cast<std::size_t>(r) + 1] = static_cast<Index>(m.col_indices.size());
    }
    return m;
}

CsrMatrix CsrMatrix::transposed() const {
    CsrMatrix t(n_cols, n_rows);
    std::vector<Index> counts(static_cast<std::size_t>(n_cols) + 1, 0);
    for (Index c : col_indices) counts[static_cast<std::size_t>(c) + 1]++;
    for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
    t.row_offsets = counts;
    t.col_indices.resize(col_indices.size());
    t.values.resize(values.size());
    std::vector<Index> cursor(counts.begin(), counts.end() - 1);
    for (Index r = 0; r < n_rows; ++r) {
        for (Index k = row_begin(r); k < row_end(r); ++k) {
            const Index c = col_indices[static_cast<std::size_t>(k)];
            const Index pos = cursor[static_cast<std::size_t>(c)]++;
            t.col_indices[static_cast<std::size_t>(pos)] = r;
            t.values[static_cast<std::size_t>(pos)] = values[static_cast<std::size_t>(k)];
        }
    }
    return t;
}

CsrMatrix CsrMatrix::max_symmetrized() const {
    if (n_rows != n_cols) throw std::invalid_argument("max_symmetrized: matrix not square");
    const CsrMatrix t = transposed();
    std::vector<Index> ris, cis;
    std::vector<double> vals;
    ris.reserve(col_indices.size() * 2);
    cis.reserve(col_indices.size() * 2);
    vals.reserve(col_indices.size() * 2);
    for (Index r = 0; r < n_rows; ++r) {
        Index ka = row_begin(r), kb = t.row_begin(r);
        const Index ea = row_end(r), eb = t.row_end(r);
        while (ka < ea || kb < eb) {
            Index ca = ka < ea ? col_indices[static_cast<std::size_t>(ka)] : n_cols;
            Index cb = kb < eb ? t.col_indices[static_cast<std::size_t>(kb)] : n_cols;
            if (ca < cb) {
                ris.push_back(r); cis.push_back(ca);
                vals.push_back(values[static_cast<std::size_t>(ka)]);
                ++ka;
            } else if (cb < ca) {
                ris.push_back(r); cis.push_back(cb);
                vals.push_back(t.values[static_cast<std::size_t>(kb)]);
                ++kb;
            } else {
                ris.push_back(r); cis.push_back(ca);
                vals.push_back(std::max(values[static_cast<std::size_t>(ka)],
                                        t.values[static_cast<std::size_t>(kb)]));
                ++ka; ++kb;
            }
        }
    }
    return from_triplets(n_rows, n_cols, std::move(ris), std::move(cis), std::move(vals));
}

std::vector<double> CsrMatrix::row_sums() const {
    std::vector<double> s(static_cast<std::size_t>(n_rows), 0.0);
    for (Index r = 0; r < n_rows; ++r)
        for (Index k = row_begin(r); k < row_end(r); ++k)
            s[static_cast<std::size_t>(r)] += values[static_cast<std::size_t>(k)];
    return s;
}

bool CsrMatrix::is_symmetric(double tol) const {
    if (n_rows != n_cols) return false;
    for (Index r = 0; r < n_rows; ++r)
        for (Index k = row_begin(r); k < row_end(r); ++k) {
            const Index c = col_indices[static_cast<std::size_t>(k)];
            if (std::abs(values[static_cast<std::size_t>(k)] - at(c, r)) > tol) return false;
        }
    return true;
}

void CsrMatrix::check_invariants() const {
    if (static_cast<Index>(row_offsets.size()) != n_rows + 1)
        throw std::invalid_argument("csr: row_offsets length");
    if (row_offsets.front() != 0 || row_offsets.back() != nnz())
        throw std::invalid_argument("csr: row_offsets range");
    for (Index r = 0; r < n_rows; ++r) {
        if (row_begin(r) > row_end(r)) throw std::invalid_argument("csr: offsets decreasing");
        for (Index k = row_begin(r); k < row_end(r); ++k) {
            const Index c = col_indices[static_cast<std::size_t>(k)];
            if (c < 0 || c >= n_cols) throw std::invalid_argument("csr: column out of range");
            if (k > row_begin(r) && col_indices[static_cast<std::size_t>(k - 1)] >= c)
                throw std::invalid_argument("csr: columns not strictly increasing");
            if (!std::isfinite(values[static_cast<std::size_t>(k)]))
                throw std::invalid_argument("csr: non-finite value");
        }
    }
}

std::size_t CsrMatrix::storage_bytes(std::size_t value_width) const {
    return row_offsets.size() * sizeof(Index) + col_indices.size() * sizeof(Index) +
           values.size() * value_width;
}

void spmv(const CsrMatrix& m, const double* x, double* y) {
    for (Index r = 0; r < m.n_rows; ++r) {
        double acc = 0.0;
        for (Index k = m.row_begin(r); k < m.row_end(r); ++k)
            acc += m.values[static_cast<std::size_t>(k)] * x[m.col_indices[static_cast<std::size_t>(k)]];
        y[r] = acc;
    }
}

void spmm(const CsrMatrix& m, const double* x, Index cols, double* y) {
    for (Index r = 0; r < m.n_rows; ++r) {
        double* out = y + static_cast<std::size_t>(r) * cols;
        std::fill(out, out + cols, 0.0);
        for (Index k = m.row_begin(r); k < m.row_end(r); ++k) {
            const double v = m.values[static_cast<std::size_t>(k)];
            const double* in = x + static_cast<std::size_t>(m.col_indices[static_cast<std::size_t>(k)]) * cols;
            for (Index c = 0; c < cols; ++c) out[c] += v * in[c];
        }
    }
}

}  // namespace gnnrob
