#include "gnnrob/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace gnnrob {

Index Graph::num_classes() const {
    Index c = 0;
    for (Index y : labels) c = std::max(c, y + 1);
    return c;
}

Index Graph::num_edges() const {
    return directed ? adjacency.nnz() : adjacency.nnz() / 2;
}

void Graph::check_invariants() const {
    adjacency.check_invariants();
    if (adjacency.n_rows != adjacency.n_cols)
        throw std::invalid_argument("graph: adjacency not square");
    if (!directed && !adjacency.is_symmetric(0.0))
        throw std::invalid_argument("graph: undirected adjacency not symmetric");
    if (static_cast<Index>(labels.size()) != num_nodes())
        throw std::invalid_argument("graph: labels length");
    const Index c = num_classes();
    for (Index y : labels)
        if (y < 0 || y >= c) throw std::invalid_argument("graph: label out of range");
    std::set<Index> seen;
    for (const auto* part : {&splits.train, &splits.valid, &splits.test})
        for (Index i : *part) {
            if (i < 0 || i >= num_nodes()) throw std::invalid_argument("graph: split index out of range");
            if (!seen.insert(i).second) throw std::invalid_argument("graph: splits overlap");
        }
}

std::pair<std::size_t, std::size_t> Graph::adjacency_bytes() const {
    return {adjacency.storage_bytes(4), adjacency.storage_bytes(8)};
}

DegreeVector weighted_degrees(const CsrMatrix& adjacency) {
    return DegreeVector{adjacency.row_sums()};
}

CsrMatrix gcn_normalize(const CsrMatrix& adjacency) {
    if (adjacency.n_rows != adjacency.n_cols)
        throw std::invalid_argument("gcn_normalize: matrix not square");
    const Index n = adjacency.n_rows;
    // degrees of A + I
    std::vector<double> deg = adjacency.row_sums();
    for (auto& d : deg) d += 1.0;

    std::vector<Index> ris, cis;
    std::vector<double> vals;
    ris.reserve(adjacency.col_indices.size() + static_cast<std::size_t>(n));
    cis.reserve(ris.capacity());
    vals.reserve(ris.capacity());
    for (Index r = 0; r < n; ++r) {
        const double dr = deg[static_cast<std::size_t>(r)];
        bool self_seen = false;
        for (Index k = adjacency.row_begin(r); k < adjacency.row_end(r); ++k) {
            const Index c = adjacency.col_indices[static_cast<std::size_t>(k)];
            double v = adjacency.values[static_cast<std::size_t>(k)];
            if (c == r) { v += 1.0; self_seen = true; }
            ris.push_back(r);
            cis.push_back(c);
            vals.push_back(v / std::sqrt(dr * deg[static_cast<std::size_t>(c)]));
        }
        if (!self_seen) {
            ris.push_back(r);
            cis.push_back(r);
            vals.push_back(1.0 / dr);
        }
    }
    return CsrMatrix::from_triplets(n, n, std::move(ris), std::move(cis), std::move(vals));
}

CsrMatrix gcn_normalize(const Graph& g) { return gcn_normalize(g.adjacency); }

CsrMatrix row_normalize(const CsrMatrix& m) {
    CsrMatrix out = m;
    for (Index r = 0; r < m.n_rows; ++r) {
        double s = 0.0;
        for (Index k = m.row_begin(r); k < m.row_end(r); ++k)
            s += m.values[static_cast<std::size_t>(k)];
        if (m.row_begin(r) == m.row_end(r)) continue;
        if (s <= 0.0) throw std::invalid_argument("row_normalize: nonpositive row sum");
        for (Index k = m.row_begin(r); k < m.row_end(r); ++k)
            out.values[static_cast<std::size_t>(k)] /= s;
    }
    return out;
}

double accuracy(const std::vector<Index>& predictions, const std::vector<Index>& labels,
                const std::vector<Index>& mask) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: length mismatch");
    if (mask.empty()) throw std::invalid_argument("accuracy: empty mask");
    Index hit = 0;
    for (Index i : mask)
        if (predictions[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(mask.size());
}

Graph largest_connected_component(const Graph& g, std::vector<Index>* kept_nodes) {
    const Index n = g.num_nodes();
    std::vector<Index> comp(static_cast<std::size_t>(n), -1);
    const CsrMatrix rev = g.directed ? g.adjacency.transposed() : CsrMatrix{};
    Index n_comp = 0;
    std::vector<Index> stack;
    for (Index s = 0; s < n; ++s) {
        if (comp[static_cast<std::size_t>(s)] >= 0) continue;
        stack.push_back(s);
        comp[static_cast<std::size_t>(s)] = n_comp;
        while (!stack.empty()) {
            const Index u = stack.back();
            stack.pop_back();
            auto visit = [&](const CsrMatrix& m) {
                for (Index k = m.row_begin(u); k < m.row_end(u); ++k) {
                    const Index v = m.col_indices[static_cast<std::size_t>(k)];
                    if (comp[static_cast<std::size_t>(v)] < 0) {
                        comp[static_cast<std::size_t>(v)] = n_comp;
                        stack.push_back(v);
                    }
                }
            };
            visit(g.adjacency);
            if (g.directed) visit(rev);
        }
        ++n_comp;
    }
    std::vector<Index> sizes(static_cast<std::size_t>(n_comp), 0);
    for (Index i = 0; i < n; ++i) sizes[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])]++;
    const Index best = static_cast<Index>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

    std::vector<Index> old_to_new(static_cast<std::size_t>(n), -1);
    std::vector<Index> kept;
    for (Index i = 0; i < n; ++i)
        if (comp[static_cast<std::size_t>(i)] == best) {
            old_to_new[static_cast<std::size_t>(i)] = static_cast<Index>(kept.size());
            kept.push_back(i);
        }

    Graph out;
    out.directed = g.directed;
    const Index nn = static_cast<Index>(kept.size());
    std::vector<Index> ris, cis;
    std::vector<double> vals;
    for (Index i = 0; i < n; ++i) {
        if (old_to_new[static_cast<std::size_t>(i)] < 0) continue;
        for (Index k = g.adjacency.row_begin(i); k < g.adjacency.row_end(i); ++k) {
            const Index j = g.adjacency.col_indices[static_cast<std::size_t>(k)];
            if (old_to_new[static_cast<std::size_t>(j)] < 0) continue;
            ris.push_back(old_to_new[static_cast<std::size_t>(i)]);
            cis.push_back(old_to_new[static_cast<std::size_t>(j)]);
            vals.push_back(g.adjacency.values[static_cast<std::size_t>(k)]);
        }
    }
    out.adjacency = CsrMatrix::from_triplets(nn, nn, std::move(ris), std::move(cis), std::move(vals));
    out.features = Matrix(nn, g.features.cols);
    out.labels.resize(static_cast<std::size_t>(nn));
    for (Index i = 0; i < nn; ++i) {
        const Index o = kept[static_cast<std::size_t>(i)];
        std::copy(g.features.row(o), g.features.row(o) + g.features.cols, out.features.row(i));
        out.labels[static_cast<std::size_t>(i)] = g.labels[static_cast<std::size_t>(o)];
    }
    auto remap = [&](const std::vector<Index>& part) {
        std::vector<Index> r;
        for (Index i : part)
            if (old_to_new[static_cast<std::size_t>(i)] >= 0)
                r.push_back(old_to_new[static_cast<std::size_t>(i)]);
        return r;
    };
    out.splits = {remap(g.splits.train), remap(g.splits.valid), remap(g.splits.test)};
    if (kept_nodes) *kept_nodes = kept;
    return out;
}

Splits sample_splits(const std::vector<Index>& labels, Index per_class, std::uint64_t seed) {
    Index c = 0;
    for (Index y : labels) c = std::max(c, y + 1);
    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));

    std::mt19937_64 rng(seed);
    Splits s;
    std::vector<bool> used(labels.size(), false);
    for (auto& nodes : by_class) {
        std::shuffle(nodes.begin(), nodes.end(), rng);
        if (static_cast<Index>(nodes.size()) < 2 * per_class)
            throw std::invalid_argument("sample_splits: class too small for requested split");
        for (Index k = 0; k < per_class; ++k) {
            s.train.push_back(nodes[static_cast<std::size_t>(k)]);
            used[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])] = true;
        }
        for (Index k = per_class; k < 2 * per_class; ++k) {
            s.valid.push_back(nodes[static_cast<std::size_t>(k)]);
            used[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])] = true;
        }
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!used[i]) s.test.push_back(static_cast<Index>(i));
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.valid.begin(), s.valid.end());
    return s;
}

}  // namespace gnnrob
