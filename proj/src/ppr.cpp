#include "gnnrob/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace gnnrob {

void TeleportConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ppr: alpha must be in (0,1)");
    if (k < 1) throw std::invalid_argument("ppr: k must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("ppr: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("ppr: max_iter must be >= 1");
}

namespace {

/// Row-stochastic transition matrix D^{-1} A with a self-loop added to every
/// dangling (zero out-degree) node.
CsrMatrix transition_matrix(const CsrMatrix& adjacency) {
    CsrMatrix p = adjacency;
    std::vector<Index> dangling;
    for (Index r = 0; r < p.n_rows; ++r)
        if (p.row_begin(r) == p.row_end(r)) dangling.push_back(r);
    if (!dangling.empty()) {
        std::vector<Index> ris(p.col_indices.size()), cis = p.col_indices;
        std::vector<double> vals = p.values;
        for (Index r = 0; r < p.n_rows; ++r)
            for (Index k = p.row_begin(r); k < p.row_end(r); ++k)
                ris[static_cast<std::size_t>(k)] = r;
        for (Index r : dangling) {
            ris.push_back(r);
            cis.push_back(r);
            vals.push_back(1.0);
        }
        p = CsrMatrix::from_triplets(p.n_rows, p.n_cols, std::move(ris), std::move(cis), std::move(vals));
    }
    return row_normalize(p);
}

SparseRow top_k_sparsify(const std::vector<double>& dense, Index k, bool renormalize) {
    std::vector<Index> idx;
    for (std::size_t i = 0; i < dense.size(); ++i)
        if (dense[i] != 0.0) idx.push_back(static_cast<Index>(i));
    if (static_cast<Index>(idx.size()) > k) {
        std::nth_element(idx.begin(), idx.begin() + static_cast<std::size_t>(k), idx.end(),
                         [&](Index a, Index b) {
                             if (dense[static_cast<std::size_t>(a)] != dense[static_cast<std::size_t>(b)])
                                 return dense[static_cast<std::size_t>(a)] > dense[static_cast<std::size_t>(b)];
                             return a < b;
                         });
        idx.resize(static_cast<std::size_t>(k));
    }
    std::sort(idx.begin(), idx.end());
    SparseRow row;
    row.reserve(idx.size());
    double sum = 0.0;
    for (Index i : idx) {
        row.emplace_back(i, dense[static_cast<std::size_t>(i)]);
        sum += dense[static_cast<std::size_t>(i)];
    }
    if (renormalize && sum > 0.0)
        for (auto& [i, v] : row) v /= sum;
    return row;
}

}  // namespace

Matrix ppr_exact(const CsrMatrix& adjacency, const TeleportConfig& cfg) {
    cfg.validate();
    if (adjacency.n_rows > 2000)
        throw std::invalid_argument("ppr_exact: dense oracle limited to n <= 2000");
    const Index n = adjacency.n_rows;
    const CsrMatrix p = transition_matrix(adjacency);
    // Solve (I - (1-alpha) P)^T X^T = alpha I, i.e. compute rows of
    // alpha (I - (1-alpha) P)^{-1} via one LU factorization.
    Matrix sys(n, n);
    const std::vector<double> pd = p.to_dense();
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            sys(i, j) = (i == j ? 1.0 : 0.0) - (1.0 - cfg.alpha) * pd[static_cast<std::size_t>(i) * n + j];
    Matrix rhs(n, n);
    for (Index i = 0; i < n; ++i) rhs(i, i) = cfg.alpha;
    Matrix inv = lu_solve(std::move(sys), std::move(rhs));
    // inv = alpha (I - (1-alpha)P)^{-1}; its rows are the PPR rows already
    return inv;
}

Matrix ppr_exact(const Graph& g, const TeleportConfig& cfg) { return ppr_exact(g.adjacency, cfg); }

PprMatrix ppr_power_iteration(const CsrMatrix& adjacency, const TeleportConfig& cfg,
                              const std::vector<Index>& sources, bool renormalize) {
    cfg.validate();
    const Index n = adjacency.n_rows;
    const CsrMatrix p = transition_matrix(adjacency);

    PprMatrix out;
    out.n = n;
    out.row_of_node.assign(static_cast<std::size_t>(n), -1);
    out.rows.resize(sources.size());
    out.sources = sources;

    std::vector<double> x(static_cast<std::size_t>(n)), nx(static_cast<std::size_t>(n));
    for (std::size_t si = 0; si < sources.size(); ++si) {
        const Index s = sources[si];
        if (s < 0 || s >= n) throw std::invalid_argument("ppr: source out of range");
        std::fill(x.begin(), x.end(), 0.0);
        x[static_cast<std::size_t>(s)] = 1.0;
        double residual = 1.0;
        for (Index it = 0; it < cfg.max_iter; ++it) {
            // nx = alpha e_s + (1 - alpha) x P
            std::fill(nx.begin(), nx.end(), 0.0);
            for (Index u = 0; u < n; ++u) {
                const double xv = x[static_cast<std::size_t>(u)];
                if (xv == 0.0) continue;
                const double scaled = (1.0 - cfg.alpha) * xv;
                for (Index k = p.row_begin(u); k < p.row_end(u); ++k)
                    nx[static_cast<std::size_t>(p.col_indices[static_cast<std::size_t>(k)])] +=
                        scaled * p.values[static_cast<std::size_t>(k)];
            }
            nx[static_cast<std::size_t>(s)] += cfg.alpha;
            residual = 0.0;
            for (Index u = 0; u < n; ++u)
                residual += std::abs(nx[static_cast<std::size_t>(u)] - x[static_cast<std::size_t>(u)]);
            x.swap(nx);
            if (residual < cfg.tol) break;
        }
        if (residual >= cfg.tol)
            throw std::runtime_error("ppr: power iteration did not converge, residual " +
                                     std::to_string(residual));
        out.rows[si] = top_k_sparsify(x, cfg.k, renormalize);
        out.row_of_node[static_cast<std::size_t>(s)] = static_cast<Index>(si);
    }
    return out;
}

PprMatrix ppr_power_iteration(const Graph& g, const TeleportConfig& cfg,
                              const std::vector<Index>& sources, bool renormalize) {
    return ppr_power_iteration(g.adjacency, cfg, sources, renormalize);
}

double expected_nonzero_columns(Index n, Index k, Index b) {
    if (!(k >= 1 && k <= n && b >= 1)) throw std::invalid_argument("expected_nonzero_columns: bad args");
    if (k == n) return static_cast<double>(n);
    // n (1 - (1 - k/n)^b), via log1p/expm1 for large b
    const double log_miss = static_cast<double>(b) *
                            std::log1p(-static_cast<double>(k) / static_cast<double>(n));
    return -static_cast<double>(n) * std::expm1(log_miss);
}

CsrMatrix gdc_preprocess(const CsrMatrix& adjacency, const TeleportConfig& cfg) {
    const Index n = adjacency.n_rows;
    std::vector<Index> all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    const PprMatrix ppr = ppr_power_iteration(adjacency, cfg, all);
    std::vector<Index> ris, cis;
    std::vector<double> vals;
    for (std::size_t si = 0; si < ppr.rows.size(); ++si)
        for (const auto& [c, v] : ppr.rows[si]) {
            ris.push_back(ppr.sources[si]);
            cis.push_back(c);
            vals.push_back(v);
        }
    CsrMatrix m = CsrMatrix::from_triplets(n, n, std::move(ris), std::move(cis), std::move(vals));
    return row_normalize(m.max_symmetrized());
}

CsrMatrix gdc_preprocess(const Graph& g, const TeleportConfig& cfg) {
    return gdc_preprocess(g.adjacency, cfg);
}

RowUpdateResult ppr_row_rank_one_update(const PprMatrix& ppr, Index target, const SparseRow& a_i,
                                        const DegreeVector& degs,
                                        const std::vector<UpdateCandidate>& candidates,
                                        double alpha) {
    const double d_ii = degs.degrees[static_cast<std::size_t>(target)];
    if (d_ii <= 0.0) throw std::invalid_argument("ppr update: target has zero degree");

    // Perturbed unnormalized row r = a_i (+/-) candidate weights.
    std::map<Index, double> r(a_i.begin(), a_i.end());
    std::vector<double> signs;
    signs.reserve(candidates.size());
    for (const auto& c : candidates) {
        r[c.col] += c.sign * c.weight;
        signs.push_back(c.sign);
    }
    double row_sum = 0.0;
    for (const auto& [c, v] : r) row_sum += v;
    if (row_sum <= 0.0) throw std::invalid_argument("ppr update: perturbed row sum nonpositive");

    // v = -(1-alpha) [ r / sum(r) - a_i / D_ii ]; support is the union of the
    // old neighbors and the candidates.
    std::map<Index, double> a_map(a_i.begin(), a_i.end());
    std::vector<std::pair<Index, double>> v_eff;
    for (const auto& [c, rv] : r) {
        const double av = a_map.count(c) ? a_map[c] : 0.0;
        const double vn = rv / row_sum - av / d_ii;
        v_eff.emplace_back(c, -(1.0 - alpha) * vn);
    }

    // Gather the Pi' rows the update touches (Pi' = Pi / alpha).
    std::vector<const SparseRow*> support_rows(v_eff.size());
    for (std::size_t t = 0; t < v_eff.size(); ++t) {
        support_rows[t] = ppr.row_for(v_eff[t].first);
        if (!support_rows[t])
            throw std::invalid_argument("ppr update: missing PPR row for node " +
                                        std::to_string(v_eff[t].first));
    }
    const SparseRow* target_row = ppr.row_for(target);
    if (!target_row) throw std::invalid_argument("ppr update: missing PPR row for target");

    // q = v Pi' accumulated sparsely over touched columns.
    std::map<Index, double> q;
    for (std::size_t t = 0; t < v_eff.size(); ++t) {
        const double vt = v_eff[t].second;
        if (vt == 0.0) continue;
        for (const auto& [col, pv] : *support_rows[t]) q[col] += vt * pv / alpha;
    }
    double s = q.count(target) ? q[target] : 0.0;
    const double denom = 1.0 + s;
    if (std::abs(denom) < 1e-12)
        throw std::runtime_error("ppr update: singular denominator");

    double pii = 0.0;
    for (const auto& [col, pv] : *target_row)
        if (col == target) { pii = pv / alpha; break; }
    const double beta = alpha * pii / denom;

    // Result support: target row union q columns.
    std::map<Index, double> result;
    for (const auto& [col, pv] : *target_row) result[col] = alpha * (pv / alpha);
    for (const auto& [col, qv] : q) result[col] -= beta * qv;

    RowUpdateResult out;
    out.denominator = denom;
    out.row.assign(result.begin(), result.end());

    // Capture everything the reverse pass needs by value.
    std::vector<Index> support_cols(v_eff.size());
    std::vector<double> v_weights(v_eff.size());
    std::vector<SparseRow> rows_copy(v_eff.size());
    std::vector<double> r_support(v_eff.size());
    for (std::size_t t = 0; t < v_eff.size(); ++t) {
        support_cols[t] = v_eff[t].first;
        v_weights[t] = v_eff[t].second;
        rows_copy[t] = *support_rows[t];
        r_support[t] = r[v_eff[t].first];
    }
    std::vector<Index> cand_cols(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) cand_cols[j] = candidates[j].col;
    std::vector<Index> result_cols;
    result_cols.reserve(out.row.size());
    for (const auto& [c, v] : out.row) result_cols.push_back(c);
    std::vector<double> q_on_result(out.row.size(), 0.0);
    for (std::size_t u = 0; u < result_cols.size(); ++u) {
        auto it = q.find(result_cols[u]);
        if (it != q.end()) q_on_result[u] = it->second;
    }

    out.vjp = [=](const std::vector<double>& gbar) -> std::vector<double> {
        if (gbar.size() != result_cols.size())
            throw std::invalid_argument("ppr update vjp: gradient length mismatch");
        // dL/dq[u] = -beta gbar[u]; dL/ds = (beta / denom) (gbar . q)
        double g_dot_q = 0.0;
        for (std::size_t u = 0; u < gbar.size(); ++u) g_dot_q += gbar[u] * q_on_result[u];
        const double dl_ds = beta / denom * g_dot_q;

        // dL/dv[t] = sum_u dL/dq[u] Pi'_{t,u} + dL/ds Pi'_{t,target}
        std::vector<double> g_v(support_cols.size(), 0.0);
        for (std::size_t t = 0; t < support_cols.size(); ++t) {
            const SparseRow& row = rows_copy[t];
            double dot = 0.0, at_target = 0.0;
            std::size_t u = 0;
            for (const auto& [col, pv] : row) {
                while (u < result_cols.size() && result_cols[u] < col) ++u;
                const double piv = pv / alpha;
                if (u < result_cols.size() && result_cols[u] == col) dot += gbar[u] * piv;
                if (col == target) at_target = piv;
            }
            g_v[t] = -beta * dot + dl_ds * at_target;
        }

        // chain into the candidate weights through v and the row sum
        double g_v_dot_r = 0.0;
        for (std::size_t t = 0; t < support_cols.size(); ++t) g_v_dot_r += g_v[t] * r_support[t];
        std::vector<double> grad(cand_cols.size(), 0.0);
        for (std::size_t j = 0; j < cand_cols.size(); ++j) {
            // locate candidate position in the support (binary search: support_cols sorted)
            auto it = std::lower_bound(support_cols.begin(), support_cols.end(), cand_cols[j]);
            const std::size_t t = static_cast<std::size_t>(it - support_cols.begin());
            const double g_vj = (it != support_cols.end() && *it == cand_cols[j]) ? g_v[t] : 0.0;
            grad[j] = -(1.0 - alpha) * signs[j] * (g_vj / row_sum - g_v_dot_r / (row_sum * row_sum));
        }
        return grad;
    };
    return out;
}

Index distinct_columns(const PprMatrix& ppr, const std::vector<Index>& nodes) {
    std::vector<Index> cols;
    for (Index node : nodes) {
        const SparseRow* row = ppr.row_for(node);
        if (!row) continue;
        for (const auto& [c, v] : *row) cols.push_back(c);
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return static_cast<Index>(cols.size());
}

void save_ppr(const PprMatrix& ppr, const TeleportConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& row : ppr.rows) {
        const std::uint64_t count = row.size();
        out.write(reinterpret_cast<const char*>(&count), 8);
        for (const auto& [c, v] : row) {
            const std::uint32_t idx = static_cast<std::uint32_t>(c);
            out.write(reinterpret_cast<const char*>(&idx), 4);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    }
    nlohmann::json side{{"alpha", cfg.alpha}, {"k", cfg.k}, {"tol", cfg.tol},
                        {"n", ppr.n}, {"sources", ppr.sources}};
    std::ofstream js(path + ".json");
    js << side.dump(2) << '\n';
}

PprMatrix load_ppr(const std::string& path, TeleportConfig* cfg_out) {
    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("cannot open " + path + ".json");
    nlohmann::json side;
    js >> side;
    PprMatrix ppr;
    ppr.n = side.at("n").get<Index>();
    for (auto v : side.at("sources")) ppr.sources.push_back(v.get<Index>());
    if (cfg_out) {
        cfg_out->alpha = side.at("alpha").get<double>();
        cfg_out->k = side.at("k").get<Index>();
        cfg_out->tol = side.at("tol").get<double>();
    }
    ppr.row_of_node.assign(static_cast<std::size_t>(ppr.n), -1);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    for (std::size_t si = 0; si < ppr.sources.size(); ++si) {
        std::uint64_t count = 0;
        in.read(reinterpret_cast<char*>(&count), 8);
        if (!in) throw std::runtime_error(path + ": truncated ppr payload");
        SparseRow row(count);
        for (auto& [c, v] : row) {
            std::uint32_t idx = 0;
            in.read(reinterpret_cast<char*>(&idx), 4);
            in.read(reinterpret_cast<char*>(&v), 8);
            c = static_cast<Index>(idx);
        }
        ppr.rows.push_back(std::move(row));
        ppr.row_of_node[static_cast<std::size_t>(ppr.sources[si])] = static_cast<Index>(si);
    }
    return ppr;
}

}  // namespace gnnrob
