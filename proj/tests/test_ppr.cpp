#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "gnnrob/ppr.hpp"
#include "gnnrob/sbm.hpp"

using namespace gnnrob;

namespace {

Graph sbm_fixture(std::vector<Index> sizes, double p_in, double p_out, std::uint64_t seed) {
    SbmConfig cfg;
    cfg.block_sizes = std::move(sizes);
    cfg.p_in = p_in;
    cfg.p_out = p_out;
    cfg.seed = seed;
    return sbm_generate(cfg);
}

CsrMatrix pair_graph() {
    return CsrMatrix::from_triplets(2, 2, {0, 1}, {1, 0}, {1.0, 1.0});
}

PprMatrix exact_rows(const CsrMatrix& adjacency, double alpha) {
    TeleportConfig cfg;
    cfg.alpha = alpha;
    const Matrix pi = ppr_exact(adjacency, cfg);
    PprMatrix m;
    m.n = adjacency.n_rows;
    m.row_of_node.assign(static_cast<std::size_t>(m.n), -1);
    for (Index i = 0; i < m.n; ++i) {
        SparseRow row;
        for (Index j = 0; j < m.n; ++j)
            if (pi(i, j) != 0.0) row.emplace_back(j, pi(i, j));
        m.row_of_node[static_cast<std::size_t>(i)] = static_cast<Index>(m.rows.size());
        m.rows.push_back(std::move(row));
        m.sources.push_back(i);
    }
    return m;
}

}  // namespace

TEST_CASE("exact ppr worked examples") {
    TeleportConfig cfg;
    SUBCASE("single node with self-loop") {
        const CsrMatrix a = CsrMatrix::from_triplets(1, 1, {0}, {0}, {1.0});
        const Matrix pi = ppr_exact(a, cfg);
        CHECK(pi(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("two-node pair at alpha 0.15") {
        const Matrix pi = ppr_exact(pair_graph(), cfg);
        CHECK(pi(0, 0) == doctest::Approx(0.5405).epsilon(1e-4));
        CHECK(pi(0, 1) == doctest::Approx(0.4595).epsilon(1e-4));
        CHECK(pi(1, 1) == doctest::Approx(0.5405).epsilon(1e-4));
        CHECK(pi(1, 0) == doctest::Approx(0.4595).epsilon(1e-4));
    }
    SUBCASE("rows are stochastic on a random graph") {
        const Graph g = sbm_fixture({25, 25}, 0.3, 0.05, 3);
        const Matrix pi = ppr_exact(g.adjacency, cfg);
        for (Index i = 0; i < g.num_nodes(); ++i) {
            double s = 0.0;
            for (Index j = 0; j < g.num_nodes(); ++j) s += pi(i, j);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("power iteration matches the dense oracle") {
    const Graph g = sbm_fixture({50, 50}, 0.2, 0.02, 11);
    TeleportConfig cfg;
    cfg.k = g.num_nodes();  // no truncation
    cfg.tol = 1e-12;
    std::vector<Index> sources;
    for (Index i = 0; i < g.num_nodes(); ++i) sources.push_back(i);
    const PprMatrix approx = ppr_power_iteration(g, cfg, sources);
    const Matrix pi = ppr_exact(g.adjacency, cfg);
    double max_err = 0.0;
    for (Index i = 0; i < g.num_nodes(); ++i) {
        std::vector<double> dense(static_cast<std::size_t>(g.num_nodes()), 0.0);
        for (const auto& [j, v] : *approx.row_for(i)) dense[static_cast<std::size_t>(j)] = v;
        for (Index j = 0; j < g.num_nodes(); ++j)
            max_err = std::max(max_err, std::abs(dense[static_cast<std::size_t>(j)] - pi(i, j)));
    }
    CHECK(max_err < 1e-8);
}

TEST_CASE("top-k sparsification and source selection") {
    TeleportConfig cfg;
    SUBCASE("k=1 keeps only the diagonal entry of the pair graph") {
        cfg.k = 1;
        const PprMatrix m = ppr_power_iteration(pair_graph(), cfg, {0, 1});
        REQUIRE(m.row_for(0)->size() == 1);
        CHECK(m.row_for(0)->front().first == 0);
        CHECK(m.row_for(0)->front().second == doctest::Approx(0.5405).epsilon(1e-4));
        CHECK(m.row_for(1)->front().first == 1);
    }
    SUBCASE("only requested rows are populated") {
        const Graph g = sbm_fixture({10, 10}, 0.4, 0.05, 5);
        const PprMatrix m = ppr_power_iteration(g, cfg, {3});
        CHECK(m.rows.size() == 1);
        CHECK(m.sources == std::vector<Index>{3});
        CHECK(m.row_for(3) != nullptr);
        CHECK(m.row_for(4) == nullptr);
    }
}

TEST_CASE("gdc preprocessing") {
    TeleportConfig cfg;
    SUBCASE("identity-only graph stays the identity") {
        CsrMatrix eye = CsrMatrix::from_triplets(3, 3, {0, 1, 2}, {0, 1, 2}, {1, 1, 1});
        const CsrMatrix d = gdc_preprocess(eye, cfg);
        CHECK(d.to_dense() == eye.to_dense());
    }
    SUBCASE("top-k bound holds and input symmetry is preserved") {
        const Graph g = sbm_fixture({60, 60}, 0.2, 0.02, 13);
        cfg.k = 16;
        const CsrMatrix d = gdc_preprocess(g, cfg);
        // symmetrized union of per-row top-k patterns
        CHECK(d.nnz() <= 2 * d.n_rows * cfg.k);
        // row-stochastic after normalization
        for (double s : d.row_sums()) CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("expected nonzero columns formula") {
    CHECK(expected_nonzero_columns(100, 10, 1) == doctest::Approx(10.0));
    CHECK(expected_nonzero_columns(100, 10, 5) == doctest::Approx(40.951).epsilon(1e-6));
    double prev = 0.0;
    for (Index b = 1; b <= 30; ++b) {
        const double r = expected_nonzero_columns(100, 10, b);
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("rank-one row update") {
    TeleportConfig cfg;
    SUBCASE("zero weights leave the row unchanged") {
        const Graph g = sbm_fixture({15, 15}, 0.3, 0.05, 17);
        const PprMatrix ppr = exact_rows(g.adjacency, cfg.alpha);
        SparseRow a_i;
        for (Index k = g.adjacency.row_begin(4); k < g.adjacency.row_end(4); ++k)
            a_i.emplace_back(g.adjacency.col_indices[static_cast<std::size_t>(k)],
                             g.adjacency.values[static_cast<std::size_t>(k)]);
        const DegreeVector degs = weighted_degrees(g.adjacency);
        std::vector<UpdateCandidate> cands{{0, 0.0, 1.0}, {20, 0.0, 1.0}};
        const RowUpdateResult upd = ppr_row_rank_one_update(ppr, 4, a_i, degs, cands, cfg.alpha);
        const SparseRow& clean = *ppr.row_for(4);
        REQUIRE(upd.row.size() == clean.size());
        for (std::size_t e = 0; e < clean.size(); ++e) {
            CHECK(upd.row[e].first == clean[e].first);
            CHECK(upd.row[e].second == doctest::Approx(clean[e].second).epsilon(1e-12));
        }
    }
    SUBCASE("full-weight flip matches dense recomputation within 1e-8") {
        const Graph g = sbm_fixture({25, 25}, 0.25, 0.03, 23);
        const Index target = 7;
        const PprMatrix ppr = exact_rows(g.adjacency, cfg.alpha);
        SparseRow a_i;
        for (Index k = g.adjacency.row_begin(target); k < g.adjacency.row_end(target); ++k)
            a_i.emplace_back(g.adjacency.col_indices[static_cast<std::size_t>(k)],
                             g.adjacency.values[static_cast<std::size_t>(k)]);
        const DegreeVector degs = weighted_degrees(g.adjacency);
        const Index col = a_i.front().first;  // remove an existing incoming edge
        std::vector<UpdateCandidate> cands{{col, 1.0, -1.0}};
        const RowUpdateResult upd = ppr_row_rank_one_update(ppr, target, a_i, degs, cands, cfg.alpha);

        std::vector<double> dense = g.adjacency.to_dense();
        dense[static_cast<std::size_t>(target) * g.num_nodes() + col] = 0.0;
        const CsrMatrix pert = CsrMatrix::from_dense(g.num_nodes(), g.num_nodes(), dense);
        const Matrix pi = ppr_exact(pert, cfg);
        std::vector<double> row(static_cast<std::size_t>(g.num_nodes()), 0.0);
        for (const auto& [j, v] : upd.row) row[static_cast<std::size_t>(j)] = v;
        for (Index j = 0; j < g.num_nodes(); ++j)
            CHECK(std::abs(row[static_cast<std::size_t>(j)] - pi(target, j)) < 1e-8);
    }
    SUBCASE("vjp matches finite differences") {
        const Graph g = sbm_fixture({20, 20}, 0.3, 0.04, 29);
        const Index target = 3;
        const PprMatrix ppr = exact_rows(g.adjacency, cfg.alpha);
        SparseRow a_i;
        for (Index k = g.adjacency.row_begin(target); k < g.adjacency.row_end(target); ++k)
            a_i.emplace_back(g.adjacency.col_indices[static_cast<std::size_t>(k)],
                             g.adjacency.values[static_cast<std::size_t>(k)]);
        const DegreeVector degs = weighted_degrees(g.adjacency);
        std::vector<UpdateCandidate> cands{{1, 0.3, 1.0},
                                           {a_i.front().first, 0.4, -1.0},
                                           {35, 0.2, 1.0}};
        const RowUpdateResult upd = ppr_row_rank_one_update(ppr, target, a_i, degs, cands, cfg.alpha);

        // loss = sum of fixed random coefficients times the row entries
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        std::vector<double> coeff(static_cast<std::size_t>(g.num_nodes()));
        for (double& c : coeff) c = unif(rng);
        std::vector<double> gbar(upd.row.size());
        for (std::size_t e = 0; e < upd.row.size(); ++e)
            gbar[e] = coeff[static_cast<std::size_t>(upd.row[e].first)];
        const std::vector<double> grad = upd.vjp(gbar);

        auto loss_at = [&](const std::vector<UpdateCandidate>& c) {
            const RowUpdateResult u = ppr_row_rank_one_update(ppr, target, a_i, degs, c, cfg.alpha);
            double s = 0.0;
            for (const auto& [j, v] : u.row) s += coeff[static_cast<std::size_t>(j)] * v;
            return s;
        };
        const double h = 1e-6;
        for (std::size_t e = 0; e < cands.size(); ++e) {
            auto up = cands, dn = cands;
            up[e].weight += h;
            dn[e].weight -= h;
            const double fd = (loss_at(up) - loss_at(dn)) / (2.0 * h);
            CHECK(grad[e] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
    SUBCASE("touched columns stay below the expected-r bound on average") {
        const Graph g = sbm_fixture({50, 50}, 0.2, 0.05, 31);
        TeleportConfig tc;
        tc.k = 10;
        std::vector<Index> sources;
        for (Index i = 0; i < g.num_nodes(); ++i) sources.push_back(i);
        const PprMatrix ppr = ppr_power_iteration(g, tc, sources);
        std::mt19937_64 rng(77);
        std::uniform_int_distribution<Index> node(0, g.num_nodes() - 1);
        double total = 0.0;
        const int trials = 50;
        for (int t = 0; t < trials; ++t) {
            std::set<Index> picked;
            while (picked.size() < 5) picked.insert(node(rng));
            total += static_cast<double>(
                distinct_columns(ppr, std::vector<Index>(picked.begin(), picked.end())));
        }
        const double expected = expected_nonzero_columns(100, 10, 5);  // 40.95
        CHECK(total / trials <= expected * 1.15);
    }
}

TEST_CASE("ppr matrix serialization round trip") {
    const Graph g = sbm_fixture({20, 20}, 0.3, 0.05, 37);
    TeleportConfig cfg;
    cfg.k = 8;
    std::vector<Index> sources{0, 5, 17};
    const PprMatrix m = ppr_power_iteration(g, cfg, sources);
    const auto path = (std::filesystem::temp_directory_path() / "gnnrob_test_ppr.bin").string();
    save_ppr(m, cfg, path);
    TeleportConfig loaded_cfg;
    const PprMatrix l = load_ppr(path, &loaded_cfg);
    CHECK(l.n == m.n);
    CHECK(l.sources == m.sources);
    CHECK(loaded_cfg.alpha == doctest::Approx(cfg.alpha));
    CHECK(loaded_cfg.k == cfg.k);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        REQUIRE(l.rows[r].size() == m.rows[r].size());
        for (std::size_t e = 0; e < m.rows[r].size(); ++e) {
            CHECK(l.rows[r][e].first == m.rows[r][e].first);
            CHECK(l.rows[r][e].second == doctest::Approx(m.rows[r][e].second));
        }
    }
}
