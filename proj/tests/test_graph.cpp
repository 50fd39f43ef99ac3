#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gnnrob/graph.hpp"
#include "gnnrob/graph_io.hpp"
#include "gnnrob/sbm.hpp"

using namespace gnnrob;
namespace fs = std::filesystem;

namespace {

fs::path make_tmpdir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("gnnrob_test_" + tag);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

CsrMatrix undirected_edges(Index n, std::vector<std::pair<Index, Index>> edges) {
    std::vector<Index> ris, cis;
    std::vector<double> vals;
    for (auto [i, j] : edges) {
        ris.push_back(i);
        cis.push_back(j);
        vals.push_back(1.0);
        ris.push_back(j);
        cis.push_back(i);
        vals.push_back(1.0);
    }
    return CsrMatrix::from_triplets(n, n, std::move(ris), std::move(cis), std::move(vals));
}

}  // namespace

TEST_CASE("csr from_triplets merges duplicates by summation") {
    CsrMatrix m = CsrMatrix::from_triplets(2, 2, {0, 0}, {1, 1}, {1.0, 1.0});
    CHECK(m.nnz() == 1);
    CHECK(m.at(0, 1) == doctest::Approx(2.0));
    m.check_invariants();
}

TEST_CASE("csr dense round trip, transpose, max-symmetrization") {
    const std::vector<double> dense{0, 2, 0, 1, 0, 3, 0, 0, 0};
    CsrMatrix m = CsrMatrix::from_dense(3, 3, dense);
    CHECK(m.to_dense() == dense);
    CHECK(m.transposed().at(1, 0) == doctest::Approx(2.0));
    const CsrMatrix sym = m.max_symmetrized();
    CHECK(sym.is_symmetric());
    CHECK(sym.at(0, 1) == doctest::Approx(2.0));
    CHECK(sym.at(1, 0) == doctest::Approx(2.0));
    CHECK(sym.at(1, 2) == doctest::Approx(3.0));
}

TEST_CASE("graph loader: undirected mirroring and duplicate merge") {
    const fs::path dir = make_tmpdir("loader");
    write_file(dir / "edges.txt", "0 1\n1 0\n");
    write_file(dir / "features.csv", "1.0,0.0\n0.0,1.0\n");
    write_file(dir / "labels.txt", "0\n1\n");
    const Graph g = load_graph((dir / "edges.txt").string(), (dir / "features.csv").string(),
                               (dir / "labels.txt").string());
    CHECK(g.num_nodes() == 2);
    CHECK(g.adjacency.nnz() == 2);
    CHECK(g.adjacency.is_symmetric());
    CHECK(g.num_edges() == 1);

    const fs::path dir2 = make_tmpdir("loader_dup");
    write_file(dir2 / "edges.txt", "0 1\n0 1\n");
    write_file(dir2 / "features.csv", "1.0\n2.0\n");
    write_file(dir2 / "labels.txt", "0\n1\n");
    LoadOptions opts;
    opts.directed = true;
    const Graph d = load_graph((dir2 / "edges.txt").string(), (dir2 / "features.csv").string(),
                               (dir2 / "labels.txt").string(), opts);
    CHECK(d.adjacency.nnz() == 1);
    CHECK(d.adjacency.at(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("graph save/load round trip with splits") {
    SbmConfig cfg;
    cfg.block_sizes = {10, 10};
    cfg.p_in = 0.5;
    cfg.p_out = 0.05;
    cfg.seed = 7;
    Graph g = sbm_generate(cfg);
    g.splits = sample_splits(g.labels, 3, 1);
    const fs::path dir = make_tmpdir("roundtrip");
    save_graph(g, (dir / "e.txt").string(), (dir / "f.csv").string(), (dir / "l.txt").string());
    save_splits(g.splits, (dir / "s.json").string());
    LoadOptions opts;
    opts.split_path = (dir / "s.json").string();
    const Graph h = load_graph((dir / "e.txt").string(), (dir / "f.csv").string(),
                               (dir / "l.txt").string(), opts);
    CHECK(h.num_nodes() == g.num_nodes());
    CHECK(h.adjacency.to_dense() == g.adjacency.to_dense());
    CHECK(h.labels == g.labels);
    CHECK(h.splits.train == g.splits.train);
    CHECK(h.splits.test == g.splits.test);
    for (Index i = 0; i < g.num_nodes(); ++i)
        for (Index c = 0; c < g.num_feature_dims(); ++c)
            CHECK(h.features(i, c) == doctest::Approx(g.features(i, c)).epsilon(1e-6));
}

TEST_CASE("gcn normalization worked examples") {
    SUBCASE("single node, no edges") {
        const CsrMatrix a(1, 1);
        const CsrMatrix n = gcn_normalize(a);
        CHECK(n.nnz() == 1);
        CHECK(n.at(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("two nodes, one undirected edge: all entries 0.5") {
        const CsrMatrix n = gcn_normalize(undirected_edges(2, {{0, 1}}));
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j) CHECK(n.at(i, j) == doctest::Approx(0.5));
    }
    SUBCASE("3-node path: corner entries 1/sqrt(6)") {
        const CsrMatrix n = gcn_normalize(undirected_edges(3, {{0, 1}, {1, 2}}));
        CHECK(n.at(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
        CHECK(n.at(1, 0) == doctest::Approx(1.0 / std::sqrt(6.0)));
        CHECK(n.at(2, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
        CHECK(n.at(0, 0) == doctest::Approx(0.5));
        CHECK(n.at(1, 1) == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("row normalization worked examples") {
    CHECK(row_normalize(CsrMatrix::from_dense(1, 2, {2, 2})).to_dense() ==
          std::vector<double>{0.5, 0.5});
    const CsrMatrix eye = CsrMatrix::from_dense(2, 2, {1, 0, 0, 1});
    CHECK(row_normalize(eye).to_dense() == eye.to_dense());
    CHECK(row_normalize(CsrMatrix::from_dense(2, 2, {1, 3, 0, 5})).to_dense() ==
          std::vector<double>{0.25, 0.75, 0.0, 1.0});
}

TEST_CASE("accuracy worked examples") {
    const std::vector<Index> labels{0, 1, 1, 0};
    const std::vector<Index> mask{0, 1, 2, 3};
    CHECK(accuracy({0, 1, 1, 0}, labels, mask) == doctest::Approx(1.0));
    CHECK(accuracy({1, 0, 0, 1}, labels, mask) == doctest::Approx(0.0));
    CHECK(accuracy({0, 1, 1, 1}, labels, mask) == doctest::Approx(0.75));
}

TEST_CASE("sbm generator") {
    SUBCASE("single node") {
        SbmConfig cfg;
        cfg.block_sizes = {1};
        const Graph g = sbm_generate(cfg);
        CHECK(g.num_nodes() == 1);
        CHECK(g.num_edges() == 0);
    }
    SUBCASE("two disjoint 50-cliques") {
        SbmConfig cfg;
        cfg.block_sizes = {50, 50};
        cfg.p_in = 1.0;
        cfg.p_out = 0.0;
        const Graph g = sbm_generate(cfg);
        CHECK(g.num_edges() == 2450);
        CHECK(g.adjacency.is_symmetric());
        for (Index i = 0; i < 50; ++i)
            for (Index j = 50; j < 100; ++j) CHECK(g.adjacency.at(i, j) == 0.0);
    }
    SUBCASE("determinism") {
        SbmConfig cfg;
        cfg.block_sizes = {20, 20};
        cfg.p_in = 0.3;
        cfg.p_out = 0.02;
        cfg.seed = 42;
        const Graph a = sbm_generate(cfg);
        const Graph b = sbm_generate(cfg);
        CHECK(a.adjacency.to_dense() == b.adjacency.to_dense());
        CHECK(a.features.data == b.features.data);
        CHECK(a.labels == b.labels);
    }
}

TEST_CASE("split sampling is seeded and class-balanced") {
    std::vector<Index> labels;
    for (Index i = 0; i < 60; ++i) labels.push_back(i % 3);
    const Splits s = sample_splits(labels, 5, 9);
    CHECK(s.train.size() == 15);
    CHECK(s.valid.size() == 15);
    CHECK(s.test.size() == 30);
    const Splits t = sample_splits(labels, 5, 9);
    CHECK(s.train == t.train);
    CHECK(s.test == t.test);
    std::vector<Index> per_class(3, 0);
    for (Index v : s.train) ++per_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(v)])];
    CHECK(per_class == std::vector<Index>{5, 5, 5});
}

TEST_CASE("edge flips use xor semantics and diffs round-trip") {
    const CsrMatrix a = undirected_edges(4, {{0, 1}, {1, 2}});
    const std::vector<std::pair<Index, Index>> flips{{0, 1}, {2, 3}};
    const CsrMatrix b = apply_flips(a, flips, false);
    CHECK(b.at(0, 1) == 0.0);   // removed
    CHECK(b.at(1, 0) == 0.0);
    CHECK(b.at(2, 3) == doctest::Approx(1.0));  // added, symmetric
    CHECK(b.at(3, 2) == doctest::Approx(1.0));
    const CsrMatrix c = apply_flips(b, flips, false);
    CHECK(c.to_dense() == a.to_dense());  // applying a diff twice restores

    const fs::path dir = make_tmpdir("diff");
    save_edge_diff(flips, (dir / "d.diff").string());
    CHECK(load_edge_diff((dir / "d.diff").string()) == flips);
}

TEST_CASE("largest connected component extraction") {
    Graph g;
    g.adjacency = undirected_edges(5, {{0, 1}, {1, 2}});  // {0,1,2} + isolated {3}, {4}
    g.features = Matrix(5, 1);
    g.labels = {0, 1, 0, 1, 0};
    std::vector<Index> kept;
    const Graph lcc = largest_connected_component(g, &kept);
    CHECK(lcc.num_nodes() == 3);
    CHECK(kept == std::vector<Index>{0, 1, 2});
    CHECK(lcc.adjacency.at(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("dense LU solve oracle") {
    Matrix a(2, 2);
    a(0, 0) = 2.0;
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    a(1, 1) = 3.0;
    Matrix b(2, 1);
    b(0, 0) = 5.0;
    b(1, 0) = 10.0;
    const Matrix x = lu_solve(a, b);  // solution of [[2,1],[1,3]] x = [5,10]
    CHECK(x(0, 0) == doctest::Approx(1.0));
    CHECK(x(1, 0) == doctest::Approx(3.0));
}

TEST_CASE("adjacency storage accounting reports both value widths") {
    Graph g;
    g.adjacency = undirected_edges(3, {{0, 1}});
    g.features = Matrix(3, 1);
    g.labels = {0, 0, 1};
    const auto [w32, w64] = g.adjacency_bytes();
    CHECK(w64 > w32);
    CHECK(w64 - w32 == static_cast<std::size_t>(g.adjacency.nnz()) * 4);
}
