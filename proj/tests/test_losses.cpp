#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "gnnrob/loss.hpp"

using namespace gnnrob;

TEST_CASE("tanh margin worked examples") {
    Matrix z(2, 2);
    z(0, 0) = 0.0;
    z(0, 1) = 0.0;
    z(1, 0) = 3.0;
    z(1, 1) = 1.0;
    const LossEval e = eval_loss(LossKind::TanhMargin, z, {0, 0}, {0, 1});
    CHECK(e.per_node[0] == doctest::Approx(0.0));  // tanh(0)
    CHECK(e.per_node[1] == doctest::Approx(-0.96403).epsilon(1e-5));  // tanh(1 - 3)
}

TEST_CASE("masked CE equals CE over the correctly classified node alone") {
    Matrix z(2, 2);
    z(0, 0) = 2.0;  // node 0 correct (label 0)
    z(0, 1) = 0.5;
    z(1, 0) = 1.0;  // node 1 misclassified (label 1)
    z(1, 1) = -1.0;
    const std::vector<Index> labels{0, 1};
    const LossEval mce = eval_loss(LossKind::MCE, z, labels, {0, 1});
    const LossEval ce = eval_loss(LossKind::CE, z, labels, {0});
    CHECK(mce.correct_set == std::vector<Index>{0});
    CHECK(mce.value == doctest::Approx(ce.value));
    CHECK(mce.per_node[1] == 0.0);

    // every masked node misclassified: defined as zero with a flag
    const LossEval empty = eval_loss(LossKind::MCE, z, labels, {1});
    CHECK(empty.empty_mce);
    CHECK(empty.value == 0.0);
}

TEST_CASE("empty mask is rejected for non-masked losses") {
    Matrix z(1, 2);
    CHECK_THROWS_AS(eval_loss(LossKind::CE, z, {0}, {}), std::invalid_argument);
}

TEST_CASE("analytic logit gradients match finite differences for every loss") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    const Index n = 6, c_count = 4;
    Matrix z(n, c_count);
    for (double& v : z.data) v = unif(rng);
    std::vector<Index> labels(static_cast<std::size_t>(n));
    for (Index v = 0; v < n; ++v) labels[static_cast<std::size_t>(v)] = v % c_count;
    const std::vector<Index> mask{0, 1, 2, 3, 4, 5};

    for (LossKind kind : all_loss_kinds()) {
        CAPTURE(loss_name(kind));
        const LossEval e = eval_loss(kind, z, labels, mask);
        const double h = 1e-6;
        for (Index v = 0; v < n; ++v)
            for (Index c = 0; c < c_count; ++c) {
                Matrix up = z, dn = z;
                up(v, c) += h;
                dn(v, c) -= h;
                const double fd = (eval_loss(kind, up, labels, mask).value -
                                   eval_loss(kind, dn, labels, mask).value) /
                                  (2.0 * h);
                CHECK(e.grad_logits(v, c) == doctest::Approx(fd).epsilon(1e-5));
            }
    }
}

TEST_CASE("default margin grid avoids 0 and the endpoints") {
    const std::vector<double> grid = default_margin_grid();
    CHECK(grid.size() == 400);
    for (double psi : grid) {
        CHECK(psi > -1.0);
        CHECK(psi < 1.0);
        CHECK(psi != 0.0);
    }
    CHECK(grid.front() == doctest::Approx(-1.0 + 1.0 / 400.0));
    CHECK(grid.back() == doctest::Approx(1.0 - 1.0 / 400.0));
}

TEST_CASE("surrogate loss property checks on the binary parameterization") {
    const std::vector<double> grid = default_margin_grid();
    std::map<LossKind, PropertyReport> rep;
    for (LossKind kind : all_loss_kinds()) rep[kind] = check_loss_properties(kind, grid);

    SUBCASE("headline cells") {
        CHECK(rep[LossKind::CW].gradient_zero_when_misclassified);
        CHECK_FALSE(rep[LossKind::CW].gradient_increasing_when_correct);
        CHECK(rep[LossKind::MCE].gradient_zero_when_misclassified);
        CHECK_FALSE(rep[LossKind::CE].gradient_zero_when_misclassified);
    }
    SUBCASE("gradient vanishes for misclassified nodes (I)") {
        CHECK_FALSE(rep[LossKind::CE].gradient_zero_when_misclassified);
        CHECK_FALSE(rep[LossKind::Margin].gradient_zero_when_misclassified);
        CHECK(rep[LossKind::CW].gradient_zero_when_misclassified);
        CHECK_FALSE(rep[LossKind::NCE].gradient_zero_when_misclassified);
        CHECK_FALSE(rep[LossKind::EluMargin].gradient_zero_when_misclassified);
        CHECK(rep[LossKind::MCE].gradient_zero_when_misclassified);
        CHECK_FALSE(rep[LossKind::TanhMargin].gradient_zero_when_misclassified);
    }
    SUBCASE("gradient magnitude decays with confidence (II)") {
        CHECK(rep[LossKind::CE].gradient_increasing_when_correct);
        CHECK_FALSE(rep[LossKind::Margin].gradient_increasing_when_correct);
        CHECK_FALSE(rep[LossKind::CW].gradient_increasing_when_correct);
        CHECK_FALSE(rep[LossKind::NCE].gradient_increasing_when_correct);
        CHECK_FALSE(rep[LossKind::EluMargin].gradient_increasing_when_correct);
        CHECK(rep[LossKind::MCE].gradient_increasing_when_correct);
        CHECK(rep[LossKind::TanhMargin].gradient_increasing_when_correct);
    }
    SUBCASE("bounded value toward full misclassification (A)") {
        CHECK_FALSE(rep[LossKind::CE].bounded_when_misclassified);
        CHECK_FALSE(rep[LossKind::Margin].bounded_when_misclassified);
        CHECK(rep[LossKind::CW].bounded_when_misclassified);
        CHECK(rep[LossKind::NCE].bounded_when_misclassified);
        CHECK(rep[LossKind::EluMargin].bounded_when_misclassified);
        CHECK(rep[LossKind::MCE].bounded_when_misclassified);
        CHECK(rep[LossKind::TanhMargin].bounded_when_misclassified);
    }
    SUBCASE("boundary seeking on both sides (B)") {
        CHECK_FALSE(rep[LossKind::Margin].boundary_seeking_both_sides);
        CHECK_FALSE(rep[LossKind::CW].boundary_seeking_both_sides);
        CHECK(rep[LossKind::TanhMargin].boundary_seeking_both_sides);
    }
    SUBCASE("report serialization carries the grid size") {
        const std::string j = rep[LossKind::TanhMargin].to_json();
        CHECK(j.find("\"loss\": \"tanh-margin\"") != std::string::npos);
        CHECK(j.find("\"grid_size\": 400") != std::string::npos);
        CHECK(j.find("\"B\": true") != std::string::npos);
    }
}

TEST_CASE("margin distribution") {
    SUBCASE("uniform confidences give exactly zero margins") {
        Matrix conf(3, 4);
        for (double& v : conf.data) v = 0.25;
        const MarginHistogram h = margin_distribution(conf, {0, 1, 2}, {0, 1, 2});
        for (double v : h.values) CHECK(v == 0.0);
    }
    SUBCASE("confident correct predictions pile up near +1") {
        Matrix conf(5, 2);
        for (Index v = 0; v < 5; ++v) {
            conf(v, 0) = 0.99;
            conf(v, 1) = 0.01;
        }
        const MarginHistogram h = margin_distribution(conf, {0, 0, 0, 0, 0}, {0, 1, 2, 3, 4});
        CHECK(h.counts.size() == 40);
        CHECK(h.counts.back() == 5);  // bin covering psi = 0.98
    }
}
