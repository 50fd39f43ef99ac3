#include <doctest.h>

#include <cmath>
#include <random>

#include "gnnrob/soft_median.hpp"

using namespace gnnrob;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return m;
}

}  // namespace

TEST_CASE("weighted dimension-wise median worked examples") {
    CHECK(weighted_dimensionwise_median(from_rows({{1}, {2}, {3}}), {1, 1, 1})[0] ==
          doctest::Approx(2.0));
    // cumulative weight 3 >= 5/2 already at the first sorted item
    CHECK(weighted_dimensionwise_median(from_rows({{0}, {5}, {9}}), {3, 1, 1})[0] ==
          doctest::Approx(0.0));
    const std::vector<double> single =
        weighted_dimensionwise_median(from_rows({{4, -2, 7}}), {2.5});
    CHECK(single == std::vector<double>{4, -2, 7});
}

TEST_CASE("soft median") {
    SoftMedianConfig cfg;
    SUBCASE("single row is returned exactly") {
        const std::vector<double> out = soft_median(from_rows({{1.5, -3.0}}), cfg);
        CHECK(out[0] == doctest::Approx(1.5));
        CHECK(out[1] == doctest::Approx(-3.0));
    }
    SUBCASE("large temperature recovers the sample mean") {
        cfg.temperature = 1e6;
        const Matrix x = from_rows({{1, 2}, {3, 8}, {-1, 2}});
        const std::vector<double> out = soft_median(x, cfg);
        // the softmax deviates from uniform by O(1/T)
        CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(out[1] == doctest::Approx(4.0).epsilon(1e-5));
    }
    SUBCASE("small temperature suppresses the outlier") {
        cfg.temperature = 0.1;
        std::vector<double> weights;
        const std::vector<double> out = soft_median(from_rows({{0}, {0}, {10}}), cfg, &weights);
        CHECK(std::abs(out[0]) < 1e-10);
        CHECK(weights[0] == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(weights[1] == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(weights[2] < 1e-20);
    }
}

TEST_CASE("weighted soft median") {
    SoftMedianConfig cfg;
    SUBCASE("uniform weights reduce to the unweighted form times their sum") {
        const Matrix x = from_rows({{1, 0}, {2, 5}, {0, 1}, {3, 3}});
        const std::vector<double> a(4, 0.3);
        const std::vector<double> w = weighted_soft_median(x, a, cfg);
        const std::vector<double> u = soft_median(x, cfg);
        for (std::size_t c = 0; c < w.size(); ++c)
            CHECK(w[c] == doctest::Approx(1.2 * u[c]).epsilon(1e-9));
    }
    SUBCASE("large temperature recovers the weighted sum") {
        cfg.temperature = 1e6;
        const Matrix x = from_rows({{1, 2}, {3, 8}, {-1, 2}});
        const std::vector<double> a{0.5, 0.25, 1.5};
        const std::vector<double> out = weighted_soft_median(x, a, cfg);
        for (Index c = 0; c < x.cols; ++c) {
            double ref = 0.0;
            for (Index r = 0; r < x.rows; ++r) ref += a[static_cast<std::size_t>(r)] * x(r, c);
            CHECK(std::abs(out[static_cast<std::size_t>(c)] - ref) < 1e-5);
        }
    }
    SUBCASE("one-hot weights return that row scaled by its weight") {
        const Matrix x = from_rows({{1, 2}, {7, -4}});
        const std::vector<double> a{0.0, 0.8};
        const std::vector<double> out = weighted_soft_median(x, a, cfg);
        CHECK(out[0] == doctest::Approx(0.8 * 7.0));
        CHECK(out[1] == doctest::Approx(0.8 * -4.0));
    }
}

TEST_CASE("weighted soft median backward matches finite differences") {
    SoftMedianConfig cfg;
    cfg.temperature = 0.7;
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Matrix x(5, 3);
    for (double& v : x.data) v = unif(rng);
    std::vector<double> a{0.4, 0.9, 0.2, 0.7, 0.5};
    std::vector<double> gbar{0.3, -0.8, 0.5};

    const WeightedSoftMedianGrads grads = weighted_soft_median_backward(x, a, cfg, gbar);
    auto scalar = [&](const Matrix& xx, const std::vector<double>& aa) {
        const std::vector<double> o = weighted_soft_median(xx, aa, cfg);
        double s = 0.0;
        for (std::size_t c = 0; c < o.size(); ++c) s += gbar[c] * o[c];
        return s;
    };
    const std::vector<double> med = weighted_dimensionwise_median(x, a);
    const double h = 1e-6;
    for (Index r = 0; r < x.rows; ++r) {
        for (Index c = 0; c < x.cols; ++c) {
            // the dimension-wise median is treated as constant in the backward
            // pass (stop-gradient), so the median element itself legitimately
            // disagrees with finite differences
            if (x(r, c) == med[static_cast<std::size_t>(c)]) continue;
            Matrix up = x, dn = x;
            up(r, c) += h;
            dn(r, c) -= h;
            const double fd = (scalar(up, a) - scalar(dn, a)) / (2.0 * h);
            CHECK(grads.wrt_x(r, c) == doctest::Approx(fd).epsilon(1e-4));
        }
        std::vector<double> au = a, ad = a;
        au[static_cast<std::size_t>(r)] += h;
        ad[static_cast<std::size_t>(r)] -= h;
        const double fd = (scalar(x, au) - scalar(x, ad)) / (2.0 * h);
        if (std::abs(grads.wrt_a[static_cast<std::size_t>(r)] - fd) > 1e-4)
            CHECK(grads.wrt_a[static_cast<std::size_t>(r)] == doctest::Approx(fd).epsilon(0.05));
    }
}

TEST_CASE("breakdown stress") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x(5, 2);
    for (double& v : x.data) v = normal(rng);
    const std::vector<double> magnitudes{1e3, 1e6, 1e9, 1e12};
    SUBCASE("minority outliers stay bounded for any moderate temperature") {
        for (double t : {0.1, 1.0, 10.0}) {
            SoftMedianConfig cfg;
            cfg.temperature = t;
            CHECK(breakdown_stress(x, cfg, 2, magnitudes).bounded);
        }
    }
    SUBCASE("majority outliers drag the output away") {
        SoftMedianConfig cfg;
        cfg.temperature = 10.0;
        const BreakdownResult r = breakdown_stress(x, cfg, 3, magnitudes);
        CHECK_FALSE(r.bounded);
        CHECK(r.max_output_norm > 1e2);
    }
    SUBCASE("no outliers reduce to the plain soft median") {
        SoftMedianConfig cfg;
        const BreakdownResult r = breakdown_stress(x, cfg, 0, magnitudes);
        CHECK(r.bounded);
        const std::vector<double> clean = soft_median(x, cfg);
        double norm = 0.0;
        for (double v : clean) norm += v * v;
        CHECK(r.max_output_norm == doctest::Approx(std::sqrt(norm)));
    }
}

TEST_CASE("aggregation bias") {
    SoftMedianConfig cfg;
    cfg.temperature = 0.2;
    SUBCASE("identical inputs have zero bias") {
        const Matrix x = from_rows({{1, 2}, {3, 4}});
        const std::vector<double> a{0.5, 0.5};
        CHECK(aggregation_bias(x, a, x, a, cfg, true).bias == doctest::Approx(0.0));
        CHECK(aggregation_bias(x, a, x, a, cfg, false).bias == doctest::Approx(0.0));
    }
    SUBCASE("soft median beats the weighted sum under 20% point-mass outliers") {
        std::mt19937_64 rng(0);
        std::normal_distribution<double> normal(0.0, 1.0);
        double sm_total = 0.0, ws_total = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            Matrix clean(50, 4);
            for (double& v : clean.data) v = normal(rng);
            Matrix pert = clean;
            for (Index r = 0; r < 10; ++r)  // 20% outliers at magnitude 100
                for (Index c = 0; c < 4; ++c) pert(r, c) = 100.0;
            const std::vector<double> a(50, 1.0 / 50.0);
            sm_total += aggregation_bias(clean, a, pert, a, cfg, true).bias;
            ws_total += aggregation_bias(clean, a, pert, a, cfg, false).bias;
        }
        CHECK(sm_total < ws_total);
    }
    SUBCASE("weighted-sum bias is monotone in the outlier magnitude") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix clean(20, 3);
        for (double& v : clean.data) v = normal(rng);
        const std::vector<double> a(20, 0.05);
        double prev = 0.0;
        for (double mag : {1.0, 10.0, 100.0, 1000.0}) {
            Matrix pert = clean;
            for (Index c = 0; c < 3; ++c) pert(0, c) = mag;
            const double bias = aggregation_bias(clean, a, pert, a, cfg, false).bias;
            CHECK(bias >= prev);
            prev = bias;
        }
    }
}
