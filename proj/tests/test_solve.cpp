#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rcar/solve.hpp"

using namespace rcar;

namespace {
const ScalarDist kOne{Constant{1.0}};
const ScalarDist kChi{ChiSquare1{}};
}

TEST_CASE("bisection") {
    const double r = bisect_root([](double x) { return x * x - 2.0; }, 1.0, 2.0, 1e-12);
    CHECK(r == doctest::Approx(1.4142135623730951).epsilon(1e-11));
    CHECK_THROWS_AS(bisect_root([](double x) { return x * x + 1.0; }, 0.0, 1.0, 1e-10),
                    NumericError);
    CHECK_THROWS_AS(bisect_root([](double x) { return x; }, 1.0, 0.5, 1e-10), ValidationError);

    SUBCASE("evaluation budget: ceil(log2((hi-lo)/tol)) + 2") {
        long evals = 0;
        const double tol = 1e-12;
        bisect_root([&](double x) { ++evals; return x * x - 2.0; }, 1.0, 2.0, tol);
        const long budget = static_cast<long>(std::ceil(std::log2(1.0 / tol))) + 2;
        CHECK(evals <= budget);
    }

    SUBCASE("scalar criteria as roots") {
        // E[(beta (1 + Z))^2] = 1 with Z = 1: beta = 0.5
        const double b1 = bisect_root(
            [](double b) {
                return expect(kOne, [b](double z) { return std::pow(b * (1.0 + z), 2.0); }).value - 1.0;
            },
            1e-6, 1.0 - 1e-6, 1e-12);
        CHECK(b1 == doctest::Approx(0.5).epsilon(1e-10));
        // with Z chi-square(1): beta = 1/sqrt(6)
        const double b2 = bisect_root(
            [](double b) {
                return expect(kChi, [b](double z) { return std::pow(b * (1.0 + z), 2.0); }).value - 1.0;
            },
            1e-6, 1.0 - 1e-6, 1e-12);
        CHECK(b2 == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-9));
    }
}

TEST_CASE("critical beta identities") {
    SUBCASE("theta = 1: first-moment criteria equal the exact one") {
        for (const ScalarDist* z : {&kOne, &kChi}) {
            const auto c1 = critical_beta(SweepCriterion::Phi1, 1.0, *z);
            const auto c1t = critical_beta(SweepCriterion::Phi1Tilde, 1.0, *z);
            const auto ce = critical_beta(SweepCriterion::Exact, 1.0, *z);
            REQUIRE(c1.beta.has_value());
            REQUIRE(c1t.beta.has_value());
            REQUIRE(ce.beta.has_value());
            CHECK(std::abs(*c1.beta - *ce.beta) <= 1e-9);
            CHECK(std::abs(*c1t.beta - *ce.beta) <= 1e-9);
            // algebra: beta (1 + E[Z]) = 1
            CHECK(*ce.beta == doctest::Approx(1.0 / (1.0 + moment(*z, 1.0))).epsilon(1e-9));
        }
    }
    SUBCASE("theta = 2: pair-sum criteria equal the exact one") {
        for (const ScalarDist* z : {&kOne, &kChi}) {
            const auto c2 = critical_beta(SweepCriterion::Phi2, 2.0, *z);
            const auto c2t = critical_beta(SweepCriterion::Phi2Tilde, 2.0, *z);
            const auto ce = critical_beta(SweepCriterion::Exact, 2.0, *z);
            REQUIRE(c2.beta.has_value());
            REQUIRE(c2t.beta.has_value());
            REQUIRE(ce.beta.has_value());
            CHECK(std::abs(*c2.beta - *ce.beta) <= 1e-9);
            CHECK(std::abs(*c2t.beta - *ce.beta) <= 1e-9);
            // algebra: beta^2 (1 + 2 E[Z] + E[Z^2]) = 1
            const double want = 1.0 / std::sqrt(1.0 + 2.0 * moment(*z, 1.0) + moment(*z, 2.0));
            CHECK(*ce.beta == doctest::Approx(want).epsilon(1e-9));
        }
        // chi-square: 1/sqrt(6)
        const auto ce = critical_beta(SweepCriterion::Exact, 2.0, kChi);
        CHECK(*ce.beta == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-9));
    }
}

TEST_CASE("sweep rows keep the theorem ordering") {
    const double grid[] = {0.5, 1.0, 1.7, 2.0, 2.6};
    const auto rows = theta_sweep(grid, kChi);
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) {
        REQUIRE(r.beta_exact.has_value());
        const double exact = *r.beta_exact;
        // sufficient-side criteria cannot cross above the exact value;
        // necessary-side ones cannot cross below
        auto leq = [&](const std::optional<double>& b) {
            REQUIRE(b.has_value());
            CHECK(*b <= exact + 1e-9);
        };
        auto geq = [&](const std::optional<double>& b) {
            REQUIRE(b.has_value());
            CHECK(*b >= exact - 1e-9);
        };
        if (r.theta < 1.0) {
            leq(r.beta_phi1);
            geq(r.beta_phi1_tilde);
        } else if (r.theta > 1.0) {
            geq(r.beta_phi1);
            leq(r.beta_phi1_tilde);
        }
        if (r.theta < 2.0) {
            leq(r.beta_phi2);
            geq(r.beta_phi2_tilde);
        } else if (r.theta > 2.0) {
            geq(r.beta_phi2);
            leq(r.beta_phi2_tilde);
        }
    }
}

TEST_CASE("exact critical beta decreases in theta for the chi-square factor") {
    const double grid[] = {0.25, 0.75, 1.25, 1.75, 2.25, 2.75};
    double prev = 1.0;
    for (double theta : grid) {
        const auto ce = critical_beta(SweepCriterion::Exact, theta, kChi);
        REQUIRE(ce.beta.has_value());
        CHECK(*ce.beta <= prev + 1e-9);
        prev = *ce.beta;
    }
}

TEST_CASE("garch region scan") {
    const auto points = garch_region_scan(0.1);
    REQUIRE(points.size() == 100);
    for (const auto& p : points) {
        // machinery equals the closed forms
        if (std::isfinite(p.phi1_sum_closed))
            CHECK(std::abs(p.phi1_sum_machinery - p.phi1_sum_closed) <=
                  1e-9 * std::max(1.0, p.phi1_sum_closed));
        if (std::isfinite(p.phi2_sum_closed))
            CHECK(std::abs(p.phi2_sum_machinery - p.phi2_sum_closed) <=
                  1e-9 * std::max(1.0, p.phi2_sum_closed));
        else
            CHECK(std::isinf(p.phi2_sum_machinery));
        // the first-moment condition is strictly stronger at theta = 2
        if (p.phi1_ok) CHECK(p.phi2_ok);
    }
    // spot checks from the closed forms
    const auto& p52 = *std::find_if(points.begin(), points.end(), [](const GarchPoint& p) {
        return std::abs(p.alpha1 - 0.5) < 1e-12 && std::abs(p.beta1 - 0.2) < 1e-12;
    });
    CHECK_FALSE(p52.phi1_ok); // sqrt(3) * 0.5 + 0.2 > 1
    CHECK(p52.phi2_ok);       // 0.75 + 0.2 + 0.04 < 1
    const auto& p25 = *std::find_if(points.begin(), points.end(), [](const GarchPoint& p) {
        return std::abs(p.alpha1 - 0.2) < 1e-12 && std::abs(p.beta1 - 0.5) < 1e-12;
    });
    CHECK(p25.phi1_ok);
    CHECK(p25.phi2_ok);
    // alpha1 = 0 reduces to beta1 < 1 on both sides
    for (const auto& p : points)
        if (p.alpha1 == 0.0) {
            CHECK(p.phi1_ok);
            CHECK(p.phi2_ok);
        }
}

TEST_CASE("default grid") {
    const auto grid = default_theta_grid();
    REQUIRE(grid.size() == 30);
    CHECK(grid.front() == doctest::Approx(0.1));
    CHECK(grid.back() == doctest::Approx(3.0));
}
