#include <doctest.h>

#include <cmath>

#include "rcar/model.hpp"

using namespace rcar;

namespace {

ModelSpec ex51_model() {
    // order-2, entries iid with E[A] = 0.3, E[A^2] = 0.2
    const ScalarDist a{ScaledBernoulli{0.45, 2.0 / 3.0}};
    return ModelSpec{Assumption::A1, CoeffFamily(FiniteIndependent{{a, a}}),
                     NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
}

} // namespace

TEST_CASE("oracle marginals and joints") {
    SUBCASE("single constant coefficient") {
        const ModelSpec spec{Assumption::A1,
                             CoeffFamily(FiniteIndependent{{ScalarDist(Constant{0.5})}}),
                             NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
        const MomentOracle o = build_oracle(spec);
        CHECK(o.marginal(1, 2.0) == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(o.order() == 1);
        CHECK(o.marginal(5, 1.0) == 0.0); // beyond the order
    }
    SUBCASE("geometric weights") {
        const ModelSpec spec{Assumption::A2,
                             CoeffFamily(GeometricFactor{0.5, ScalarDist(Constant{1.0})}),
                             NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
        const MomentOracle o = build_oracle(spec);
        CHECK(o.marginal(3, 1.0) == doctest::Approx(0.125).epsilon(1e-15));
        CHECK_FALSE(o.order().has_value());
        CHECK(o.beta() == 0.5);
    }
    SUBCASE("single-factor joint moment") {
        const ModelSpec spec{Assumption::A1,
                             CoeffFamily(FiniteSingleFactor{{0.3, 0.2}, ScalarDist(ChiSquare1{})}),
                             NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
        const MomentOracle o = build_oracle(spec);
        CHECK(o.joint(1, 2, 2.0) == doctest::Approx(0.3 * 0.2 * 3.0).epsilon(1e-13));
    }
}

TEST_CASE("oracle invariants") {
    const MomentOracle fi = build_oracle(ex51_model());
    const ModelSpec sf_spec{Assumption::A1,
                            CoeffFamily(FiniteSingleFactor{{0.5, 0.25, 0.1}, ScalarDist(Exponential{1.0})}),
                            NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const MomentOracle sf = build_oracle(sf_spec);
    const ModelSpec geo_spec{Assumption::A2,
                             CoeffFamily(GeometricFactor{0.6, ScalarDist(ChiSquare1{})}),
                             NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const MomentOracle geo = build_oracle(geo_spec);

    for (const MomentOracle* o : {&fi, &sf, &geo}) {
        for (double theta : {0.5, 1.0, 2.0, 3.0}) {
            for (int i = 1; i <= 3; ++i) {
                CHECK(o->joint(i, i, theta) ==
                      doctest::Approx(o->marginal(i, theta)).epsilon(1e-13));
                for (int j = 1; j <= 3; ++j) {
                    CHECK(o->joint(i, j, theta) ==
                          doctest::Approx(o->joint(j, i, theta)).epsilon(1e-13));
                    // Cauchy-Schwarz
                    const double lhs = o->joint(i, j, theta) * o->joint(i, j, theta);
                    const double rhs = o->marginal(i, theta) * o->marginal(j, theta);
                    CHECK(lhs <= rhs * (1.0 + 1e-12) + 1e-18);
                }
            }
        }
    }

    SUBCASE("independent entries factorize") {
        for (double theta : {1.0, 2.0})
            CHECK(fi.joint(1, 2, theta) ==
                  doctest::Approx(fi.marginal(1, theta / 2) * fi.marginal(2, theta / 2))
                      .epsilon(1e-14));
    }
}

TEST_CASE("single factor with p=1 equals the scaled independent law") {
    // w Z with Z ~ Exp(4) has the law of Exp(4/w)
    const double w = 2.0;
    const ModelSpec sf{Assumption::A1,
                       CoeffFamily(FiniteSingleFactor{{w}, ScalarDist(Exponential{4.0})}),
                       NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const ModelSpec fi{Assumption::A1,
                       CoeffFamily(FiniteIndependent{{ScalarDist(Exponential{4.0 / w})}}),
                       NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const MomentOracle a = build_oracle(sf), b = build_oracle(fi);
    for (double theta : {0.5, 1.0, 1.7, 2.0, 3.0})
        CHECK(a.marginal(1, theta) == doctest::Approx(b.marginal(1, theta)).epsilon(1e-12));
}

TEST_CASE("group moments") {
    const ModelSpec sf{Assumption::A2,
                       CoeffFamily(FiniteSingleFactor{{0.5, 0.25}, ScalarDist(ChiSquare1{})}),
                       NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const MomentOracle o = build_oracle(sf);
    // E[A_1^u A_2^{2u}] = w1^u w2^{2u} E[Z^{3u}]
    const std::vector<std::pair<int, int>> g{{1, 1}, {2, 2}};
    const double u = 0.5;
    const double expected = std::pow(0.5, u) * std::pow(0.25, 2 * u) *
                            moment(ScalarDist(ChiSquare1{}), 3 * u);
    CHECK(o.group_moment(g, u) == doctest::Approx(expected).epsilon(1e-13));

    // repeated indices merge: A_1^u * A_1^u = A_1^{2u}
    const std::vector<std::pair<int, int>> rep{{1, 1}, {1, 1}};
    CHECK(o.group_moment(rep, u) == doctest::Approx(o.marginal(1, 2 * u)).epsilon(1e-13));

    const MomentOracle fi = build_oracle(ex51_model());
    const std::vector<std::pair<int, int>> g2{{1, 2}, {2, 1}};
    CHECK(fi.group_moment(g2, 1.0) ==
          doctest::Approx(fi.marginal(1, 2.0) * fi.marginal(2, 1.0)).epsilon(1e-13));
}

TEST_CASE("tail mass") {
    const ScalarDist one{Constant{1.0}};
    const ModelSpec m1{Assumption::A2, CoeffFamily(GeometricFactor{0.5, one}),
                       NoiseSpec{one, NoiseDependence::IndependentOfA}};
    CHECK(tail_mass(m1, 1.0, 2) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(tail_mass(m1, 2.0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    const ModelSpec m2{Assumption::A2, CoeffFamily(GeometricFactor{0.9, one}),
                       NoiseSpec{one, NoiseDependence::IndependentOfA}};
    const double t = tail_mass(m2, 1.0, 50);
    CHECK(t > 0.0);
    CHECK(t < 0.1);
    CHECK(t == doctest::Approx(std::pow(0.9, 51) / 0.1).epsilon(1e-12));

    CHECK_THROWS_AS(tail_mass(ex51_model(), 1.0, 3), ValidationError);
}

TEST_CASE("sum_joint_pow closed form vs direct") {
    const MomentOracle fi = build_oracle(ex51_model());
    double direct = 0.0;
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j) direct += std::pow(fi.joint(i, j, 2.0), 1.0);
    CHECK(fi.sum_joint_pow(2.0, 1.0) == doctest::Approx(direct).epsilon(1e-14));

    const ModelSpec geo{Assumption::A2, CoeffFamily(GeometricFactor{0.5, ScalarDist(ChiSquare1{})}),
                        NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const MomentOracle g = build_oracle(geo);
    const double r = 0.8, theta = 2.5;
    double truncated = 0.0;
    for (int i = 1; i <= 200; ++i)
        for (int j = 1; j <= 200; ++j) truncated += std::pow(g.joint(i, j, theta), r);
    CHECK(g.sum_joint_pow(theta, r) == doctest::Approx(truncated).epsilon(1e-10));
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(CoeffFamily(GeometricFactor{1.0, ScalarDist(Constant{1.0})}), ValidationError);
    CHECK_THROWS_AS(CoeffFamily(GeometricFactor{0.0, ScalarDist(Constant{1.0})}), ValidationError);
    CHECK_THROWS_AS(CoeffFamily(FiniteIndependent{{}}), ValidationError);
    CHECK_THROWS_AS(CoeffFamily(FiniteSingleFactor{{-0.1}, ScalarDist(Constant{1.0})}),
                    ValidationError);

    ModelSpec bad{Assumption::A2, CoeffFamily(GeometricFactor{0.5, ScalarDist(Constant{1.0})}),
                  NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::JointRowA1}};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("custom geometric oracle matches the family-built one") {
    const ScalarDist chi{ChiSquare1{}};
    const ModelSpec spec{Assumption::A2, CoeffFamily(GeometricFactor{0.4, chi}),
                         NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const MomentOracle a = build_oracle(spec);
    const MomentOracle b = geometric_oracle(
        0.4, [chi](double th) { return moment(chi, th); }, ScalarDist(Constant{1.0}));
    for (double theta : {0.5, 1.0, 2.0}) {
        CHECK(a.sum_marginal(theta) == doctest::Approx(b.sum_marginal(theta)).epsilon(1e-14));
        CHECK(a.joint(2, 5, theta) == doctest::Approx(b.joint(2, 5, theta)).epsilon(1e-14));
    }
}
