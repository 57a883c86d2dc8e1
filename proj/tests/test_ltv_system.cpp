#include <doctest.h>

#include <Eigen/Dense>
#include <limits>
#include <random>
#include <vector>

#include "trilab/fixtures.hpp"
#include "trilab/ltv_system.hpp"

using namespace trilab;

namespace {

Eigen::MatrixXd diag3(double a, double b, double c) {
    Eigen::Vector3d v(a, b, c);
    return v.asDiagonal();
}

LtvSystem literal_e1(int horizon = 10) {
    return LtvSystem(3, std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(horizon),
                                                     diag3(0.5, 2.0, 1.0)));
}

LtvSystem random_system(int dim, int horizon, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> entry(-2.0, 2.0);
    std::vector<Eigen::MatrixXd> coeffs;
    for (int n = 0; n < horizon; ++n) {
        Eigen::MatrixXd a(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) a(i, j) = entry(rng);
        coeffs.push_back(a);
    }
    return LtvSystem(dim, std::move(coeffs));
}

}  // namespace

TEST_CASE("system construction validates shape and entries") {
    CHECK(literal_e1().horizon() == 10);
    CHECK(literal_e1().dim() == 3);

    LtvSystem scalar(1, {Eigen::MatrixXd::Identity(1, 1)});
    CHECK(scalar.horizon() == 1);

    // wrong shape
    CHECK_THROWS_AS(LtvSystem(2, {Eigen::MatrixXd::Zero(2, 3)}), std::invalid_argument);
    // empty
    CHECK_THROWS_AS(LtvSystem(2, {}), std::invalid_argument);
    // non-finite entry
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(LtvSystem(2, {bad}), std::invalid_argument);
    // bad dim
    CHECK_THROWS_AS(LtvSystem(0, {Eigen::MatrixXd::Zero(1, 1)}), std::invalid_argument);
}

TEST_CASE("transition matrices follow the ordered product") {
    LtvSystem e1 = literal_e1();
    TransitionCache tc(e1);

    CHECK((tc.mat(3, 1) - diag3(0.25, 4.0, 1.0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tc.mat(5, 5).isIdentity(0.0));
    CHECK(tc.mat(0, 0).isIdentity(0.0));

    CHECK_THROWS_AS(tc.mat(1, 2), std::out_of_range);
    CHECK_THROWS_AS(tc.mat(11, 0), std::out_of_range);
    CHECK_THROWS_AS(tc.mat(2, -1), std::out_of_range);
}

TEST_CASE("oscillating scalar fixture has the closed-form transitions") {
    FixtureTriple e2 = oscillating_scalar_fixture(40);
    TransitionCache tc(e2.sys);

    CHECK(tc.mat(2, 1)(0, 0) == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));

    // closed form exp(-(m-n) + 0.25((-1)^m m - (-1)^n n)), checked on every pair
    auto sgn = [](int j) { return j % 2 == 0 ? 1.0 : -1.0; };
    for (int n = 0; n <= 40; ++n) {
        for (int m = n; m <= 40; ++m) {
            double expected = std::exp(-(m - n) + 0.25 * (sgn(m) * m - sgn(n) * n));
            CHECK(tc.mat(m, n)(0, 0) == doctest::Approx(expected).epsilon(1e-11));
        }
    }
}

TEST_CASE("propagator identity") {
    LtvSystem e1 = literal_e1();
    TransitionCache tc(e1);
    PropagatorReport rep = tc.check_propagator(10, 1e-10);
    CHECK(rep.pass);
    CHECK(rep.worst_relative_error == 0.0);  // diagonal products are exact

    LtvSystem rnd = random_system(4, 20, 12345);
    TransitionCache trc(rnd);
    PropagatorReport rrep = trc.check_propagator(20, 1e-10);
    CHECK(rrep.pass);

    CHECK_THROWS_AS(tc.check_propagator(11), std::out_of_range);
}

TEST_CASE("propagator identity holds on random systems at 1e-10") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        int dim = 2 + static_cast<int>(seed % 5);  // up to 6
        LtvSystem sys = random_system(dim, 40, seed * 977);
        TransitionCache tc(sys);
        PropagatorReport rep = tc.check_propagator(40, 1e-10);
        INFO("seed ", seed, " worst ", rep.worst_relative_error);
        CHECK(rep.pass);
    }
}

TEST_CASE("cached transitions equal a from-scratch recomputation bit-for-bit") {
    LtvSystem sys = random_system(5, 30, 777);
    TransitionCache tc(sys);
    for (auto [m, n] : std::vector<std::pair<int, int>>{{30, 0}, {17, 3}, {8, 8}, {25, 24}}) {
        Eigen::MatrixXd scratch = Eigen::MatrixXd::Identity(5, 5);
        for (int j = n; j < m; ++j) scratch = sys.coeff(j) * scratch;
        CHECK((tc.mat(m, n) - scratch).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("apply matches the transition matrix action") {
    LtvSystem e1 = literal_e1();
    TransitionCache tc(e1);

    Eigen::VectorXd x(3);
    x << 1, 1, 1;
    Eigen::VectorXd y = tc.apply(2, 0, x);
    CHECK(y(0) == doctest::Approx(0.25));
    CHECK(y(1) == doctest::Approx(4.0));
    CHECK(y(2) == doctest::Approx(1.0));

    CHECK((tc.apply(5, 5, x) - x).norm() == 0.0);
    CHECK(tc.apply(1, 0, Eigen::VectorXd::Zero(3)).norm() == 0.0);
    CHECK_THROWS_AS(tc.apply(1, 0, Eigen::VectorXd::Zero(2)), std::invalid_argument);

    LtvSystem rnd = random_system(4, 12, 4242);
    TransitionCache trc(rnd);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd v(4);
        for (int i = 0; i < 4; ++i) v(i) = gauss(rng);
        int n = rep % 6, m = n + rep % 7;
        Eigen::VectorXd direct = trc.mat(m, n) * v;
        CHECK((trc.apply(m, n, v) - direct).norm() <=
              1e-12 * std::max(1.0, direct.norm()));
    }
}

TEST_CASE("reversibility detection") {
    CHECK(is_reversible(literal_e1()).reversible);

    std::vector<Eigen::MatrixXd> coeffs(5, diag3(0.5, 2.0, 1.0));
    coeffs[3] = diag3(0.5, 2.0, 0.0);
    ReversibilityReport rep = is_reversible(LtvSystem(3, std::move(coeffs)));
    CHECK_FALSE(rep.reversible);
    REQUIRE(rep.singular_steps.size() == 1);
    CHECK(rep.singular_steps[0] == 3);

    Eigen::MatrixXd tiny(1, 1);
    tiny << 1e-20;
    ReversibilityReport trep = is_reversible(LtvSystem(1, {tiny}), 1e-12);
    CHECK_FALSE(trep.reversible);
    CHECK(trep.tol == 1e-12);
}

TEST_CASE("generator fixture reproduces the literal diagonal system") {
    FixtureTriple fx = canonical_diagonal_fixture(10);
    LtvSystem lit = literal_e1();
    for (int n = 0; n < 10; ++n) {
        CHECK((fx.sys.coeff(n) - lit.coeff(n)).cwiseAbs().maxCoeff() == 0.0);
    }
}
