#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "trilab/rates.hpp"

using namespace trilab;

TEST_CASE("rate construction and evaluation") {
    RateSequence exp2 = RateSequence::exponential(2.0);
    CHECK(exp2.at(0) == 1.0);
    CHECK(exp2.at(3) == doctest::Approx(8.0).epsilon(1e-14));
    CHECK(exp2.log_at(200) == 200.0 * std::log(2.0));  // no overflow in log space

    RateSequence poly1 = RateSequence::polynomial(1.0);
    CHECK(poly1.at(0) == 1.0);
    CHECK(poly1.at(40) == doctest::Approx(41.0).epsilon(1e-14));

    RateSequence table = RateSequence::tabulated({1.0, 0.5, 1.0 / 3.0});
    CHECK(table.at(0) == 1.0);
    CHECK(table.at(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(table.horizon() == 2);
    CHECK_THROWS_AS(table.log_at(3), std::out_of_range);

    CHECK_THROWS_AS(RateSequence::exponential(0.0), std::invalid_argument);
    CHECK_THROWS_AS(RateSequence::polynomial(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(RateSequence::tabulated({1.0, -2.0}), std::invalid_argument);
    CHECK_THROWS_AS(RateSequence::tabulated({}), std::invalid_argument);
}

TEST_CASE("growth rate validation") {
    GrowthRateVerdict v = validate_growth_rate(RateSequence::exponential(2.0), 40, 100.0);
    CHECK(v.pass);
    CHECK(v.heuristic);

    // decreasing sequence: starts at 1 but falls at step 1
    std::vector<double> dec;
    for (int n = 0; n <= 40; ++n) dec.push_back(1.0 / (n + 1.0));
    GrowthRateVerdict dv = validate_growth_rate(RateSequence::tabulated(dec), 40, 10.0);
    CHECK_FALSE(dv.pass);
    CHECK(dv.reason == "not nondecreasing");
    CHECK(dv.violation_step == 1);

    // linear growth misses a floor of 100 at window 40 but clears 40
    GrowthRateVerdict fv = validate_growth_rate(RateSequence::polynomial(1.0), 40, 100.0);
    CHECK_FALSE(fv.pass);
    CHECK(fv.reason == "divergence floor not reached");
    CHECK(fv.end_value == doctest::Approx(41.0));
    CHECK(validate_growth_rate(RateSequence::polynomial(1.0), 40, 40.0).pass);

    // value at zero must be exactly one
    GrowthRateVerdict zv = validate_growth_rate(RateSequence::tabulated({2.0, 3.0, 4.0}), 2, 1.0);
    CHECK_FALSE(zv.pass);
    CHECK(zv.violation_step == 0);

    // window monotonicity: a pass at window W carries to W' <= W exactly
    // when the floor is still cleared there; the verdict records the window
    RateSequence lin = RateSequence::polynomial(1.0);
    CHECK(validate_growth_rate(lin, 40, 20.0).pass);
    CHECK(validate_growth_rate(lin, 20, 20.0).pass);   // r(20) = 21 >= 20
    CHECK_FALSE(validate_growth_rate(lin, 10, 20.0).pass);  // r(10) = 11 < 20
    CHECK(validate_growth_rate(lin, 10, 20.0).window == 10);

    CHECK_THROWS_AS(validate_growth_rate(RateSequence::exponential(2.0), 1, 1.0),
                    std::invalid_argument);
}

TEST_CASE("quotient rate h^a / k^b") {
    RateSequence exp2 = RateSequence::exponential(2.0);
    RateSequence same = make_tilde_h(exp2, exp2, 1.0, 1.0, 10);
    for (int n = 0; n <= 10; ++n) {
        CHECK(same.log_at(n) == 0.0);  // exact cancellation in log space
        CHECK(same.at(n) == 1.0);
    }
    CHECK(same.kind() == RateSequence::Kind::Tabulated);

    // b = 0 reduces to h^a
    RateSequence only_h = make_tilde_h(exp2, RateSequence::polynomial(2.0), 1.5, 0.0, 6);
    for (int n = 0; n <= 6; ++n) {
        CHECK(only_h.log_at(n) == doctest::Approx(1.5 * n * std::log(2.0)).epsilon(1e-14));
    }

    // independently computed value: e^2 / 9, both in log space and directly
    RateSequence expe = RateSequence::exponential(std::exp(1.0));
    RateSequence q = make_tilde_h(expe, RateSequence::polynomial(1.0), 1.0, 2.0, 4);
    double direct = std::exp(2.0) / 9.0;
    CHECK(q.at(2) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(q.log_at(2) == doctest::Approx(2.0 - 2.0 * std::log(3.0)).epsilon(1e-14));

    CHECK_THROWS_AS(make_tilde_h(exp2, exp2, 0.0, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(make_tilde_h(exp2, exp2, 1.0, -1.0, 5), std::invalid_argument);
}

TEST_CASE("reciprocal rate") {
    RateSequence one = RateSequence::tabulated({1.0, 1.0, 1.0});
    RateSequence rone = make_bar_h(one);
    for (int n = 0; n <= 2; ++n) CHECK(rone.at(n) == 1.0);

    std::vector<double> logs;
    for (int n = 0; n <= 5; ++n) logs.push_back(2.0 * n);
    RateSequence grow = RateSequence::tabulated_log(logs);
    RateSequence shrink = make_bar_h(grow);
    for (int n = 0; n <= 5; ++n) CHECK(shrink.log_at(n) == -2.0 * n);

    // involution is bit-for-bit
    RateSequence twice = make_bar_h(make_bar_h(grow));
    for (int n = 0; n <= 5; ++n) CHECK(twice.log_at(n) == grow.log_at(n));

    // functional input needs a horizon
    RateSequence exp2 = RateSequence::exponential(2.0);
    CHECK_THROWS_AS(make_bar_h(exp2), std::invalid_argument);
    RateSequence bar = make_bar_h(exp2, 4);
    CHECK(bar.at(2) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("log-space evaluation survives long exponential windows") {
    RateSequence exp2 = RateSequence::exponential(2.0);
    // envelope ratio (h_0 / h_200)^1 stays representable in log space
    double log_ratio = exp2.log_at(0) - exp2.log_at(200);
    CHECK(log_ratio == -(200.0 * std::log(2.0)));
    CHECK(std::isfinite(log_ratio));
    CHECK(std::exp(log_ratio) > 0.0);

    // direct and log-space evaluation agree where direct does not overflow
    for (int n : {1, 10, 50, 100}) {
        CHECK(exp2.at(n) == doctest::Approx(std::pow(2.0, n)).epsilon(1e-12));
    }
}
