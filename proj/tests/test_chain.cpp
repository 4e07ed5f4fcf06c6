#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rescale/chain.hpp"
#include "rescale/errors.hpp"

using namespace rescale;

namespace {

CoefficientLaw reflecting_third() {
    // scaling -1 always; shift +1 with probability 1/3, -1 with 2/3
    return CoefficientLaw({{-1.0, 1.0 / 3.0, PointMass{1.0}}, {-1.0, 2.0 / 3.0, PointMass{-1.0}}});
}

CoefficientLaw bernoulli_a2() {
    return CoefficientLaw({{2.0, 0.5, PointMass{1.0}}, {2.0, 0.5, PointMass{-1.0}}});
}

CoefficientLaw critical_lattice() {
    return CoefficientLaw({{2.0, 0.5, PointMass{1.0}}, {0.5, 0.5, PointMass{0.0}}},
                          QLattice{2.0, {1, -1}});
}

double binom_stderr(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace

TEST_CASE("single step closed form") {
    CoefficientLaw law({{2.0, 1.0, PointMass{0.5}}});
    auto s = chain_step(initial_state(law, 0.7), 2.0, 0.5);
    CHECK(s.n == 1);
    CHECK(s.A == 2.0);
    CHECK(s.D == 1.0);
    CHECK(s.X == doctest::Approx(2.0 * (0.7 - 0.5)).epsilon(1e-15));
}

TEST_CASE("two steps match the expanded coefficients") {
    CoefficientLaw law({{2.0, 1.0, PointMass{0.0}}});
    const double x0 = 0.7, a1 = 2.0, b1 = 0.5, a2 = 3.0, b2 = -1.0;
    auto s = chain_step(chain_step(initial_state(law, x0), a1, b1), a2, b2);
    CHECK(s.A == doctest::Approx(a1 * a2).epsilon(1e-15));
    CHECK(s.D == doctest::Approx(b1 * a1 * a2 + b2 * a2).epsilon(1e-15));
    CHECK(s.X == doctest::Approx(s.A * x0 - s.D).epsilon(1e-12));
}

TEST_CASE("zero scaling annihilates") {
    CoefficientLaw law({{2.0, 1.0, PointMass{0.0}}});
    auto s = chain_step(chain_step(initial_state(law, 0.3), 2.0, 1.0), 0.0, 5.0);
    CHECK(s.A == 0.0);
    CHECK(s.D == 0.0);
    CHECK(s.X == 0.0);
}

TEST_CASE("hit-zero time is geometric") {
    CoefficientLaw law({{0.0, 1.0 / 3.0, PointMass{0.0}}, {2.0, 2.0 / 3.0, PointMass{0.0}}});
    const std::size_t n_paths = 100000;
    auto t = tau_distribution(law, HitZero{}, n_paths, 200, 11);
    CHECK(t.cap_rate < 1e-3);
    // P(tau > n) = (2/3)^n through the pmf tail
    double tail = 1.0;
    for (int n = 1; n <= 3; ++n) {
        tail -= t.pmf[static_cast<std::size_t>(n - 1)];
        const double expect = std::pow(2.0 / 3.0, n);
        CHECK(std::fabs(tail - expect) <=
              3.0 * binom_stderr(expect, static_cast<double>(n_paths)) + 1e-3);
    }
}

TEST_CASE("reflection law returns to one in exactly two steps") {
    auto law = reflecting_third();
    auto rng = make_rng(5);
    for (int i = 0; i < 1000; ++i) {
        auto out = run_until(law, 0.4, HitOne{}, 50, rng);
        CHECK(out.status == PathStatus::Stopped);
        CHECK(out.state.n == 2);
        CHECK(out.state.A == 1.0);
    }
}

TEST_CASE("growing scalings blow past a small-modulus rule") {
    auto law = bernoulli_a2();
    auto rng = make_rng(6);
    int capped = 0;
    for (int i = 0; i < 200; ++i)
        if (run_until(law, 0.0, SmallModulus{3.0}, 1000, rng).status == PathStatus::CapExceeded)
            ++capped;
    CHECK(capped == 200);
}

TEST_CASE("rule constructibility") {
    auto no_lattice = bernoulli_a2();
    CHECK_THROWS_AS(check_rule(no_lattice, HitOne{}), RuleUnconstructibleError);
    CHECK_THROWS_AS(check_rule(no_lattice, LatticeReturn{}), RuleUnconstructibleError);
    CHECK_NOTHROW(check_rule(critical_lattice(), HitOne{}));
    CHECK_NOTHROW(check_rule(critical_lattice(), LatticeReturn{}));
    CHECK_NOTHROW(check_rule(reflecting_third(), HitOne{}));
    CHECK_THROWS_AS(check_rule(no_lattice, SmallModulus{-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(check_rule(no_lattice, FixedHorizon{0}), std::invalid_argument);
}

TEST_CASE("stopped mean of a constant is exact") {
    auto est = stopped_mean([](double) { return 4.25; }, reflecting_third(), 0.3, HitOne{}, 2000,
                            100, 17);
    CHECK(est.estimate == 4.25);
    CHECK(est.std_error == 0.0);
    CHECK(est.cap_rate == 0.0);
}

TEST_CASE("periodic solution passes through the stopped mean") {
    // tau = 2 and D_tau in {0, +2, -2} with probabilities {5/9, 2/9, 2/9};
    // 1-periodicity of y makes E y(x - D_tau) = y(x) exactly
    auto y = [](double x) { return 2.0 * std::cos(2.0 * M_PI * x); };
    for (double x : {0.0, 0.3, 1.7}) {
        CAPTURE(x);
        auto est = stopped_mean(y, reflecting_third(), x, HitOne{}, 20000, 100, 23);
        CHECK(std::fabs(est.estimate - y(x)) <= 3.0 * est.std_error + 1e-12);
    }
}

TEST_CASE("stopped shift distribution of the reflection law") {
    auto s = sample_stopped_shift(reflecting_third(), HitOne{}, 90000, 100, 29);
    CHECK(s.cap_rate == 0.0);
    std::map<int, int> freq;
    for (double d : s.values) {
        CHECK(std::fabs(d - std::round(d)) < 1e-12);
        ++freq[static_cast<int>(std::round(d))];
    }
    const double n = static_cast<double>(s.values.size());
    CHECK(std::fabs(freq[0] / n - 5.0 / 9.0) <= 3.0 * binom_stderr(5.0 / 9.0, n));
    CHECK(std::fabs(freq[2] / n - 2.0 / 9.0) <= 3.0 * binom_stderr(2.0 / 9.0, n));
    CHECK(std::fabs(freq[-2] / n - 2.0 / 9.0) <= 3.0 * binom_stderr(2.0 / 9.0, n));
}

TEST_CASE("identity scaling stops immediately with its shift") {
    CoefficientLaw law({{1.0, 1.0, PointMass{0.7}}});
    auto rng = make_rng(31);
    auto out = run_until(law, 0.0, HitOne{}, 10, rng);
    CHECK(out.state.n == 1);
    CHECK(out.state.D == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("lattice return keeps every stopped shift finite") {
    auto s = sample_stopped_shift(critical_lattice(), LatticeReturn{}, 20000, 100000, 37);
    CHECK(s.cap_rate < 0.01);
    for (double d : s.values) CHECK(std::isfinite(d));
}

TEST_CASE("return-time pmf for mixed-sign unit scalings") {
    // P(alpha = 1) = 0.4; first return to product 1 at n = 1 with prob p1,
    // at n >= 2 with prob (1-p1)^2 p1^{n-2}
    CoefficientLaw law({{1.0, 0.4, PointMass{0.0}}, {-1.0, 0.6, PointMass{1.0}}});
    const std::size_t n_paths = 100000;
    auto t = tau_distribution(law, HitOne{}, n_paths, 400, 41);
    auto expect = [](int n) { return n == 1 ? 0.4 : 0.36 * std::pow(0.4, n - 2); };
    for (int n = 1; n <= 4; ++n) {
        CAPTURE(n);
        CHECK(std::fabs(t.pmf[static_cast<std::size_t>(n - 1)] - expect(n)) <=
              3.0 * binom_stderr(expect(n), static_cast<double>(n_paths)) + 1e-4);
    }
}

TEST_CASE("pure reflection returns at two almost surely") {
    auto t = tau_distribution(reflecting_third(), HitOne{}, 5000, 100, 43);
    CHECK(t.pmf[1] == 1.0);
}

TEST_CASE("lattice bookkeeping stays exact over long paths") {
    auto law = critical_lattice();
    auto rng = make_rng(47);
    auto out = run_until(law, 0.37, FixedHorizon{1000}, 2000, rng);
    REQUIRE(out.state.lattice_exp.has_value());
    const double recomputed = std::pow(2.0, static_cast<double>(*out.state.lattice_exp));
    CHECK(std::fabs(out.state.A - recomputed) <= 1e-9 * std::fabs(recomputed));
    CHECK(std::fabs(out.state.X - (out.state.A * 0.37 - out.state.D)) <=
          1e-9 * (1.0 + std::fabs(out.state.A * 0.37) + std::fabs(out.state.D)));
}

TEST_CASE("worker count does not change results") {
    auto y = [](double x) { return std::tanh(x); };
    auto a = stopped_mean(y, critical_lattice(), 0.2, LatticeReturn{}, 20000, 10000, 53, 1);
    auto b = stopped_mean(y, critical_lattice(), 0.2, LatticeReturn{}, 20000, 10000, 53, 4);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);

    auto ra = run_paths(bernoulli_a2(), 0.1, FixedHorizon{10}, 1000, 20, 59, 1);
    auto rb = run_paths(bernoulli_a2(), 0.1, FixedHorizon{10}, 1000, 20, 59, 3);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].X_tau == rb[i].X_tau);
        CHECK(ra[i].tau == rb[i].tau);
    }
}

TEST_CASE("everything capped raises") {
    CHECK_THROWS_AS(
        stopped_mean([](double x) { return x; }, bernoulli_a2(), 0.0, SmallModulus{50.0}, 100, 10,
                     61),
        AllPathsCappedError);
}
