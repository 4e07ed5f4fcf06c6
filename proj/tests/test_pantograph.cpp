#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rescale/errors.hpp"
#include "rescale/pantograph.hpp"

using namespace rescale;

namespace {

// trapezoid integral of the density over its truncated support
double density_mass(const std::vector<double>& kappas, double& mean_out) {
    const auto [lo, hi] = shift_support(PointPlusHypoexp{0.0, kappas}, 1e-12);
    const std::size_t n = 40001;
    const double h = (hi - lo) / static_cast<double>(n - 1);
    double mass = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = lo + h * static_cast<double>(i);
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        const double f = xi_density(kappas, t);
        mass += w * f;
        mean += w * f * t;
    }
    mean_out = mean * h;
    return mass * h;
}

}  // namespace

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(validate_spec({{}, {{1.0, 0.0, 1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(validate_spec({{0.0}, {{1.0, 0.0, 1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(validate_spec({{1.0}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(validate_spec({{1.0}, {{1.0, 0.0, 0.6}, {2.0, 0.0, 0.6}}}),
                    std::invalid_argument);
    CHECK_NOTHROW(validate_spec({{1.0, -2.0}, {{-1.0, 0.0, 1.0}}}));
}

TEST_CASE("bridged law carries the noise onto every atom") {
    PantographSpec spec{{1.0}, {{2.0, 0.5, 0.25}, {-1.0, 0.0, 0.75}}};
    auto law = pantograph_to_archetypal(spec);
    REQUIRE(law.atoms().size() == 2);
    for (const auto& atom : law.atoms()) {
        const auto* h = std::get_if<PointPlusHypoexp>(&atom.shift);
        REQUIRE(h != nullptr);
        CHECK(h->kappas == std::vector<double>{1.0});
    }
    CHECK(law.atoms()[0].a == 2.0);
    CHECK(std::get<PointPlusHypoexp>(law.atoms()[0].shift).c == 0.5);
}

TEST_CASE("unit-rate bridge samples identically to the exponential shift") {
    ShiftLaw bridged = PointPlusHypoexp{-0.5, {1.0}};
    ShiftLaw direct = ExponentialFrom{-0.5};
    auto r1 = make_rng(77), r2 = make_rng(77);
    for (int i = 0; i < 1000; ++i) CHECK(sample_shift(bridged, r1) == sample_shift(direct, r2));
}

TEST_CASE("noise density closed values") {
    CHECK(xi_density({1.0}, 0.5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(xi_density({1.0}, -0.1) == 0.0);
    CHECK(xi_density({1.0, -1.0}, -1.0) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(xi_density({1.0, -1.0}, 1.0) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(xi_density({1.0, 1.0}, 2.0) == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(xi_density({1.0, 1.0}, -0.5) == 0.0);
}

TEST_CASE("noise density integrates to one with the right mean") {
    const std::vector<std::vector<double>> cases = {
        {1.0}, {-2.0}, {1.0, -1.0}, {1.0, 1.0}, {2.0, 3.0, 5.0}, {1.0, 1.0, 1.0}, {2.0, -3.0, 2.0}};
    for (const auto& ks : cases) {
        CAPTURE(ks.size());
        CAPTURE(ks[0]);
        double mean = 0.0;
        const double mass = density_mass(ks, mean);
        CHECK(std::fabs(mass - 1.0) <= 1e-6);
        double expect = 0.0;
        for (double k : ks) expect += 1.0 / k;
        CHECK(std::fabs(mean - expect) <= 2e-3);
    }
}

TEST_CASE("sampler agrees with the density in the mean") {
    const std::vector<double> ks{1.0, -2.0, 4.0};
    ShiftLaw shift = PointPlusHypoexp{0.0, ks};
    auto rng = make_rng(83);
    MeanAccumulator acc;
    for (int i = 0; i < 100000; ++i) acc.add(sample_shift(shift, rng));
    CHECK(std::fabs(acc.mean() - (1.0 - 0.5 + 0.25)) <= 3.0 * acc.stderr_of_mean());
}

TEST_CASE("sampler histogram matches the convolved density") {
    const std::vector<double> ks{1.0, 1.0, 1.0};  // forces the numeric path
    ShiftLaw shift = PointPlusHypoexp{0.0, ks};
    auto rng = make_rng(89);
    const double bin = 0.25, lo = 0.0;
    std::vector<double> counts(60, 0.0);
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const double v = sample_shift(shift, rng);
        const auto k = static_cast<std::size_t>((v - lo) / bin);
        if (k < counts.size()) counts[k] += 1.0;
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double mid = lo + (static_cast<double>(k) + 0.5) * bin;
        const double expect = xi_density(ks, mid);
        CHECK(std::fabs(counts[k] / (n * bin) - expect) <= 0.01);
    }
}

TEST_CASE("differential residual accepts constants and rejects a non-solution") {
    PantographSpec two{{1.0, -1.0}, {{2.0, 0.5, 0.3}, {0.5, -1.0, 0.7}}};
    auto c = sample_on_grid(-6.0, 6.0, 0.01, [](double) { return 2.5; });
    CHECK(ode_residual(c, two) <= 1e-12);

    // y' + y - y(-x) at y = 2cos(2 pi x) leaves -4 pi sin(2 pi x)
    PantographSpec refl{{1.0}, {{-1.0, 0.0, 1.0}}};
    auto y = sample_on_grid(-6.0, 6.0, 0.005,
                            [](double x) { return 2.0 * std::cos(2.0 * M_PI * x); });
    CHECK(ode_residual(y, refl) == doctest::Approx(4.0 * M_PI).epsilon(0.02));
}

TEST_CASE("opposite unit rates build the second-order operator") {
    // (1 + D)(1 - D) y = y - y''; for y = sin with phi = y the residual is
    // max |2 sin - sin| = 1
    PantographSpec spec{{1.0, -1.0}, {{1.0, 0.0, 1.0}}};
    auto y = sample_on_grid(-8.0, 8.0, 0.002, [](double x) { return std::sin(x); });
    CHECK(ode_residual(y, spec) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("coarse grids are rejected when a tolerance is requested") {
    PantographSpec spec{{1.0}, {{-1.0, 0.0, 1.0}}};
    auto y = sample_on_grid(-5.0, 5.0, 0.5, [](double x) { return std::sin(x); });
    CHECK_THROWS_AS(ode_residual(y, spec, 1e-6), GridTooCoarseError);
    CHECK_NOTHROW(ode_residual(y, spec));
}

TEST_CASE("variation of constants fixes constants") {
    PantographSpec spec{{1.0}, {{-1.0, 0.0, 1.0}}};
    auto y0 = sample_on_grid(-5.0, 5.0, 0.01, [](double) { return 1.5; });
    auto res = picard_variation_of_constants(y0, spec, 100, 1e-14);
    CHECK(res.trace.step_norms.size() == 1);
    CHECK(res.trace.step_norms[0] == 0.0);
    CHECK(sup_distance(res.y, y0) == 0.0);
}

TEST_CASE("one integration step is exact on affine input") {
    // phi(u) = -u is linear, so the piecewise-linear weights integrate it
    // exactly: T y = 1 - x - e^{x_min - x} including the tail closure
    PantographSpec spec{{1.0}, {{-1.0, 0.0, 1.0}}};
    auto lin = sample_on_grid(-10.0, 10.0, 0.01, [](double x) { return x; });
    auto one = picard_variation_of_constants(lin, spec, 1, 0.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < one.y.size(); ++i) {
        const double x = one.y.x_min() + 0.01 * static_cast<double>(i);
        worst = std::max(worst,
                         std::fabs(one.y.values()[i] - (1.0 - x - std::exp(-10.0 - x))));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("reflection equation collapses under variation of constants") {
    // seed dead at the edges so the tail closure is exact; an edge mismatch
    // pumps the neutral affine mode x -> 1 - x and stalls the iteration
    PantographSpec spec{{1.0}, {{-1.0, 0.0, 1.0}}};
    auto y0 = sample_on_grid(-10.0, 10.0, 0.005, [](double x) {
        const double ax = std::fabs(x);
        double t = 1.0;
        if (ax >= 8.0) {
            t = 0.0;
        } else if (ax > 5.0) {
            const double c = std::cos(0.5 * M_PI * (ax - 5.0) / 3.0);
            t = c * c;
        }
        return std::sin(2.0 * M_PI * x) * t;
    });
    auto res = picard_variation_of_constants(y0, spec, 200, 0.0);
    CHECK(dispersion(res.y, {-10.0, 10.0}) < 1e-3);
    CHECK(res.trace.final_residual < 1e-3);
}

TEST_CASE("variation of constants demands first order with unit rate") {
    auto y0 = sample_on_grid(-5.0, 5.0, 0.01, [](double x) { return std::sin(x); });
    CHECK_THROWS_AS(
        picard_variation_of_constants(y0, {{2.0}, {{-1.0, 0.0, 1.0}}}, 10, 1e-12),
        InapplicableError);
    CHECK_THROWS_AS(
        picard_variation_of_constants(y0, {{1.0, 1.0}, {{-1.0, 0.0, 1.0}}}, 10, 1e-12),
        InapplicableError);
}
