#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rescale/chain.hpp"
#include "rescale/config.hpp"
#include "rescale/lattice.hpp"
#include "rescale/laws.hpp"
#include "rescale/pantograph.hpp"
#include "rescale/solver.hpp"
#include "rescale/supercritical.hpp"

namespace fs = std::filesystem;
using namespace rescale;

namespace {

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

  private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void report(int n, const char* label, bool ok, const std::string& detail) {
    std::printf("%s criterion %d %s (%s)\n", ok ? "PASS" : "FAIL", n, label, detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, "criterion ", n, ": ", detail);
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// every bundled law, with pantograph specs bridged to their averaged form
std::vector<std::pair<std::string, CoefficientLaw>> bundled_laws() {
    std::vector<std::pair<std::string, CoefficientLaw>> laws;
    for (const auto& entry : fs::directory_iterator(RESCALE_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        json cfg;
        in >> cfg;
        const std::string name = entry.path().stem().string();
        if (cfg.contains("law"))
            laws.emplace_back(name, law_from_json(cfg.at("law")));
        else
            laws.emplace_back(name, pantograph_to_archetypal(pantograph_from_json(
                                        cfg.at("pantograph"))));
    }
    return laws;
}

CoefficientLaw bernoulli_doubling() {
    return CoefficientLaw{{{2.0, 0.5, PointMass{1.0}}, {2.0, 0.5, PointMass{-1.0}}}};
}

CoefficientLaw reflection_two_point() {
    return CoefficientLaw{{{-1.0, 1.0 / 3.0, PointMass{1.0}},
                           {-1.0, 2.0 / 3.0, PointMass{-1.0}}}};
}

CoefficientLaw canonical_critical() {
    return CoefficientLaw{{{2.0, 0.5, PointMass{1.0}}, {0.5, 0.5, PointMass{0.0}}},
                          QLattice{2.0, {1, -1}}};
}

double uniform_limit_cdf(double x) { return std::clamp((x + 2.0) / 4.0, 0.0, 1.0); }

// criterion 5 and the frozen artifact share one experiment
PicardResult critical_collapse_run() {
    const auto y0 = sample_on_grid(-20.0, 20.0, 0.01, [](double x) { return std::sin(x); });
    return picard_iterate(y0, canonical_critical(), 500, 0.0, {}, 4);
}

const char* kCurveFile = RESCALE_TEST_DATA_DIR "/collapse_curve.csv";

int freeze_collapse_curve() {
    const auto result = critical_collapse_run();
    fs::create_directories(RESCALE_TEST_DATA_DIR);
    std::ofstream os(kCurveFile);
    if (!os) {
        std::fprintf(stderr, "cannot write %s\n", kCurveFile);
        return 1;
    }
    os << "iter,dispersion\n";
    const std::size_t n = std::min<std::size_t>(100, result.trace.dispersions.size());
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", result.trace.dispersions[i]);
        os << (i + 1) << ',' << buf << '\n';
    }
    std::printf("froze %zu collapse-curve rows to %s\n", n, kCurveFile);
    return 0;
}

// cos^2 rolloff: 1 inside |x| <= 15, dead beyond |x| >= 20; a seed that
// vanishes at the boundary keeps the truncated-domain iteration free of the
// neutral edge mode that a live boundary value would pump
double tapered_carrier(double x) {
    const double ax = std::fabs(x);
    if (ax >= 20.0) return 0.0;
    double t = 1.0;
    if (ax > 15.0) {
        const double c = std::cos(M_PI * (ax - 15.0) / 10.0);
        t = c * c;
    }
    return t * std::sin(2.0 * M_PI * x);
}

}  // namespace

TEST_CASE("criterion 1") {
    Stopwatch timer;
    QuadratureSettings quad;
    quad.clamp_bias_tol = 1.0;  // constants carry no clamp bias on any window
    const auto laws = bundled_laws();
    double worst = 0.0;
    for (const auto& [name, law] : laws) {
        const auto c = sample_on_grid(-10.0, 10.0, 0.05, [](double) { return 0.7; });
        worst = std::max(worst, residual_sup(c, law, quad));
    }
    const double elapsed = timer.seconds();
    const bool ok = laws.size() >= 13 && worst <= 1e-12 && elapsed < 1.0;
    report(1, "constant fixed point", ok,
           "max residual " + num(worst) + " vs 1e-12 across " + std::to_string(laws.size()) +
               " bundled laws, " + num(elapsed) + "s");
}

TEST_CASE("criterion 2") {
    Stopwatch timer;
    const auto law = bernoulli_doubling();
    const auto batch = sample_upsilon_many(law, 100000, 1e-12, kDefaultStepCap, 20260822, 4);
    const auto cdf = build_cdf(batch.values);
    const double ks = ks_distance(cdf, uniform_limit_cdf);
    MeanAccumulator m2;
    MeanAccumulator m1;
    for (double v : batch.values) {
        m1.add(v);
        m2.add(v * v);
    }
    const double var = m2.mean() - m1.mean() * m1.mean();
    const auto ver =
        verify_solution(cdf, law, {-1.5, -0.5, 0.0, 0.5, 1.5}, 20000, 20260823, 4);
    const double elapsed = timer.seconds();
    const bool ok = ks < 0.01 && ver.max_residual < 0.02 &&
                    std::fabs(var - 4.0 / 3.0) < 0.02 && elapsed < 10.0;
    report(2, "supercritical construction", ok,
           "ks " + num(ks) + " vs 0.01, residual " + num(ver.max_residual) +
               " vs 0.02, variance " + num(var) + " vs 4/3 +- 0.02, " + num(elapsed) + "s");
}

TEST_CASE("criterion 3") {
    Stopwatch timer;
    const auto law = reflection_two_point();
    const auto y = [](double x) { return 2.0 * std::cos(2.0 * M_PI * x); };

    // exact enumeration of the two-step composite: D_2 = b_1 - b_2
    double p_zero = 0.0, p_plus = 0.0, p_minus = 0.0;
    for (const auto& first : law.atoms())
        for (const auto& second : law.atoms()) {
            const double d = std::get<PointMass>(first.shift).b -
                             std::get<PointMass>(second.shift).b;
            const double pr = first.p * second.p;
            if (d == 0.0) p_zero += pr;
            if (d == 2.0) p_plus += pr;
            if (d == -2.0) p_minus += pr;
        }
    const bool enumeration_ok = std::fabs(p_zero - 5.0 / 9.0) < 1e-15 &&
                                std::fabs(p_plus - 2.0 / 9.0) < 1e-15 &&
                                std::fabs(p_minus - 2.0 / 9.0) < 1e-15;

    double worst = 0.0, worst_band = 0.0;
    for (double x : {0.0, 0.3, 1.7}) {
        const auto est = stopped_mean(y, law, x, HitOne{}, 100000, 100, 20260824, 4);
        const double resid = std::fabs(est.estimate - y(x));
        const double band = 3.0 * est.std_error + 1e-12;
        if (resid / band > worst / std::max(worst_band, 1e-300)) {
            worst = resid;
            worst_band = band;
        }
    }
    const double elapsed = timer.seconds();
    const bool ok = enumeration_ok && worst <= worst_band && elapsed < 10.0;
    report(3, "stopped equation oracle", ok,
           "composite shift mass {5/9, 2/9, 2/9} " +
               std::string(enumeration_ok ? "exact" : "wrong") + ", worst residual " +
               num(worst) + " vs " + num(worst_band) + ", " + num(elapsed) + "s");
}

TEST_CASE("criterion 4") {
    Stopwatch timer;
    const double p1 = 0.4, q1 = 0.6;
    CoefficientLaw mixed{{{1.0, p1, PointMass{1.0}}, {-1.0, q1, PointMass{-1.0}}}};
    const std::size_t n_paths = 100000;
    const auto dist = tau_distribution(mixed, HitOne{}, n_paths, 200, 20260825);
    double worst = 0.0;
    for (std::size_t n = 1; n <= 10; ++n) {
        const double expected = n == 1 ? p1 : q1 * q1 * std::pow(p1, static_cast<double>(n - 2));
        const double got = dist.pmf[n - 1];
        const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n_paths));
        worst = std::max(worst, std::fabs(got - expected) / (3.0 * se));
    }
    const auto pure = tau_distribution(reflection_two_point(), HitOne{}, 10000, 10, 20260826);
    const bool pure_ok = pure.pmf[1] == 1.0 && pure.pmf[0] == 0.0;
    const double elapsed = timer.seconds();
    const bool ok = worst <= 1.0 && pure_ok && elapsed < 10.0;
    report(4, "return time distribution", ok,
           "worst pmf deviation " + num(worst) + " of the three-sigma band, reflection pmf(2) " +
               (pure_ok ? "= 1 exact" : "wrong") + ", " + num(elapsed) + "s");
}

TEST_CASE("criterion 5") {
    Stopwatch timer;
    const auto result = critical_collapse_run();
    const auto& disp = result.trace.dispersions;
    const double final_disp = disp.empty() ? 1e300 : disp.back();

    // regression against the frozen collapse curve: stay inside a 20% band
    // wherever the frozen value is above the noise floor
    bool curve_ok = true;
    std::size_t rows = 0;
    double worst_ratio = 1.0;
    std::ifstream frozen(kCurveFile);
    std::string line;
    std::getline(frozen, line);  // header
    while (std::getline(frozen, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const std::size_t iter = std::stoul(line.substr(0, comma));
        const double want = std::stod(line.substr(comma + 1));
        if (iter > disp.size()) {
            curve_ok = false;
            break;
        }
        ++rows;
        const double got = disp[iter - 1];
        if (want > 1e-14) {
            const double ratio = got / want;
            worst_ratio = std::max({worst_ratio, ratio, want / std::max(got, 1e-300)});
            if (ratio > 1.2 || ratio < 1.0 / 1.2) curve_ok = false;
        } else if (got > 1e-13) {
            curve_ok = false;
        }
    }
    curve_ok = curve_ok && rows >= 100;
    const double elapsed = timer.seconds();
    const bool ok = final_disp < 1e-2 && curve_ok && elapsed < 60.0;
    report(5, "critical lattice collapse", ok,
           "final dispersion " + num(final_disp) + " vs 1e-2, " + std::to_string(rows) +
               " frozen rows within x" + num(worst_ratio) + " of band 1.2, " + num(elapsed) +
               "s");
}

TEST_CASE("criterion 6") {
    Stopwatch timer;
    const auto canon = q_lattice_report(canonical_critical(), 50, 0, 0);
    const bool canon_ok = std::fabs(canon.theta[0] - 1.0) <= 1e-12 &&
                          std::fabs(canon.theta[1] - 1.5) <= 1e-12 &&
                          canon.theta_limit && std::fabs(*canon.theta_limit - 2.0) <= 1e-12;

    // the two evaluation orders are asserted against each other at 1e-10
    // inside the report; a throw here fails the criterion
    std::mt19937_64 rng(20260827);
    std::uniform_real_distribution<double> dq(1.2, 3.0);
    std::uniform_int_distribution<int> dm(1, 4);
    std::uniform_real_distribution<double> db(-2.0, 2.0);
    std::size_t laws_checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double q = dq(rng);
        const int u = dm(rng), v = dm(rng);
        const double pu = static_cast<double>(v) / static_cast<double>(u + v);
        double b1 = db(rng), b2 = db(rng);
        const double a1 = std::pow(q, u), a2 = std::pow(q, -v);
        if (std::fabs(b1 / (1.0 - 1.0 / a1) - b2 / (1.0 - 1.0 / a2)) < 0.1) b2 += 1.0;
        CoefficientLaw law{{{a1, pu, PointMass{b1}}, {a2, 1.0 - pu, PointMass{b2}}},
                           QLattice{q, {u, -v}}};
        const auto rep = q_lattice_report(law, 50, 0, 0);
        if (rep.critical && rep.theta.size() == 50) ++laws_checked;
    }
    const double elapsed = timer.seconds();
    const bool ok = canon_ok && laws_checked == 100 && elapsed < 1.0;
    report(6, "support point machinery", ok,
           "canonical theta (1, 1.5, limit 2) " + std::string(canon_ok ? "exact" : "wrong") +
               ", dual forms agree on " + std::to_string(laws_checked) + "/100 laws, " +
               num(elapsed) + "s");
}

TEST_CASE("criterion 7") {
    Stopwatch timer;
    PantographSpec spec;
    spec.kappas = {1.0};
    spec.base = {{-1.0, 0.0, 1.0}};
    const auto y0 = sample_on_grid(-30.0, 30.0, 0.01, tapered_carrier);

    const auto direct = picard_variation_of_constants(y0, spec, 200, 0.0);
    QuadratureSettings quad;
    quad.node_spacing = 0.02;
    quad.clamp_bias_tol = 1.0;  // residual windows are not probed here
    const auto averaged =
        picard_iterate(y0, pantograph_to_archetypal(spec), 200, 0.0, quad, 4);

    double route_gap = 0.0;
    for (double x = -10.0; x <= 10.0; x += 0.01)
        route_gap = std::max(route_gap, std::fabs(direct.y(x) - averaged.y(x)));
    const Window w{-10.0, 10.0};
    const double disp_direct = dispersion(direct.y, w);
    const double disp_averaged = dispersion(averaged.y, w);
    const double budget = 2.0 * (0.02 * 0.02 + 0.01 * 0.01);  // both quadrature scales
    const double elapsed = timer.seconds();
    const bool ok = route_gap < budget && disp_direct < 1e-3 && disp_averaged < 1e-3 &&
                    elapsed < 30.0;
    report(7, "pantograph bridge", ok,
           "route gap " + num(route_gap) + " vs " + num(budget) + ", dispersions " +
               num(disp_direct) + " and " + num(disp_averaged) + " vs 1e-3, " + num(elapsed) +
               "s");
}

TEST_CASE("criterion 8") {
    Stopwatch timer;
    struct Case {
        std::vector<double> kappas;
        double lo, hi;
        std::function<double(double)> cdf;
        const char* name;
    };
    const std::vector<Case> cases = {
        {{1.0}, 0.0, 8.0, [](double t) { return t <= 0.0 ? 0.0 : 1.0 - std::exp(-t); },
         "one-sided"},
        {{1.0, -1.0}, -8.0, 8.0,
         [](double t) { return t < 0.0 ? 0.5 * std::exp(t) : 1.0 - 0.5 * std::exp(-t); },
         "two-sided"},
        {{1.0, 1.0}, 0.0, 12.0,
         [](double t) { return t <= 0.0 ? 0.0 : 1.0 - (1.0 + t) * std::exp(-t); }, "order two"},
    };
    double worst = 0.0;
    std::string worst_name;
    const std::size_t n_samples = 1000000;
    const double bin = 0.2;
    std::uint64_t seed = 20260828;
    for (const auto& c : cases) {
        const ShiftLaw noise = PointPlusHypoexp{0.0, c.kappas};
        auto rng = make_rng(seed++);
        const std::size_t n_bins =
            static_cast<std::size_t>(std::lround((c.hi - c.lo) / bin));
        std::vector<double> counts(n_bins, 0.0);
        for (std::size_t i = 0; i < n_samples; ++i) {
            const double t = sample_shift(noise, rng);
            const auto b = static_cast<long long>(std::floor((t - c.lo) / bin));
            if (b >= 0 && b < static_cast<long long>(n_bins))
                counts[static_cast<std::size_t>(b)] += 1.0;
        }
        double dev = 0.0;
        for (std::size_t b = 0; b < n_bins; ++b) {
            const double lo = c.lo + static_cast<double>(b) * bin;
            const double expected = (c.cdf(lo + bin) - c.cdf(lo)) / bin;
            const double got = counts[b] / (static_cast<double>(n_samples) * bin);
            dev = std::max(dev, std::fabs(got - expected));
        }
        if (dev > worst) {
            worst = dev;
            worst_name = c.name;
        }
    }
    const double elapsed = timer.seconds();
    const bool ok = worst < 0.01 && elapsed < 10.0;
    report(8, "noise densities", ok,
           "sup density deviation " + num(worst) + " (" + worst_name + ") vs 0.01, " +
               num(elapsed) + "s");
}

TEST_CASE("criterion 9") {
    Stopwatch timer;
    CoefficientLaw vanishing{{{0.0, 1.0 / 3.0, PointMass{0.0}}, {2.0, 2.0 / 3.0, PointMass{0.0}}}};
    const auto rep_zero = classify_regime(vanishing);
    const bool zero_ok = rep_zero.regime == Regime::DegenerateZero &&
                         std::fabs(rep_zero.p_zero - 1.0 / 3.0) <= 1e-15;

    // absorption count is geometric: P(tau > n) equals the mass of paths with
    // every factor nonzero
    const std::size_t n_paths = 100000;
    const auto dist = tau_distribution(vanishing, HitZero{}, n_paths, 100, 20260829);
    double worst = 0.0;
    for (std::size_t n = 1; n <= 8; ++n) {
        const double expected = std::pow(2.0 / 3.0, static_cast<double>(n - 1)) / 3.0;
        const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n_paths));
        worst = std::max(worst, std::fabs(dist.pmf[n - 1] - expected) / (3.0 * se));
    }

    CoefficientLaw resonant{{{2.0, 0.5, PointMass{0.5}}, {0.5, 0.5, PointMass{-1.0}}}};
    const auto rep_res = classify_regime(resonant);
    const bool res_ok = rep_res.regime == Regime::Resonant && rep_res.resonance &&
                        std::fabs(*rep_res.resonance - 1.0) <= 1e-12;
    const double elapsed = timer.seconds();
    const bool ok = zero_ok && worst <= 1.0 && res_ok && elapsed < 5.0;
    report(9, "degenerate guards", ok,
           std::string("vanishing-scale regime ") + (zero_ok ? "detected" : "missed") +
               ", geometric tail deviation " + num(worst) + " of band, resonance c=1 " +
               (res_ok ? "detected" : "missed") + ", " + num(elapsed) + "s");
}

TEST_CASE("criterion 10") {
    Stopwatch timer;
    const auto law = bernoulli_doubling();
    double worst = 0.0;
    for (double x : {-1.0, 0.0, 1.0}) {
        const double est = estimate_escape_probability(law, x, 0.0, 60, 100000, 20260830, 4);
        worst = std::max(worst, std::fabs(est - uniform_limit_cdf(x)));
    }
    const double elapsed = timer.seconds();
    const bool ok = worst < 0.02 && elapsed < 20.0;
    report(10, "escape probability", ok,
           "max gap to the limit law " + num(worst) + " vs 0.02, " + num(elapsed) + "s");
}

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i)
        if (std::string(argv[i]) == "--freeze-collapse-curve") return freeze_collapse_curve();
    doctest::Context context(argc, argv);
    return context.run();
}
