#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rescale/config.hpp"
#include "rescale/errors.hpp"

namespace fs = std::filesystem;
using namespace rescale;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config: " + path);
    json cfg;
    in >> cfg;
    if (!cfg.is_object()) throw std::invalid_argument("config root must be an object");
    return cfg;
}

std::uint64_t require_seed(const json& cfg, const Options& opt) {
    if (opt.seed) return *opt.seed;
    if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
    throw std::invalid_argument("stochastic commands need \"seed\" in the config or --seed");
}

fs::path resolve_out(const Options& opt) {
    std::string dir = opt.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("RESCALE_OUT_DIR")) dir = env;
        if (dir.empty()) dir = ".";
    }
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error("cannot create output directory " + p.string());
    return p;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    body(os);
    std::cout << "wrote " << path.string() << "\n";
}

void write_report(const fs::path& path, const json& report) {
    write_text(path, [&](std::ostream& os) { os << report.dump(2) << "\n"; });
}

void warn_cap_rate(double cap_rate) {
    if (cap_rate > 0.01)
        std::cerr << "warning: " << cap_rate * 100.0
                  << "% of paths hit the step cap; results are conditioned on stopping\n";
}

std::function<double(double)> seed_function(const std::string& name) {
    if (name == "sin") return [](double x) { return std::sin(x); };
    if (name == "cos") return [](double x) { return std::cos(x); };
    if (name == "sin2pi") return [](double x) { return std::sin(2.0 * M_PI * x); };
    if (name == "gaussian") return [](double x) { return std::exp(-0.5 * x * x); };
    if (name == "zero") return [](double) { return 0.0; };
    if (name == "one") return [](double) { return 1.0; };
    throw std::invalid_argument("unknown seed function: " + name);
}

int run_classify(const json& cfg, const Options& opt) {
    const auto law = law_from_json(cfg.at("law"));
    const json section = cfg.value("classify", json::object());
    const double tol_k = section.value("tol_k", 1e-9);
    const std::uint64_t seed = opt.seed ? *opt.seed : cfg.value("seed", std::uint64_t{1});
    const auto rep = classify_regime(law, tol_k, seed);
    json out = report_envelope(cfg, seed);
    out["report"] = regime_report_to_json(rep);
    write_report(resolve_out(opt) / "classify.json", out);
    std::cout << "regime: " << regime_name(rep.regime);
    if (rep.K) std::cout << " (K = " << *rep.K << ")";
    std::cout << "\n";
    return 0;
}

int run_simulate(const json& cfg, const Options& opt) {
    const auto law = law_from_json(cfg.at("law"));
    const json section = cfg.value("simulate", json::object());
    const double x0 = section.value("x0", 0.0);
    const auto rule = rule_from_json(section.value("rule", json{{"kind", "hit_zero"}}));
    const std::size_t n_paths = section.value("n_paths", std::size_t{10000});
    const std::uint64_t cap = section.value("cap", kDefaultStepCap);
    const std::uint64_t seed = require_seed(cfg, opt);

    const auto paths = run_paths(law, x0, rule, n_paths, cap, seed, opt.threads);
    const std::string stamp = csv_stamp(cfg, seed);
    const fs::path out = resolve_out(opt);
    write_text(out / "paths.csv",
               [&](std::ostream& os) { write_paths_csv(os, paths, stamp); });

    std::map<std::uint64_t, std::uint64_t> hist;
    MeanAccumulator acc;
    std::uint64_t capped = 0;
    for (const auto& p : paths) {
        if (p.status == PathStatus::Stopped) {
            ++hist[p.tau];
            acc.add(p.X_tau);
        } else {
            ++capped;
        }
    }
    write_text(out / "tau_hist.csv", [&](std::ostream& os) {
        os << stamp << "tau,count\n";
        for (const auto& [tau, count] : hist) os << tau << ',' << count << '\n';
    });

    const double cap_rate = static_cast<double>(capped) / static_cast<double>(n_paths);
    json report = report_envelope(cfg, seed);
    report["estimate"] = acc.count > 0 ? json(acc.mean()) : json(nullptr);
    report["stderr"] = acc.count > 0 ? json(acc.stderr_of_mean()) : json(nullptr);
    report["cap_rate"] = cap_rate;
    report["kept"] = acc.count;
    write_report(out / "simulate.json", report);
    warn_cap_rate(cap_rate);
    return 0;
}

int run_solve(const json& cfg, const Options& opt) {
    const auto law = law_from_json(cfg.at("law"));
    const json section = cfg.at("solve");
    const auto y0 = sample_on_grid(section.at("x_min").get<double>(),
                                   section.at("x_max").get<double>(),
                                   section.at("dx").get<double>(),
                                   seed_function(section.value("y0", "sin")));
    const std::size_t max_iter = section.value("max_iter", std::size_t{500});
    const double step_tol = section.value("step_tol", 0.0);
    const auto quad = quadrature_from_json(section.value("quadrature", json::object()));
    const std::uint64_t seed = opt.seed ? *opt.seed : cfg.value("seed", std::uint64_t{1});

    const auto result = picard_iterate(y0, law, max_iter, step_tol, quad, opt.threads);
    const std::string stamp = csv_stamp(cfg, seed);
    const fs::path out = resolve_out(opt);
    write_text(out / "solution.csv",
               [&](std::ostream& os) { write_grid_csv(os, result.y, stamp); });
    write_text(out / "trace.csv",
               [&](std::ostream& os) { write_trace_csv(os, result.trace, stamp); });

    json report = report_envelope(cfg, seed);
    report["grid"] = grid_header(result.y);
    report["iterations"] = result.trace.step_norms.size();
    report["final_residual"] = result.trace.final_residual;
    report["final_dispersion"] =
        result.trace.dispersions.empty() ? json(nullptr) : json(result.trace.dispersions.back());
    write_report(out / "solve.json", report);
    if (!result.trace.dispersions.empty())
        std::cout << "final dispersion " << result.trace.dispersions.back() << " after "
                  << result.trace.step_norms.size() << " iterations\n";
    return 0;
}

int run_upsilon(const json& cfg, const Options& opt) {
    const auto law = law_from_json(cfg.at("law"));
    require_supercritical_positive(law);
    const json section = cfg.value("upsilon", json::object());
    const std::size_t n_samples = section.value("n_samples", std::size_t{100000});
    const double eps_tail = section.value("eps_tail", 1e-12);
    const std::size_t cap = section.value("cap", std::size_t{kDefaultStepCap});
    const std::vector<double> probes =
        section.value("probes", std::vector<double>{-1.0, 0.0, 1.0});
    const std::size_t n_mc = section.value("n_mc", std::size_t{10000});
    const std::uint64_t seed = require_seed(cfg, opt);

    const auto batch = sample_upsilon_many(law, n_samples, eps_tail, cap, seed, opt.threads);
    const EmpiricalCDF cdf = build_cdf(batch.values);
    const std::string stamp = csv_stamp(cfg, seed);
    const fs::path out = resolve_out(opt);
    write_text(out / "samples.csv",
               [&](std::ostream& os) { write_samples_csv(os, batch.values, "upsilon", stamp); });
    write_text(out / "cdf.csv", [&](std::ostream& os) { write_cdf_csv(os, cdf, stamp); });

    json report = report_envelope(cfg, seed);
    report["n"] = cdf.size();
    report["cap_rate"] = batch.cap_rate;
    report["mean_terms"] = batch.mean_terms;
    if (!probes.empty()) {
        const auto ver = verify_solution(cdf, law, probes, n_mc, seed + 1,
                                         static_cast<int>(opt.threads));
        json rows = json::array();
        for (std::size_t i = 0; i < probes.size(); ++i)
            rows.push_back(json{{"probe", probes[i]}, {"residual", ver.residuals[i]}});
        report["verification"] = std::move(rows);
        report["max_residual"] = ver.max_residual;
        report["combined_stderr"] = ver.combined_stderr;
        std::cout << "max stopped-equation residual " << ver.max_residual << " over "
                  << probes.size() << " probes\n";
    }
    write_report(out / "upsilon.json", report);
    warn_cap_rate(batch.cap_rate);
    return 0;
}

int run_pantograph(const json& cfg, const Options& opt) {
    const auto spec = pantograph_from_json(cfg.at("pantograph"));
    const auto bridged = pantograph_to_archetypal(spec);
    const std::uint64_t seed = opt.seed ? *opt.seed : cfg.value("seed", std::uint64_t{1});
    const fs::path out = resolve_out(opt);

    json bridge = report_envelope(cfg, seed);
    bridge["law"] = law_to_json(bridged);
    write_report(out / "bridged_law.json", bridge);

    const json section = cfg.at("solve");
    const auto y0 = sample_on_grid(section.at("x_min").get<double>(),
                                   section.at("x_max").get<double>(),
                                   section.at("dx").get<double>(),
                                   seed_function(section.value("y0", "sin")));
    const std::size_t max_iter = section.value("max_iter", std::size_t{200});
    const double step_tol = section.value("step_tol", 0.0);

    // first-order unit-rate problems integrate exactly; anything else goes
    // through the averaged form with shift quadrature
    const bool direct = spec.kappas.size() == 1 && spec.kappas[0] == 1.0;
    const std::string route = direct ? "variation_of_constants" : "averaged_operator";
    const PicardResult result =
        direct ? picard_variation_of_constants(y0, spec, max_iter, step_tol)
               : picard_iterate(y0, bridged, max_iter, step_tol,
                                quadrature_from_json(section.value("quadrature", json::object())),
                                opt.threads);
    const std::string stamp = csv_stamp(cfg, seed);
    write_text(out / "solution.csv",
               [&](std::ostream& os) { write_grid_csv(os, result.y, stamp); });
    write_text(out / "trace.csv",
               [&](std::ostream& os) { write_trace_csv(os, result.trace, stamp); });

    json report = report_envelope(cfg, seed);
    report["route"] = route;
    report["grid"] = grid_header(result.y);
    report["iterations"] = result.trace.step_norms.size();
    report["final_residual"] = result.trace.final_residual;
    report["final_dispersion"] =
        result.trace.dispersions.empty() ? json(nullptr) : json(result.trace.dispersions.back());
    report["ode_residual"] = ode_residual(result.y, spec);
    write_report(out / "pantograph.json", report);
    std::cout << "differential residual " << report["ode_residual"].get<double>() << " via "
              << route << "\n";
    return 0;
}

int run_lattice(const json& cfg, const Options& opt) {
    const auto law = law_from_json(cfg.at("law"));
    const json section = cfg.value("lattice", json::object());
    const fs::path out = resolve_out(opt);
    json report;
    if (law.q_lattice()) {
        const std::size_t n_theta = section.value("n_theta", std::size_t{12});
        const std::size_t n_paths = section.value("n_paths", std::size_t{5000});
        const std::uint64_t cap = section.value("cap", kDefaultStepCap);
        const std::uint64_t seed =
            n_paths > 0 ? require_seed(cfg, opt)
                        : (opt.seed ? *opt.seed : cfg.value("seed", std::uint64_t{1}));
        const auto rep =
            q_lattice_report(law, n_theta, n_paths, seed, static_cast<int>(opt.threads), cap);
        report = report_envelope(cfg, seed);
        report["q_lattice"] = q_lattice_report_to_json(rep);
        warn_cap_rate(rep.cap_rate);
        std::cout << (rep.critical ? "critical lattice walk\n" : "non-critical lattice walk\n");
    } else {
        const std::uint64_t seed = opt.seed ? *opt.seed : cfg.value("seed", std::uint64_t{1});
        const auto rep = classify_unit_modulus(law);
        report = report_envelope(cfg, seed);
        report["unit_modulus"] = unit_modulus_report_to_json(rep);
        std::cout << "bounded continuous solutions: " << unit_modulus_case_name(rep.kind)
                  << "\n";
    }
    write_report(out / "lattice.json", report);
    return 0;
}

int run_verify(const json& cfg, const Options& opt) {
    const auto law = law_from_json(cfg.at("law"));
    const json section = cfg.at("verify");
    const std::string solution_path = section.at("solution").get<std::string>();
    std::ifstream in(solution_path);
    if (!in) throw std::invalid_argument("cannot read solution grid: " + solution_path);
    const GridFunction y = read_grid_csv(in);

    const auto rule = rule_from_json(section.value("rule", json{{"kind", "hit_zero"}}));
    const std::vector<double> probes = section.at("probes").get<std::vector<double>>();
    if (probes.empty()) throw std::invalid_argument("verify needs at least one probe");
    const std::size_t n_paths = section.value("n_paths", std::size_t{100000});
    const std::uint64_t cap = section.value("cap", kDefaultStepCap);
    const std::uint64_t seed = require_seed(cfg, opt);

    json rows = json::array();
    double max_residual = 0.0, worst_cap = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto est = stopped_mean([&y](double x) { return y(x); }, law, probes[i], rule,
                                      n_paths, cap, seed + i, opt.threads);
        const double residual = std::fabs(est.estimate - y(probes[i]));
        max_residual = std::max(max_residual, residual);
        worst_cap = std::max(worst_cap, est.cap_rate);
        rows.push_back({{"probe", probes[i]},
                        {"value", y(probes[i])},
                        {"estimate", est.estimate},
                        {"stderr", est.std_error},
                        {"residual", residual},
                        {"cap_rate", est.cap_rate}});
    }
    json report = report_envelope(cfg, seed);
    report["rule"] = rule_to_json(rule);
    report["probes"] = std::move(rows);
    report["max_residual"] = max_residual;
    write_report(resolve_out(opt) / "verify.json", report);
    warn_cap_rate(worst_cap);
    std::cout << "max stopped-equation residual " << max_residual << " over " << probes.size()
              << " probes\n";
    return 0;
}

int dispatch(const std::string& command, const Options& opt) {
    json cfg;
    try {
        cfg = load_config(opt.config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    try {
        if (command == "classify") return run_classify(cfg, opt);
        if (command == "simulate") return run_simulate(cfg, opt);
        if (command == "solve") return run_solve(cfg, opt);
        if (command == "upsilon") return run_upsilon(cfg, opt);
        if (command == "pantograph") return run_pantograph(cfg, opt);
        if (command == "lattice") return run_lattice(cfg, opt);
        if (command == "verify") return run_verify(cfg, opt);
        std::cerr << "unknown command: " << command << "\n";
        return 1;
    } catch (const Error& e) {
        // the law is fine but the command cannot run on it: report the regime
        std::cerr << "precondition violated: " << e.what() << "\n";
        try {
            if (cfg.contains("law")) {
                const auto law = law_from_json(cfg.at("law"));
                std::cerr << regime_report_to_json(classify_regime(law)).dump(2) << "\n";
            }
        } catch (...) {  // the report is best-effort context
        }
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the averaging equation with rescaling "
                 "y(x) = E y(alpha (x - beta))"};
    app.require_subcommand(1);

    Options opt;
    std::string rc_seed;
    for (const auto& name :
         {"classify", "simulate", "solve", "upsilon", "pantograph", "lattice", "verify"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "experiment configuration file")
            ->required();
        sub->add_option("--out", opt.out_dir,
                        "output directory (default: $RESCALE_OUT_DIR or the working "
                        "directory)");
        sub->add_option("--seed", rc_seed, "master seed; overrides the config value");
        sub->add_option("--threads", opt.threads, "worker threads for sampling and quadrature");
    }

    CLI11_PARSE(app, argc, argv);
    if (!rc_seed.empty()) opt.seed = std::stoull(rc_seed);
    return dispatch(app.get_subcommands().front()->get_name(), opt);
}
