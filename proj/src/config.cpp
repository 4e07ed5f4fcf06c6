#include "rescale/config.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rescale {

namespace {

// shortest representation that round-trips a double; keeps csv output both
// plot-ready and byte-stable across reruns
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    for (int prec = 1; prec < 17; ++prec) {
        char cand[32];
        std::snprintf(cand, sizeof cand, "%.*g", prec, v);
        std::sscanf(cand, "%lf", &back);
        if (back == v) return cand;
    }
    return buf;
}

json optional_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

ShiftLaw shift_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "point") return PointMass{j.at("b").get<double>()};
    if (kind == "exponential_from") return ExponentialFrom{j.at("c").get<double>()};
    if (kind == "uniform") return Uniform{j.at("lo").get<double>(), j.at("hi").get<double>()};
    if (kind == "point_plus_hypoexp")
        return PointPlusHypoexp{j.at("c").get<double>(),
                                j.at("kappas").get<std::vector<double>>()};
    throw std::invalid_argument("unknown shift kind: " + kind);
}

json shift_to_json(const ShiftLaw& shift) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return {{"kind", "point"}, {"b", s.b}};
            } else if constexpr (std::is_same_v<T, ExponentialFrom>) {
                return {{"kind", "exponential_from"}, {"c", s.c}};
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return {{"kind", "uniform"}, {"lo", s.lo}, {"hi", s.hi}};
            } else {
                return {{"kind", "point_plus_hypoexp"}, {"c", s.c}, {"kappas", s.kappas}};
            }
        },
        shift);
}

CoefficientLaw law_from_json(const json& j) {
    std::vector<Atom> atoms;
    for (const auto& ja : j.at("atoms")) {
        Atom atom;
        atom.a = ja.at("a").get<double>();
        atom.p = ja.at("p").get<double>();
        atom.shift = shift_from_json(ja.at("shift"));
        atoms.push_back(std::move(atom));
    }
    std::optional<QLattice> lattice;
    if (j.contains("q_lattice") && !j.at("q_lattice").is_null()) {
        const auto& jl = j.at("q_lattice");
        lattice = QLattice{jl.at("q").get<double>(), jl.at("m").get<std::vector<long long>>()};
    }
    return CoefficientLaw{std::move(atoms), std::move(lattice)};
}

json law_to_json(const CoefficientLaw& law) {
    json atoms = json::array();
    for (const auto& atom : law.atoms())
        atoms.push_back({{"a", atom.a}, {"p", atom.p}, {"shift", shift_to_json(atom.shift)}});
    json j{{"atoms", std::move(atoms)}};
    if (law.q_lattice())
        j["q_lattice"] = {{"q", law.q_lattice()->q}, {"m", law.q_lattice()->m}};
    return j;
}

PantographSpec pantograph_from_json(const json& j) {
    PantographSpec spec;
    spec.kappas = j.at("kappas").get<std::vector<double>>();
    for (const auto& ja : j.at("atoms"))
        spec.base.push_back(
            {ja.at("a").get<double>(), ja.at("c").get<double>(), ja.at("p").get<double>()});
    validate_spec(spec);
    return spec;
}

json pantograph_to_json(const PantographSpec& spec) {
    json atoms = json::array();
    for (const auto& atom : spec.base)
        atoms.push_back({{"a", atom.a}, {"c", atom.c}, {"p", atom.p}});
    return {{"kappas", spec.kappas}, {"atoms", std::move(atoms)}};
}

StoppingRule rule_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "hit_zero") return HitZero{};
    if (kind == "hit_one") return HitOne{};
    if (kind == "hit_positive") return HitPositive{};
    if (kind == "lattice_return") return LatticeReturn{};
    if (kind == "small_modulus") return SmallModulus{j.at("M").get<double>()};
    if (kind == "fixed_horizon") return FixedHorizon{j.at("n").get<std::uint64_t>()};
    throw std::invalid_argument("unknown stopping rule: " + kind);
}

json rule_to_json(const StoppingRule& rule) {
    return std::visit(
        [](const auto& r) -> json {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, HitZero>) {
                return {{"kind", "hit_zero"}};
            } else if constexpr (std::is_same_v<T, HitOne>) {
                return {{"kind", "hit_one"}};
            } else if constexpr (std::is_same_v<T, HitPositive>) {
                return {{"kind", "hit_positive"}};
            } else if constexpr (std::is_same_v<T, LatticeReturn>) {
                return {{"kind", "lattice_return"}};
            } else if constexpr (std::is_same_v<T, SmallModulus>) {
                return {{"kind", "small_modulus"}, {"M", r.M}};
            } else {
                return {{"kind", "fixed_horizon"}, {"n", r.n}};
            }
        },
        rule);
}

QuadratureSettings quadrature_from_json(const json& j) {
    QuadratureSettings q;
    if (j.contains("tail_tol")) q.tail_tol = j.at("tail_tol").get<double>();
    if (j.contains("node_spacing")) q.node_spacing = j.at("node_spacing").get<double>();
    if (j.contains("renormalize")) q.renormalize = j.at("renormalize").get<bool>();
    if (j.contains("clamp_bias_tol")) q.clamp_bias_tol = j.at("clamp_bias_tol").get<double>();
    return q;
}

json regime_report_to_json(const RegimeReport& rep) {
    return {{"regime", regime_name(rep.regime)},
            {"p_zero", rep.p_zero},
            {"p_unit_modulus", rep.p_unit_modulus},
            {"resonance", optional_to_json(rep.resonance)},
            {"K", optional_to_json(rep.K)},
            {"log_beta_moment", rep.log_beta_moment},
            {"log_beta_moment_finite", rep.log_beta_moment_finite}};
}

json span_report_to_json(const SpanReport& rep) {
    return {{"arithmetic", rep.arithmetic},
            {"lambda", optional_to_json(rep.lambda)},
            {"lambda0", optional_to_json(rep.lambda0)},
            {"degenerate", rep.degenerate}};
}

json unit_modulus_report_to_json(const UnitModulusReport& rep) {
    return {{"case", unit_modulus_case_name(rep.kind)},
            {"lambda", optional_to_json(rep.lambda)},
            {"lambda0", optional_to_json(rep.lambda0)},
            {"x0", optional_to_json(rep.x0)},
            {"reflected_span_convention", rep.reflected_span_convention}};
}

json q_lattice_report_to_json(const QLatticeReport& rep) {
    json rho = json::array();
    for (const auto& r : rep.rho) rho.push_back(optional_to_json(r));
    json j{{"critical", rep.critical},
           {"rho", std::move(rho)},
           {"resonant", optional_to_json(rep.resonant)},
           {"k", rep.k},
           {"relabel", rep.relabel},
           {"s", rep.s},
           {"theta", rep.theta},
           {"theta_limit", optional_to_json(rep.theta_limit)},
           {"cap_rate", rep.cap_rate}};
    j["empirical_span"] =
        rep.empirical_span ? span_report_to_json(*rep.empirical_span) : json(nullptr);
    return j;
}

std::string config_hash(const json& config) {
    const std::string dump = config.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json report_envelope(const json& config, std::uint64_t seed) {
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return {{"config_hash", config_hash(config)}, {"seed", seed}, {"generated_at", stamp}};
}

std::string csv_stamp(const json& config, std::uint64_t seed) {
    return "# config_hash=" + config_hash(config) + " seed=" + std::to_string(seed) + "\n";
}

json grid_header(const GridFunction& y) {
    return {{"x_min", y.x_min()},
            {"dx", y.dx()},
            {"n", y.size()},
            {"extension", "clamp"}};
}

void write_grid_csv(std::ostream& os, const GridFunction& y, const std::string& stamp) {
    os << stamp << "x,y\n";
    for (std::size_t i = 0; i < y.size(); ++i)
        os << fmt(y.x_min() + static_cast<double>(i) * y.dx()) << ',' << fmt(y.values()[i])
           << '\n';
}

GridFunction read_grid_csv(std::istream& is) {
    std::vector<double> xs, ys;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("grid csv rows need two columns");
        xs.push_back(std::stod(line.substr(0, comma)));
        ys.push_back(std::stod(line.substr(comma + 1)));
    }
    if (xs.size() < 2) throw std::invalid_argument("grid csv needs at least two rows");
    const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    if (!(dx > 0.0)) throw std::invalid_argument("grid csv x column must increase");
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (std::fabs(xs[i] - (xs.front() + static_cast<double>(i) * dx)) > 1e-9 * (1.0 + dx))
            throw std::invalid_argument("grid csv x column must be uniformly spaced");
    return GridFunction(xs.front(), dx, std::move(ys));
}

void write_trace_csv(std::ostream& os, const IterationTrace& trace, const std::string& stamp) {
    os << stamp << "iter,step_norm,dispersion\n";
    for (std::size_t i = 0; i < trace.step_norms.size(); ++i)
        os << (i + 1) << ',' << fmt(trace.step_norms[i]) << ',' << fmt(trace.dispersions[i])
           << '\n';
}

void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& paths,
                     const std::string& stamp) {
    os << stamp << "path_id,tau,A_tau,D_tau,X_tau,status\n";
    for (const auto& p : paths)
        os << p.path_id << ',' << p.tau << ',' << fmt(p.A_tau) << ',' << fmt(p.D_tau) << ','
           << fmt(p.X_tau) << ','
           << (p.status == PathStatus::Stopped ? "stopped" : "capped") << '\n';
}

void write_samples_csv(std::ostream& os, const std::vector<double>& values,
                       const std::string& column, const std::string& stamp) {
    os << stamp << column << '\n';
    for (double v : values) os << fmt(v) << '\n';
}

void write_cdf_csv(std::ostream& os, const EmpiricalCDF& cdf, const std::string& stamp) {
    os << stamp << "x,F\n";
    const auto& xs = cdf.sorted_samples();
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << fmt(xs[i]) << ',' << fmt(static_cast<double>(i + 1) / n) << '\n';
}

}  // namespace rescale
