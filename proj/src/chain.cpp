#include "rescale/chain.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "rescale/errors.hpp"

namespace rescale {

namespace {

bool predicate(const StoppingRule& rule, const ChainState& s) {
    return std::visit(
        [&s](const auto& r) -> bool {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, HitZero>) {
                return s.A == 0.0;
            } else if constexpr (std::is_same_v<T, HitOne>) {
                if (s.lattice_exp) return *s.lattice_exp == 0;
                return s.sign_exact && *s.sign_exact > 0;
            } else if constexpr (std::is_same_v<T, HitPositive>) {
                return s.A > 0.0;
            } else if constexpr (std::is_same_v<T, SmallModulus>) {
                return std::fabs(s.A) <= std::exp(-r.M);
            } else if constexpr (std::is_same_v<T, LatticeReturn>) {
                return s.lattice_exp && *s.lattice_exp == 0;
            } else {
                return s.n >= r.n;
            }
        },
        rule);
}

StoppedOutcome run_one(const CoefficientLaw& law, double x0, const StoppingRule& rule,
                       std::uint64_t cap, Rng& rng) {
    ChainState s = initial_state(law, x0);
    const bool lattice = law.q_lattice().has_value();
    for (std::uint64_t step = 1; step <= cap; ++step) {
        const std::size_t i = law.sample_atom_index(rng);
        const Atom& atom = law.atoms()[i];
        const double b = sample_shift(atom.shift, rng);
        s = chain_step(s, atom.a, b,
                       lattice ? std::optional<long long>(law.q_lattice()->m[i]) : std::nullopt);
        assert(std::fabs(s.X - (s.A * x0 - s.D)) <=
               1e-9 * (1.0 + std::fabs(s.A * x0) + std::fabs(s.D)));
        if (predicate(rule, s)) return {s, PathStatus::Stopped};
    }
    return {s, PathStatus::CapExceeded};
}

}  // namespace

ChainState initial_state(const CoefficientLaw& law, double x0) {
    ChainState s;
    s.X = x0;
    if (law.q_lattice()) s.lattice_exp = 0;
    if (law.unit_modulus()) s.sign_exact = 1;
    return s;
}

ChainState chain_step(const ChainState& s, double a, double b, std::optional<long long> m) {
    ChainState t;
    t.n = s.n + 1;
    t.A = a * s.A;
    t.D = a * (s.D + b);
    t.X = a * (s.X - b);
    if (s.lattice_exp && m) t.lattice_exp = *s.lattice_exp + *m;
    if (s.sign_exact && std::fabs(std::fabs(a) - 1.0) <= 1e-12)
        t.sign_exact = a < 0.0 ? -*s.sign_exact : *s.sign_exact;
    return t;
}

void check_rule(const CoefficientLaw& law, const StoppingRule& rule) {
    if (std::holds_alternative<HitOne>(rule)) {
        if (!law.q_lattice() && !law.unit_modulus())
            throw RuleUnconstructibleError(
                "hit-one rule needs a lattice declaration or all-unit-modulus scalings");
    } else if (std::holds_alternative<LatticeReturn>(rule)) {
        if (!law.q_lattice())
            throw RuleUnconstructibleError("lattice-return rule needs a lattice declaration");
    } else if (const auto* sm = std::get_if<SmallModulus>(&rule)) {
        if (!(sm->M > 0.0)) throw std::invalid_argument("modulus threshold must be positive");
    } else if (const auto* fh = std::get_if<FixedHorizon>(&rule)) {
        if (fh->n == 0) throw std::invalid_argument("horizon must be at least one step");
    }
}

StoppedOutcome run_until(const CoefficientLaw& law, double x0, const StoppingRule& rule,
                         std::uint64_t cap, Rng& rng) {
    check_rule(law, rule);
    return run_one(law, x0, rule, cap, rng);
}

MeanEstimate stopped_mean(const std::function<double(double)>& y, const CoefficientLaw& law,
                          double x0, const StoppingRule& rule, std::size_t n_paths,
                          std::uint64_t cap, std::uint64_t seed, unsigned threads) {
    check_rule(law, rule);
    const std::size_t blocks = block_count(n_paths, kDefaultMcBlock);
    std::vector<MeanAccumulator> acc(blocks);
    std::vector<std::uint64_t> capped(blocks, 0);
    parallel_blocks(n_paths, threads, kDefaultMcBlock,
                    [&](std::size_t lo, std::size_t hi, std::size_t block) {
                        for (std::size_t p = lo; p < hi; ++p) {
                            auto rng = make_rng(path_seed(seed, p));
                            const auto out = run_one(law, x0, rule, cap, rng);
                            if (out.status == PathStatus::Stopped)
                                acc[block].add(y(out.state.X));
                            else
                                ++capped[block];
                        }
                    });
    MeanAccumulator total;
    std::uint64_t n_capped = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        total.merge(acc[b]);
        n_capped += capped[b];
    }
    if (total.count == 0) throw AllPathsCappedError("no path stopped before the cap");
    MeanEstimate e;
    e.estimate = total.mean();
    e.std_error = total.stderr_of_mean();
    e.cap_rate = static_cast<double>(n_capped) / static_cast<double>(n_paths);
    e.kept = total.count;
    return e;
}

ShiftSamples sample_stopped_shift(const CoefficientLaw& law, const StoppingRule& rule,
                                  std::size_t n_paths, std::uint64_t cap, std::uint64_t seed,
                                  unsigned threads) {
    check_rule(law, rule);
    const std::size_t blocks = block_count(n_paths, kDefaultMcBlock);
    std::vector<std::vector<double>> slots(blocks);
    std::vector<std::uint64_t> capped(blocks, 0);
    parallel_blocks(n_paths, threads, kDefaultMcBlock,
                    [&](std::size_t lo, std::size_t hi, std::size_t block) {
                        for (std::size_t p = lo; p < hi; ++p) {
                            auto rng = make_rng(path_seed(seed, p));
                            const auto out = run_one(law, 0.0, rule, cap, rng);
                            if (out.status == PathStatus::Stopped)
                                slots[block].push_back(out.state.D);
                            else
                                ++capped[block];
                        }
                    });
    ShiftSamples s;
    std::uint64_t n_capped = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        s.values.insert(s.values.end(), slots[b].begin(), slots[b].end());
        n_capped += capped[b];
    }
    if (s.values.empty()) throw AllPathsCappedError("no path stopped before the cap");
    s.cap_rate = static_cast<double>(n_capped) / static_cast<double>(n_paths);
    return s;
}

TauDistribution tau_distribution(const CoefficientLaw& law, const StoppingRule& rule,
                                 std::size_t n_paths, std::uint64_t cap, std::uint64_t seed) {
    check_rule(law, rule);
    std::vector<std::uint64_t> counts(cap, 0);
    std::uint64_t n_capped = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        auto rng = make_rng(path_seed(seed, p));
        const auto out = run_one(law, 0.0, rule, cap, rng);
        if (out.status == PathStatus::Stopped)
            ++counts[out.state.n - 1];
        else
            ++n_capped;
    }
    TauDistribution t;
    t.cap_rate = static_cast<double>(n_capped) / static_cast<double>(n_paths);
    const double stopped = static_cast<double>(n_paths - n_capped);
    t.pmf.resize(cap, 0.0);
    if (stopped > 0.0)
        for (std::uint64_t k = 0; k < cap; ++k)
            t.pmf[k] = static_cast<double>(counts[k]) / stopped;
    return t;
}

std::vector<PathRecord> run_paths(const CoefficientLaw& law, double x0, const StoppingRule& rule,
                                  std::size_t n_paths, std::uint64_t cap, std::uint64_t seed,
                                  unsigned threads) {
    check_rule(law, rule);
    std::vector<PathRecord> records(n_paths);
    parallel_blocks(n_paths, threads, kDefaultMcBlock,
                    [&](std::size_t lo, std::size_t hi, std::size_t) {
                        for (std::size_t p = lo; p < hi; ++p) {
                            auto rng = make_rng(path_seed(seed, p));
                            const auto out = run_one(law, x0, rule, cap, rng);
                            records[p] = {p, out.state.n, out.state.A, out.state.D, out.state.X,
                                          out.status};
                        }
                    });
    return records;
}

}  // namespace rescale
