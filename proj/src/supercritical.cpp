#include "rescale/supercritical.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "rescale/errors.hpp"

namespace rescale {

RegimeReport require_supercritical_positive(const CoefficientLaw& law) {
    for (const auto& atom : law.atoms())
        if (atom.a <= 0.0)
            throw RequiresPositiveAlphaError("explicit solution needs all scale factors > 0");
    auto report = classify_regime(law);
    if (report.regime != Regime::Supercritical)
        throw RequiresPositiveAlphaError(std::string("law is ") + regime_name(report.regime) +
                                         ", explicit solution needs a supercritical law");
    return report;
}

UpsilonDraw sample_upsilon_draw(const CoefficientLaw& law, double eps_tail, std::size_t cap,
                                Rng& rng) {
    if (eps_tail <= 0.0) throw std::invalid_argument("eps_tail must be > 0");
    UpsilonDraw d;
    double pref = 1.0;
    for (std::size_t n = 0; n < cap; ++n) {
        if (pref < eps_tail) {
            d.prefactor = pref;
            d.truncated = true;
            return d;
        }
        const auto [a, b] = law.sample_pair(rng);
        d.value += b * pref;
        pref /= a;
        ++d.terms;
    }
    d.prefactor = pref;
    return d;
}

double sample_upsilon(const CoefficientLaw& law, double eps_tail, std::size_t cap, Rng& rng) {
    require_supercritical_positive(law);
    auto d = sample_upsilon_draw(law, eps_tail, cap, rng);
    if (!d.truncated) throw CapExceededError("prefactor never dropped below eps_tail");
    return d.value;
}

UpsilonBatch sample_upsilon_many(const CoefficientLaw& law, std::size_t n_samples,
                                 double eps_tail, std::size_t cap, std::uint64_t seed,
                                 int threads) {
    require_supercritical_positive(law);
    if (n_samples == 0) throw EmptySampleError("need at least one sample");

    const std::size_t blocks = block_count(n_samples, kDefaultMcBlock);
    std::vector<std::vector<double>> slot(blocks);
    std::vector<double> slot_terms(blocks, 0.0);
    std::vector<std::size_t> slot_capped(blocks, 0);
    parallel_blocks(n_samples, threads, kDefaultMcBlock,
                    [&](std::size_t lo, std::size_t hi, std::size_t block) {
                        auto& out = slot[block];
                        out.reserve(hi - lo);
                        for (std::size_t i = lo; i < hi; ++i) {
                            auto rng = make_rng(path_seed(seed, i));
                            auto d = sample_upsilon_draw(law, eps_tail, cap, rng);
                            slot_terms[block] += static_cast<double>(d.terms);
                            if (d.truncated)
                                out.push_back(d.value);
                            else
                                ++slot_capped[block];
                        }
                    });

    UpsilonBatch batch;
    double terms = 0.0;
    std::size_t capped = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        batch.values.insert(batch.values.end(), slot[b].begin(), slot[b].end());
        terms += slot_terms[b];
        capped += slot_capped[b];
    }
    batch.cap_rate = static_cast<double>(capped) / static_cast<double>(n_samples);
    batch.mean_terms = terms / static_cast<double>(n_samples);
    if (batch.values.empty()) throw CapExceededError("every path hit the term cap");
    return batch;
}

EmpiricalCDF::EmpiricalCDF(std::vector<double> samples) : xs_(std::move(samples)) {
    if (xs_.empty()) throw EmptySampleError("empirical cdf needs samples");
    for (double v : xs_)
        if (!std::isfinite(v)) throw std::invalid_argument("samples must be finite");
    std::sort(xs_.begin(), xs_.end());
}

double EmpiricalCDF::operator()(double x) const {
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    return static_cast<double>(it - xs_.begin()) / static_cast<double>(xs_.size());
}

EmpiricalCDF build_cdf(std::vector<double> samples) { return EmpiricalCDF(std::move(samples)); }

double ks_distance(const EmpiricalCDF& cdf, const std::function<double(double)>& reference) {
    const auto& xs = cdf.sorted_samples();
    const double n = static_cast<double>(xs.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double ref = reference(xs[i]);
        worst = std::max(worst, std::fabs((static_cast<double>(i) + 1.0) / n - ref));
        worst = std::max(worst, std::fabs(static_cast<double>(i) / n - ref));
    }
    return worst;
}

VerifyReport verify_solution(const EmpiricalCDF& F, const CoefficientLaw& law,
                             const std::vector<double>& probes, std::size_t n_mc,
                             std::uint64_t seed, int threads) {
    require_supercritical_positive(law);
    if (n_mc == 0) throw EmptySampleError("need at least one draw per probe");

    VerifyReport report;
    // one-layer CDF band: stderr of F(x) is at most 1/(2 sqrt N)
    const double cdf_band = 0.5 / std::sqrt(static_cast<double>(F.size()));
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const double x = probes[p];
        const std::size_t blocks = block_count(n_mc, kDefaultMcBlock);
        std::vector<MeanAccumulator> slot(blocks);
        parallel_blocks(n_mc, threads, kDefaultMcBlock,
                        [&](std::size_t lo, std::size_t hi, std::size_t block) {
                            for (std::size_t i = lo; i < hi; ++i) {
                                auto rng = make_rng(path_seed(seed ^ (p + 1), i));
                                const auto [a, b] = law.sample_pair(rng);
                                slot[block].add(F(a * (x - b)));
                            }
                        });
        MeanAccumulator total;
        for (const auto& acc : slot) total.merge(acc);
        report.residuals.push_back(std::fabs(F(x) - total.mean()));
        report.max_residual = std::max(report.max_residual, report.residuals.back());
        const double se = std::sqrt(total.stderr_of_mean() * total.stderr_of_mean() +
                                    cdf_band * cdf_band);
        report.combined_stderr = std::max(report.combined_stderr, se);
    }
    return report;
}

std::size_t default_escape_horizon(const CoefficientLaw& law, double factor) {
    if (factor <= 1.0) throw std::invalid_argument("factor must exceed 1");
    const auto report = require_supercritical_positive(law);
    const double K = *report.K;
    return static_cast<std::size_t>(std::floor(std::log(factor) / K)) + 1;
}

double estimate_escape_probability(const CoefficientLaw& law, double x, double b,
                                   std::size_t horizon, std::size_t n_paths,
                                   std::uint64_t seed, int threads) {
    require_supercritical_positive(law);
    if (horizon == 0) throw std::invalid_argument("horizon must be >= 1");
    if (n_paths == 0) throw EmptySampleError("need at least one path");

    const StoppingRule rule = FixedHorizon{horizon};
    const std::size_t blocks = block_count(n_paths, kDefaultMcBlock);
    std::vector<std::size_t> slot(blocks, 0);
    parallel_blocks(n_paths, threads, kDefaultMcBlock,
                    [&](std::size_t lo, std::size_t hi, std::size_t block) {
                        for (std::size_t i = lo; i < hi; ++i) {
                            auto rng = make_rng(path_seed(seed, i));
                            auto out = run_until(law, x, rule, horizon + 1, rng);
                            if (out.state.X > b) ++slot[block];
                        }
                    });
    std::size_t hits = 0;
    for (std::size_t c : slot) hits += c;
    return static_cast<double>(hits) / static_cast<double>(n_paths);
}

}  // namespace rescale
