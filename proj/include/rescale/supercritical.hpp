#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "rescale/chain.hpp"
#include "rescale/laws.hpp"
#include "rescale/rng.hpp"

namespace rescale {

// checks the positive-scale requirement for the explicit solution and returns
// the regime report used for the check
RegimeReport require_supercritical_positive(const CoefficientLaw& law);

struct UpsilonDraw {
    double value = 0.0;
    std::size_t terms = 0;     // terms actually summed
    double prefactor = 1.0;    // first prefactor below eps_tail
    bool truncated = false;    // false only when the cap was hit
};

// one draw of the tail series sum_{n>=1} b_n * prod_{j<n} 1/a_j, truncated at
// the first term whose prefactor drops below eps_tail
UpsilonDraw sample_upsilon_draw(const CoefficientLaw& law, double eps_tail, std::size_t cap,
                                Rng& rng);
double sample_upsilon(const CoefficientLaw& law, double eps_tail, std::size_t cap, Rng& rng);

struct UpsilonBatch {
    std::vector<double> values;  // capped paths are excluded
    double cap_rate = 0.0;
    double mean_terms = 0.0;
};

UpsilonBatch sample_upsilon_many(const CoefficientLaw& law, std::size_t n_samples,
                                 double eps_tail = 1e-12, std::size_t cap = kDefaultStepCap,
                                 std::uint64_t seed = 1, int threads = 1);

class EmpiricalCDF {
  public:
    explicit EmpiricalCDF(std::vector<double> samples);

    // fraction of samples <= x; right-continuous step function
    double operator()(double x) const;
    std::size_t size() const { return xs_.size(); }
    const std::vector<double>& sorted_samples() const { return xs_; }

  private:
    std::vector<double> xs_;
};

EmpiricalCDF build_cdf(std::vector<double> samples);

// sup over jump points of the gap to a reference CDF, both jump sides checked
double ks_distance(const EmpiricalCDF& cdf, const std::function<double(double)>& reference);

struct VerifyReport {
    double max_residual = 0.0;
    double combined_stderr = 0.0;        // worst per-probe MC stderr plus CDF band
    std::vector<double> residuals;       // one per probe
};

// max over probes of |F(x) - mean F(a(x - b))| with a fresh Monte Carlo mean
VerifyReport verify_solution(const EmpiricalCDF& F, const CoefficientLaw& law,
                             const std::vector<double>& probes, std::size_t n_mc,
                             std::uint64_t seed = 1, int threads = 1);

// smallest n with n*K > ln(factor); separates escaping from returning paths
std::size_t default_escape_horizon(const CoefficientLaw& law, double factor = 1e6);

// fraction of paths from x whose chain state exceeds b at the horizon
double estimate_escape_probability(const CoefficientLaw& law, double x, double b,
                                   std::size_t horizon, std::size_t n_paths,
                                   std::uint64_t seed = 1, int threads = 1);

}  // namespace rescale
