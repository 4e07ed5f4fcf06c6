#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "rescale/laws.hpp"
#include "rescale/rng.hpp"

namespace rescale {

// One trajectory point of the multiplicative-affine recursion together with
// the closed-form coefficients: X_n = A_n x_0 - D_n.
struct ChainState {
    std::uint64_t n = 0;
    double A = 1.0;
    double D = 0.0;
    double X = 0.0;
    // exact integer exponent of A in the declared lattice base, when available
    std::optional<long long> lattice_exp;
    // running sign of A, tracked exactly when every scaling has modulus 1
    std::optional<int> sign_exact;
};

ChainState initial_state(const CoefficientLaw& law, double x0);

// A' = a A, D' = a (D + b), X' = a (X - b). m is the sampled atom's lattice
// exponent when the law declares one.
ChainState chain_step(const ChainState& s, double a, double b,
                      std::optional<long long> m = std::nullopt);

struct HitZero {};
struct HitOne {};
struct HitPositive {};
struct SmallModulus {
    double M;  // stop once |A| <= e^{-M}
};
struct LatticeReturn {};
struct FixedHorizon {
    std::uint64_t n;
};
using StoppingRule =
    std::variant<HitZero, HitOne, HitPositive, SmallModulus, LatticeReturn, FixedHorizon>;

// Throws RuleUnconstructibleError if the rule needs exact bookkeeping the law
// cannot provide (HitOne, LatticeReturn), or std::invalid_argument for bad
// rule parameters.
void check_rule(const CoefficientLaw& law, const StoppingRule& rule);

enum class PathStatus { Stopped, CapExceeded };

struct StoppedOutcome {
    ChainState state;
    PathStatus status = PathStatus::Stopped;
};

// First n >= 1 satisfying the rule, or the capped state.
StoppedOutcome run_until(const CoefficientLaw& law, double x0, const StoppingRule& rule,
                         std::uint64_t cap, Rng& rng);

constexpr std::uint64_t kDefaultStepCap = 100000;

struct MeanEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double cap_rate = 0.0;
    std::uint64_t kept = 0;
};

// Monte Carlo E_x{y(X_tau)} over stopped paths; capped paths are dropped and
// their rate reported. Throws AllPathsCappedError when nothing stops.
MeanEstimate stopped_mean(const std::function<double(double)>& y, const CoefficientLaw& law,
                          double x0, const StoppingRule& rule, std::size_t n_paths,
                          std::uint64_t cap, std::uint64_t seed, unsigned threads = 1);

struct ShiftSamples {
    std::vector<double> values;  // D_tau over stopped paths, path order
    double cap_rate = 0.0;
};

ShiftSamples sample_stopped_shift(const CoefficientLaw& law, const StoppingRule& rule,
                                  std::size_t n_paths, std::uint64_t cap, std::uint64_t seed,
                                  unsigned threads = 1);

struct TauDistribution {
    std::vector<double> pmf;  // pmf[k] estimates P(tau = k+1), normalized over stopped paths
    double cap_rate = 0.0;
};

TauDistribution tau_distribution(const CoefficientLaw& law, const StoppingRule& rule,
                                 std::size_t n_paths, std::uint64_t cap, std::uint64_t seed);

struct PathRecord {
    std::uint64_t path_id = 0;
    std::uint64_t tau = 0;
    double A_tau = 0.0;
    double D_tau = 0.0;
    double X_tau = 0.0;
    PathStatus status = PathStatus::Stopped;
};

std::vector<PathRecord> run_paths(const CoefficientLaw& law, double x0, const StoppingRule& rule,
                                  std::size_t n_paths, std::uint64_t cap, std::uint64_t seed,
                                  unsigned threads = 1);

}  // namespace rescale
