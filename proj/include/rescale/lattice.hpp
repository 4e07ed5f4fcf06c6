#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rescale/chain.hpp"
#include "rescale/laws.hpp"

namespace rescale {

struct SpanReport {
    bool arithmetic = false;
    std::optional<double> lambda;   // maximal common divisor of the values
    std::optional<double> lambda0;  // coset offset when one was requested
    bool degenerate = false;        // all values are 0
};

// maximal lambda > tol with every value in lambda * Z, by tolerant Euclidean
// reduction; non-arithmetic when the reduction collapses below tol
SpanReport real_gcd_span(const std::vector<double>& values, double tol = 1e-9);

// values[0] mod lambda if all values are congruent mod lambda, else absent
std::optional<double> coset_offset(const std::vector<double>& values, double lambda,
                                   double tol = 1e-9);

enum class UnitModulusCase {
    NonArithmetic,     // direct shifts span no lattice: constants only
    NoCommonCoset,     // reflected shifts miss every coset: constants only
    SymmetricPeriodic  // periodic family g(x / lambda), symmetric about x0
};

const char* unit_modulus_case_name(UnitModulusCase c);

struct UnitModulusReport {
    UnitModulusCase kind = UnitModulusCase::NonArithmetic;
    std::optional<double> lambda;
    std::optional<double> lambda0;
    std::optional<double> x0;  // lambda0 / (2 lambda), in units of the period
    // lambda taken from pairwise differences of the reflected shifts because
    // no direct (scale +1) shift exists to span the lattice
    bool reflected_span_convention = false;
};

// Splits shifts by scale sign and classifies which bounded continuous
// solutions survive. Requires P(|scale| = 1) = 1 and P(scale = 1) < 1.
UnitModulusReport classify_unit_modulus(const CoefficientLaw& law);

// y(x) = g0(x/lambda - x0) + g0(-x/lambda + x0) with x0 = lambda0/(2 lambda):
// 1-periodic g0 makes y a solution for reflected shifts on lambda0 + lambda Z
std::function<double(double)> build_symmetric_solution(std::function<double(double)> g0,
                                                       double lambda, double lambda0);

struct QLatticeReport {
    bool critical = false;  // mean lattice exponent is exactly zero
    std::vector<std::optional<double>> rho;  // per atom; nullopt marks infinity
    std::optional<double> resonant;          // common rho when all agree
    std::vector<long long> k;                // walk-return witness, atom order
    std::vector<std::size_t> relabel;        // position in proof order -> atom index
    std::vector<long long> s;                // partial exponent sums, proof order
    std::vector<double> theta;               // shift-support points theta_1..theta_N
    std::optional<double> theta_limit;       // rho_first - rho_last in proof order
    std::optional<SpanReport> empirical_span;
    double cap_rate = 0.0;
};

// Full commensurable-scale analysis: exact criticality, per-atom fixed points,
// resonance, the walk-return witness with its support points theta_n, and the
// span of sampled return shifts.  cap bounds the walk length per sampled path;
// tightening it keeps excursions inside the exact dyadic range of double when
// the shifts are dyadic, at the price of discarding the longest returns.
QLatticeReport q_lattice_report(const CoefficientLaw& law, std::size_t n_theta,
                                std::size_t n_paths, std::uint64_t seed = 1,
                                int threads = 1, std::uint64_t cap = kDefaultStepCap);

}  // namespace rescale
