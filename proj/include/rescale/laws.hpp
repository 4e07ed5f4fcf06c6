#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "rescale/errors.hpp"
#include "rescale/rng.hpp"

namespace rescale {

// ---------------------------------------------------------------------------
// Shift distributions (conditional law of the shift given a scaling atom).
// ---------------------------------------------------------------------------

struct PointMass {
    double b;
};

// Density e^{c-t} on (c, inf): a standard exponential started at c.
struct ExponentialFrom {
    double c;
};

struct Uniform {
    double lo, hi;  // requires lo < hi
};

// c + sum_j eta_j / kappa_j, eta_j independent standard exponentials.
// Every kappa_j must be nonzero; negative entries give left-sided components.
struct PointPlusHypoexp {
    double c;
    std::vector<double> kappas;
};

using ShiftLaw = std::variant<PointMass, ExponentialFrom, Uniform, PointPlusHypoexp>;

double sample_shift(const ShiftLaw& shift, Rng& rng);
double shift_mean(const ShiftLaw& shift);
// Interval outside which the shift carries at most tail_tol probability mass.
std::pair<double, double> shift_support(const ShiftLaw& shift, double tail_tol);
bool shift_is_continuous(const ShiftLaw& shift);
// Throws std::invalid_argument on malformed parameters.
void validate_shift(const ShiftLaw& shift);

// ---------------------------------------------------------------------------
// The coefficient measure mu of (alpha, beta).
// ---------------------------------------------------------------------------

struct Atom {
    double a;        // scaling value; zero and negative values are allowed
    double p;        // probability in (0, 1]
    ShiftLaw shift;  // conditional law of beta given alpha = a
};

// Declares a_i = q^{m_i} exactly, enabling integer exponent bookkeeping.
struct QLattice {
    double q;                 // q > 1
    std::vector<long long> m; // one exponent per atom
};

class CoefficientLaw {
  public:
    // Validates: atoms nonempty, probabilities in (0,1] summing to 1 within
    // 1e-12, shifts well-formed, and |a_i - q^{m_i}| <= 1e-12 |a_i| when a
    // lattice declaration is present. Throws std::invalid_argument.
    explicit CoefficientLaw(std::vector<Atom> atoms,
                            std::optional<QLattice> q_lattice = std::nullopt);

    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::optional<QLattice>& q_lattice() const { return q_lattice_; }

    bool unit_modulus() const;  // P(|alpha| = 1) == 1, exact comparisons

    std::size_t sample_atom_index(Rng& rng) const;
    // One draw of (a, b) from mu; deterministic given the generator state.
    std::pair<double, double> sample_pair(Rng& rng) const;

  private:
    std::vector<Atom> atoms_;
    std::optional<QLattice> q_lattice_;
    std::vector<double> cum_p_;  // cumulative probabilities for sampling
};

// ---------------------------------------------------------------------------
// Degeneracies and regime classification.
// ---------------------------------------------------------------------------

enum class Regime {
    DegenerateZero,         // P(alpha = 0) > 0
    DegenerateUnitModulus,  // P(|alpha| = 1) = 1
    Resonant,               // alpha (c - beta) = c almost surely
    Subcritical,            // K < -tol_K
    Critical,               // |K| <= tol_K (or exactly zero by lattice arithmetic)
    Supercritical,          // K > tol_K
};

const char* regime_name(Regime r);

struct Degeneracies {
    double p_zero = 0.0;
    double p_unit_modulus = 0.0;
    std::optional<double> resonance;  // the constant c when present
};

struct RegimeReport {
    double p_zero = 0.0;
    double p_unit_modulus = 0.0;
    std::optional<double> resonance;
    std::optional<double> K;  // E{ln|alpha|}; absent when p_zero > 0
    double log_beta_moment = 0.0;  // estimate of E{ln max(|beta|, 1)}
    bool log_beta_moment_finite = true;
    Regime regime = Regime::Subcritical;
};

// K = sum_i p_i ln|a_i|, exact in the discrete-alpha algebra.
// Throws DegenerateZeroError when some a_i = 0.
double log_scale_moment(const CoefficientLaw& law);

// Resonance is reported iff every atom carries a PointMass shift and all the
// induced fixed-point constants rho_i = b_i / (1 - 1/a_i) agree (an atom with
// a_i = 1 requires b_i = 0 and contributes no constraint; a_i = 0 forces
// c = 0). Any continuous shift makes the almost-sure identity impossible.
Degeneracies detect_degeneracies(const CoefficientLaw& law);

// E{ln max(|beta|,1)}: closed form for PointMass/Uniform/ExponentialFrom,
// Monte Carlo (1e5 draws from `seed`) for PointPlusHypoexp.
double log_beta_moment(const ShiftLaw& shift, std::uint64_t seed);

struct LatticeBalance {
    int sign = 0;  // sign of sum_i p_i m_i computed in integer arithmetic
    double K = 0.0;
};

// Exact sign of the mean lattice exponent via rational reconstruction of the
// probabilities; nullopt when they do not reconstruct with small denominators.
// Throws InapplicableError when the law declares no lattice.
std::optional<LatticeBalance> lattice_balance(const CoefficientLaw& law);

// Precedence: DegenerateZero > DegenerateUnitModulus > Resonant > sign of K.
// Criticality is decided exactly when a lattice declaration is present and
// the probabilities admit small-denominator rational reconstruction;
// otherwise |K| <= tol_K.
RegimeReport classify_regime(const CoefficientLaw& law, double tol_K = 1e-9,
                             std::uint64_t seed = 0x5eed5eedULL);

}  // namespace rescale
