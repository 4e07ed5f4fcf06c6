#include "rescale/laws.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/expint.hpp>

#include "rescale/errors.hpp"

namespace rescale {

namespace {

constexpr double kProbSumTol = 1e-12;
constexpr double kLatticeTol = 1e-12;
constexpr double kResonanceTol = 1e-9;

double unit_exponential(Rng& rng) {
    return std::exponential_distribution<double>(1.0)(rng);
}

// ln max(|v|, 1)
double log_plus(double v) {
    const double m = std::fabs(v);
    return m > 1.0 ? std::log(m) : 0.0;
}

// e^x E_1(x) for x > 0, stable for large x where the factors over/underflow.
double exp_e1(double x) {
    if (x < 700.0) return std::exp(x) * boost::math::expint(1, x);
    const double r = 1.0 / x;
    return r * (1.0 - r * (1.0 - r * (2.0 - 6.0 * r)));
}

// e^{-x} Ei(x) for x > 1, same stabilization.
double expm_ei(double x) {
    if (x < 700.0) return std::exp(-x) * boost::math::expint(x);
    const double r = 1.0 / x;
    return r * (1.0 + r * (1.0 + r * (2.0 + 6.0 * r)));
}

// E ln max(|c + E|, 1) for E a unit exponential: split the integral at the
// points where |c + t| crosses 1 and integrate ln by parts.
double exp_from_log_moment(double c) {
    const double t1 = std::max(0.0, 1.0 - c);
    // boundary term from integrating ln by parts at the crossing c + t = 1
    double total = std::exp(-t1) * std::log(std::max(c + t1, 1.0));
    // remaining integral of e^{-t}/(c+t) over t > t1 equals e^c E_1(c + t1)
    if (c <= 1.0)
        total += std::exp(c) * boost::math::expint(1, 1.0);
    else
        total += exp_e1(c);
    if (c < -1.0) {
        // mass on c + t < -1: boundary term plus exponential-integral pieces
        const double ei1 = boost::math::expint(1.0);
        total += std::exp(c) * ei1 + std::log(-c) - expm_ei(-c);
    }
    return total;
}

struct RationalProb {
    long long num = 0;
    long long den = 1;
};

// Continued-fraction reconstruction of a probability that was intended as a
// small rational; fails for genuinely irrational inputs.
bool reconstruct_rational(double x, RationalProb& out) {
    constexpr long long kMaxDen = 1000000;
    constexpr double kTol = 1e-12;
    long long p_prev = 0, q_prev = 1, p_cur = 1, q_cur = 0;
    double frac = x;
    for (int round = 0; round < 64; ++round) {
        const double a_f = std::floor(frac);
        if (a_f > 2e18) return false;
        const long long a = static_cast<long long>(a_f);
        const long long p_next = a * p_cur + p_prev;
        const long long q_next = a * q_cur + q_prev;
        if (q_next > kMaxDen) return false;
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
        const double approx = static_cast<double>(p_cur) / static_cast<double>(q_cur);
        if (std::fabs(x - approx) <= kTol) {
            out.num = p_cur;
            out.den = q_cur;
            return true;
        }
        const double rem = frac - a_f;
        if (rem < 1e-15) return false;
        frac = 1.0 / rem;
    }
    return false;
}

}  // namespace

void validate_shift(const ShiftLaw& shift) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                if (!std::isfinite(s.b)) throw std::invalid_argument("shift point must be finite");
            } else if constexpr (std::is_same_v<T, ExponentialFrom>) {
                if (!std::isfinite(s.c)) throw std::invalid_argument("shift origin must be finite");
            } else if constexpr (std::is_same_v<T, Uniform>) {
                if (!(s.lo < s.hi) || !std::isfinite(s.lo) || !std::isfinite(s.hi))
                    throw std::invalid_argument("uniform shift needs lo < hi, both finite");
            } else {
                if (!std::isfinite(s.c)) throw std::invalid_argument("shift origin must be finite");
                if (s.kappas.empty())
                    throw std::invalid_argument("hypoexponential shift needs at least one rate");
                for (double k : s.kappas)
                    if (k == 0.0 || !std::isfinite(k))
                        throw std::invalid_argument("hypoexponential rates must be nonzero finite");
            }
        },
        shift);
}

double sample_shift(const ShiftLaw& shift, Rng& rng) {
    return std::visit(
        [&rng](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return s.b;
            } else if constexpr (std::is_same_v<T, ExponentialFrom>) {
                return s.c + unit_exponential(rng);
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return std::uniform_real_distribution<double>(s.lo, s.hi)(rng);
            } else {
                double v = s.c;
                for (double k : s.kappas) v += unit_exponential(rng) / k;
                return v;
            }
        },
        shift);
}

double shift_mean(const ShiftLaw& shift) {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return s.b;
            } else if constexpr (std::is_same_v<T, ExponentialFrom>) {
                return s.c + 1.0;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return 0.5 * (s.lo + s.hi);
            } else {
                double v = s.c;
                for (double k : s.kappas) v += 1.0 / k;
                return v;
            }
        },
        shift);
}

std::pair<double, double> shift_support(const ShiftLaw& shift, double tail_tol) {
    return std::visit(
        [tail_tol](const auto& s) -> std::pair<double, double> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return {s.b, s.b};
            } else if constexpr (std::is_same_v<T, ExponentialFrom>) {
                return {s.c, s.c - std::log(tail_tol)};
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return {s.lo, s.hi};
            } else {
                // union bound: cut each component so the total clipped mass
                // stays below tail_tol
                const double per = tail_tol / (2.0 * static_cast<double>(s.kappas.size()));
                double lo = s.c, hi = s.c;
                for (double k : s.kappas) {
                    const double cut = -std::log(per) / std::fabs(k);
                    if (k > 0.0)
                        hi += cut;
                    else
                        lo -= cut;
                }
                return {lo, hi};
            }
        },
        shift);
}

bool shift_is_continuous(const ShiftLaw& shift) {
    return !std::holds_alternative<PointMass>(shift);
}

CoefficientLaw::CoefficientLaw(std::vector<Atom> atoms, std::optional<QLattice> q_lattice)
    : atoms_(std::move(atoms)), q_lattice_(std::move(q_lattice)) {
    if (atoms_.empty()) throw std::invalid_argument("law needs at least one atom");
    double sum = 0.0;
    for (const auto& atom : atoms_) {
        if (!std::isfinite(atom.a)) throw std::invalid_argument("scaling value must be finite");
        if (!(atom.p > 0.0) || atom.p > 1.0)
            throw std::invalid_argument("atom probability must lie in (0, 1]");
        validate_shift(atom.shift);
        sum += atom.p;
    }
    if (std::fabs(sum - 1.0) > kProbSumTol)
        throw std::invalid_argument("atom probabilities must sum to 1");
    if (q_lattice_) {
        if (!(q_lattice_->q > 1.0)) throw std::invalid_argument("lattice base must exceed 1");
        if (q_lattice_->m.size() != atoms_.size())
            throw std::invalid_argument("lattice exponent count must match atom count");
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const double expected =
                std::pow(q_lattice_->q, static_cast<double>(q_lattice_->m[i]));
            if (std::fabs(atoms_[i].a - expected) > kLatticeTol * std::fabs(atoms_[i].a))
                throw std::invalid_argument("scaling value disagrees with declared lattice exponent");
        }
    }
    cum_p_.reserve(atoms_.size());
    double acc = 0.0;
    for (const auto& atom : atoms_) {
        acc += atom.p;
        cum_p_.push_back(acc);
    }
    cum_p_.back() = 1.0;
}

bool CoefficientLaw::unit_modulus() const {
    return std::all_of(atoms_.begin(), atoms_.end(),
                       [](const Atom& a) { return std::fabs(std::fabs(a.a) - 1.0) <= kLatticeTol; });
}

std::size_t CoefficientLaw::sample_atom_index(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::upper_bound(cum_p_.begin(), cum_p_.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cum_p_.begin(), static_cast<std::ptrdiff_t>(cum_p_.size()) - 1));
}

std::pair<double, double> CoefficientLaw::sample_pair(Rng& rng) const {
    const auto& atom = atoms_[sample_atom_index(rng)];
    return {atom.a, sample_shift(atom.shift, rng)};
}

double log_scale_moment(const CoefficientLaw& law) {
    double k = 0.0;
    for (const auto& atom : law.atoms()) {
        if (atom.a == 0.0)
            throw DegenerateZeroError("log-scale moment undefined: scaling value 0 has mass");
        k += atom.p * std::log(std::fabs(atom.a));
    }
    return k;
}

Degeneracies detect_degeneracies(const CoefficientLaw& law) {
    Degeneracies d;
    bool possible = true;   // a common fixed point can still exist
    bool pinned = false;    // some atom has forced a specific c
    double c = 0.0;
    for (const auto& atom : law.atoms()) {
        if (atom.a == 0.0) d.p_zero += atom.p;
        if (std::fabs(std::fabs(atom.a) - 1.0) <= kLatticeTol) d.p_unit_modulus += atom.p;
        if (!possible) continue;
        double required;
        if (atom.a == 0.0) {
            required = 0.0;  // 0·(c − β) = c forces c = 0, with any shift
        } else if (shift_is_continuous(atom.shift)) {
            possible = false;  // β would have to be a.s. constant
            continue;
        } else {
            const double b = std::get<PointMass>(atom.shift).b;
            if (atom.a == 1.0) {
                if (b != 0.0) possible = false;
                continue;  // b = 0 leaves c unconstrained
            }
            required = atom.a * b / (atom.a - 1.0);
        }
        if (!pinned) {
            pinned = true;
            c = required;
        } else if (std::fabs(c - required) >
                   kResonanceTol * std::max({1.0, std::fabs(c), std::fabs(required)})) {
            possible = false;
        }
    }
    // a law made only of unconstrained atoms fixes every point; report 0
    if (possible) d.resonance = pinned ? c : 0.0;
    return d;
}

double log_beta_moment(const ShiftLaw& shift, std::uint64_t seed) {
    return std::visit(
        [seed](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return log_plus(s.b);
            } else if constexpr (std::is_same_v<T, ExponentialFrom>) {
                return exp_from_log_moment(s.c);
            } else if constexpr (std::is_same_v<T, Uniform>) {
                // antiderivative of ln max(|t|,1), odd in t
                auto H = [](double x) {
                    const double u = std::fabs(x);
                    const double g = u <= 1.0 ? 0.0 : u * std::log(u) - u + 1.0;
                    return x < 0.0 ? -g : g;
                };
                return (H(s.hi) - H(s.lo)) / (s.hi - s.lo);
            } else {
                ShiftLaw self = s;
                auto rng = make_rng(seed);
                MeanAccumulator acc;
                for (int i = 0; i < 200000; ++i) acc.add(log_plus(sample_shift(self, rng)));
                return acc.mean();
            }
        },
        shift);
}

std::optional<LatticeBalance> lattice_balance(const CoefficientLaw& law) {
    if (!law.q_lattice()) throw InapplicableError("law declares no lattice");
    const auto& lat = *law.q_lattice();
    std::vector<RationalProb> rats(law.atoms().size());
    long long lcm = 1;
    for (std::size_t i = 0; i < law.atoms().size(); ++i) {
        if (!reconstruct_rational(law.atoms()[i].p, rats[i])) return std::nullopt;
        lcm = std::lcm(lcm, rats[i].den);
        if (lcm > 1000000000000LL) return std::nullopt;
    }
    __int128 s_num = 0;
    for (std::size_t i = 0; i < law.atoms().size(); ++i)
        s_num += static_cast<__int128>(rats[i].num) * (lcm / rats[i].den) * lat.m[i];
    LatticeBalance bal;
    bal.sign = s_num == 0 ? 0 : (s_num > 0 ? 1 : -1);
    bal.K = s_num == 0 ? 0.0
                       : static_cast<double>(static_cast<long long>(s_num)) /
                             static_cast<double>(lcm) * std::log(lat.q);
    return bal;
}

RegimeReport classify_regime(const CoefficientLaw& law, double tol_K, std::uint64_t seed) {
    RegimeReport rep;
    const Degeneracies d = detect_degeneracies(law);
    rep.p_zero = d.p_zero;
    rep.p_unit_modulus = d.p_unit_modulus;
    rep.resonance = d.resonance;

    rep.log_beta_moment = 0.0;
    for (std::size_t i = 0; i < law.atoms().size(); ++i)
        rep.log_beta_moment +=
            law.atoms()[i].p * log_beta_moment(law.atoms()[i].shift, path_seed(seed, i));
    rep.log_beta_moment_finite = true;

    // exactly-zero detection via the lattice declaration when probabilities
    // reconstruct as small rationals
    int k_sign = 0;
    bool k_exact = false;
    if (d.p_zero == 0.0) {
        rep.K = log_scale_moment(law);
        if (law.q_lattice()) {
            if (auto bal = lattice_balance(law)) {
                k_exact = true;
                k_sign = bal->sign;
                rep.K = bal->K;
            }
        }
    }

    if (d.p_zero > 0.0) {
        rep.regime = Regime::DegenerateZero;
    } else if (d.p_unit_modulus >= 1.0 - kProbSumTol) {
        rep.regime = Regime::DegenerateUnitModulus;
    } else if (d.resonance.has_value()) {
        rep.regime = Regime::Resonant;
    } else if (k_exact) {
        rep.regime = k_sign == 0 ? Regime::Critical
                                 : (k_sign < 0 ? Regime::Subcritical : Regime::Supercritical);
        if (k_sign != 0 && std::fabs(*rep.K) <= tol_K) rep.regime = Regime::Critical;
    } else {
        const double k = *rep.K;
        rep.regime = std::fabs(k) <= tol_K ? Regime::Critical
                                           : (k < 0.0 ? Regime::Subcritical : Regime::Supercritical);
    }
    return rep;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::DegenerateZero: return "degenerate_zero";
        case Regime::DegenerateUnitModulus: return "degenerate_unit_modulus";
        case Regime::Resonant: return "resonant";
        case Regime::Subcritical: return "subcritical";
        case Regime::Critical: return "critical";
        case Regime::Supercritical: return "supercritical";
    }
    return "unknown";
}

}  // namespace rescale
