#include "rescale/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rescale/chain.hpp"
#include "rescale/errors.hpp"

namespace rescale {

namespace {

constexpr double kRhoTol = 1e-9;
constexpr int kWitnessBound = 12;

// one tolerant gcd of two positive reals; 0 means the reduction collapsed
double tolerant_gcd(double a, double b, double tol) {
    if (a < b) std::swap(a, b);
    for (int round = 0; round < 64; ++round) {
        if (b <= tol) return a;
        double r = std::fmod(a, b);
        if (r <= tol || b - r <= tol) r = 0.0;
        a = b;
        b = r;
        if (b == 0.0) return a;
    }
    return 0.0;
}

}  // namespace

SpanReport real_gcd_span(const std::vector<double>& values, double tol) {
    if (values.empty()) throw std::invalid_argument("need at least one value");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    SpanReport rep;
    double g = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("values must be finite");
        const double av = std::fabs(v);
        if (av <= tol) continue;
        g = g == 0.0 ? av : tolerant_gcd(g, av, tol);
        // a divisor this close to the fold threshold is indistinguishable from
        // accumulated fold noise, and the multiple check below becomes vacuous
        if (g <= 16.0 * tol) return rep;  // non-arithmetic
    }
    if (g == 0.0) {
        rep.degenerate = true;
        return rep;
    }
    for (double v : values)
        if (std::fabs(v - g * std::round(v / g)) > tol) return rep;
    rep.arithmetic = true;
    rep.lambda = g;
    return rep;
}

std::optional<double> coset_offset(const std::vector<double>& values, double lambda,
                                   double tol) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    if (values.empty()) throw std::invalid_argument("need at least one value");
    double off = std::fmod(values[0], lambda);
    if (off < 0.0) off += lambda;
    if (lambda - off <= tol) off = 0.0;  // wrapped representative of 0
    for (double v : values) {
        double r = std::fmod(v, lambda);
        if (r < 0.0) r += lambda;
        const double d = std::fabs(r - off);
        if (d > tol && lambda - d > tol) return std::nullopt;
    }
    return off;
}

const char* unit_modulus_case_name(UnitModulusCase c) {
    switch (c) {
        case UnitModulusCase::NonArithmetic: return "non-arithmetic";
        case UnitModulusCase::NoCommonCoset: return "no-common-coset";
        case UnitModulusCase::SymmetricPeriodic: return "symmetric-periodic";
    }
    return "unknown";
}

UnitModulusReport classify_unit_modulus(const CoefficientLaw& law) {
    double p_direct = 0.0, p_reflected = 0.0;
    std::vector<const ShiftLaw*> direct, reflected;
    for (const auto& atom : law.atoms()) {
        if (atom.a == 1.0) {
            p_direct += atom.p;
            direct.push_back(&atom.shift);
        } else if (atom.a == -1.0) {
            p_reflected += atom.p;
            reflected.push_back(&atom.shift);
        }
    }
    if (p_direct + p_reflected < 1.0 - 1e-12)
        throw InapplicableError("classification needs |scale| = 1 almost surely");
    if (reflected.empty() || p_reflected <= 1e-12)
        throw InapplicableError("pure scale-1 laws have no reflection to classify");

    const auto continuous = [](const std::vector<const ShiftLaw*>& shifts) {
        return std::any_of(shifts.begin(), shifts.end(),
                           [](const ShiftLaw* s) { return shift_is_continuous(*s); });
    };
    const auto point_values = [](const std::vector<const ShiftLaw*>& shifts) {
        std::vector<double> vals;
        vals.reserve(shifts.size());
        for (const ShiftLaw* s : shifts) vals.push_back(std::get<PointMass>(*s).b);
        return vals;
    };

    UnitModulusReport rep;
    bool direct_degenerate = direct.empty();
    if (!direct_degenerate) {
        if (continuous(direct)) {
            rep.kind = UnitModulusCase::NonArithmetic;
            return rep;
        }
        const auto span = real_gcd_span(point_values(direct));
        if (span.degenerate) {
            direct_degenerate = true;  // shifts identically zero carry no span
        } else if (!span.arithmetic) {
            rep.kind = UnitModulusCase::NonArithmetic;
            return rep;
        } else {
            rep.lambda = span.lambda;
            if (continuous(reflected)) {
                rep.kind = UnitModulusCase::NoCommonCoset;
                return rep;
            }
            const auto off = coset_offset(point_values(reflected), *span.lambda);
            if (!off) {
                rep.kind = UnitModulusCase::NoCommonCoset;
                return rep;
            }
            rep.kind = UnitModulusCase::SymmetricPeriodic;
            rep.lambda0 = *off;
            rep.x0 = *off / (2.0 * *span.lambda);
            return rep;
        }
    }

    // no direct shift mass: the lattice, if any, comes from differences of the
    // reflected shifts (two reflections compose to a direct step)
    rep.reflected_span_convention = true;
    if (continuous(reflected)) {
        rep.kind = UnitModulusCase::NoCommonCoset;
        return rep;
    }
    const auto vals = point_values(reflected);
    std::vector<double> diffs;
    for (std::size_t i = 0; i < vals.size(); ++i)
        for (std::size_t j = i + 1; j < vals.size(); ++j) diffs.push_back(vals[i] - vals[j]);
    if (diffs.empty() || real_gcd_span(diffs).degenerate) {
        // a single reflection point: symmetric solutions with no period
        rep.kind = UnitModulusCase::SymmetricPeriodic;
        rep.lambda0 = vals[0];
        return rep;
    }
    const auto span = real_gcd_span(diffs);
    if (!span.arithmetic) {
        rep.kind = UnitModulusCase::NoCommonCoset;
        return rep;
    }
    const auto off = coset_offset(vals, *span.lambda);
    rep.kind = UnitModulusCase::SymmetricPeriodic;
    rep.lambda = span.lambda;
    rep.lambda0 = *off;
    rep.x0 = *off / (2.0 * *span.lambda);
    return rep;
}

std::function<double(double)> build_symmetric_solution(std::function<double(double)> g0,
                                                       double lambda, double lambda0) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    const double x0 = lambda0 / (2.0 * lambda);
    return [g0 = std::move(g0), lambda, x0](double x) {
        const double u = x / lambda;
        return g0(u - x0) + g0(-u + x0);
    };
}

namespace {

// smallest witness by total count, then lexicographically; positions with a
// zero exponent are pinned to zero and the end positions to at least one
bool witness_search(const std::vector<long long>& m, std::vector<long long>& best) {
    const std::size_t l = m.size();
    if (l > 6) return false;
    std::vector<long long> k(l, 0);
    long long best_sum = -1;
    const std::function<void(std::size_t, long long)> dfs = [&](std::size_t pos,
                                                                long long weighted) {
        if (pos == l) {
            if (weighted != 0) return;
            const long long sum = std::accumulate(k.begin(), k.end(), 0LL);
            if (best_sum < 0 || sum < best_sum ||
                (sum == best_sum && std::lexicographical_compare(k.begin(), k.end(),
                                                                 best.begin(), best.end()))) {
                best_sum = sum;
                best = k;
            }
            return;
        }
        const long long lo = (pos == 0 || pos == l - 1) ? 1 : 0;
        const long long hi = m[pos] == 0 ? lo : kWitnessBound;
        for (long long v = lo; v <= hi; ++v) {
            k[pos] = v;
            dfs(pos + 1, weighted + v * m[pos]);
        }
        k[pos] = 0;
    };
    if (m[0] == 0 || m[l - 1] == 0) return false;
    dfs(0, 0);
    return best_sum >= 0;
}

}  // namespace

QLatticeReport q_lattice_report(const CoefficientLaw& law, std::size_t n_theta,
                                std::size_t n_paths, std::uint64_t seed, int threads,
                                std::uint64_t cap) {
    if (!law.q_lattice()) throw InapplicableError("law declares no lattice");
    const auto& atoms = law.atoms();
    const auto& lat = *law.q_lattice();
    const std::size_t l = atoms.size();

    std::vector<double> b(l);
    for (std::size_t i = 0; i < l; ++i) {
        const auto* pm = std::get_if<PointMass>(&atoms[i].shift);
        if (!pm) throw InapplicableError("lattice analysis needs point shifts");
        b[i] = pm->b;
        if (lat.m[i] == 0 && b[i] == 0.0)
            throw std::invalid_argument("identity atoms carry no information here");
    }

    QLatticeReport rep;
    const auto bal = lattice_balance(law);
    rep.critical = bal.has_value() && bal->sign == 0;

    rep.rho.reserve(l);
    for (std::size_t i = 0; i < l; ++i) {
        if (lat.m[i] == 0)
            rep.rho.emplace_back(std::nullopt);  // a = 1 with a shift: no fixed point
        else
            rep.rho.emplace_back(b[i] / (1.0 - 1.0 / atoms[i].a));
    }
    bool any_marker = false, all_equal = true;
    std::optional<double> first;
    for (const auto& r : rep.rho) {
        if (!r) {
            any_marker = true;
        } else if (!first) {
            first = *r;
        } else if (std::fabs(*r - *first) > kRhoTol * std::max(1.0, std::fabs(*first))) {
            all_equal = false;
        }
    }
    if (!any_marker && all_equal && first) rep.resonant = *first;

    if (!rep.critical) return rep;  // the return-time analysis needs a recurrent walk

    if (!rep.resonant) {
        // proof ordering: a positive-exponent atom first, a negative one last,
        // fixed points differing across the ends when possible
        std::size_t i_star = l, j_star = l;
        for (std::size_t i = 0; i < l && i_star == l; ++i) {
            if (lat.m[i] <= 0) continue;
            for (std::size_t j = 0; j < l; ++j) {
                if (lat.m[j] >= 0) continue;
                if (std::fabs(*rep.rho[i] - *rep.rho[j]) >
                    kRhoTol * std::max(1.0, std::fabs(*rep.rho[i]))) {
                    i_star = i;
                    j_star = j;
                    break;
                }
            }
        }
        if (i_star == l) {
            for (std::size_t i = 0; i < l && i_star == l; ++i)
                if (lat.m[i] > 0) i_star = i;
            for (std::size_t j = 0; j < l && j_star == l; ++j)
                if (lat.m[j] < 0) j_star = j;
        }
        if (i_star == l || j_star == l)
            throw InapplicableError("walk analysis needs exponents of both signs");

        rep.relabel.push_back(i_star);
        for (std::size_t i = 0; i < l; ++i)
            if (i != i_star && i != j_star && lat.m[i] > 0) rep.relabel.push_back(i);
        for (std::size_t i = 0; i < l; ++i)
            if (i != i_star && i != j_star && lat.m[i] == 0) rep.relabel.push_back(i);
        for (std::size_t i = 0; i < l; ++i)
            if (i != i_star && i != j_star && lat.m[i] < 0) rep.relabel.push_back(i);
        rep.relabel.push_back(j_star);

        std::vector<long long> mm(l);
        for (std::size_t pos = 0; pos < l; ++pos) mm[pos] = lat.m[rep.relabel[pos]];
        std::vector<long long> k_rel(l, 0);
        if (!witness_search(mm, k_rel)) {
            const long long g = std::gcd(mm[0], -mm[l - 1]);
            k_rel.assign(l, 0);
            k_rel[0] = -mm[l - 1] / g;
            k_rel[l - 1] = mm[0] / g;
        }
        rep.k.assign(l, 0);
        for (std::size_t pos = 0; pos < l; ++pos) rep.k[rep.relabel[pos]] = k_rel[pos];

        long long s = 0;
        for (std::size_t pos = 0; pos + 1 < l; ++pos) {
            s += k_rel[pos] * mm[pos];
            rep.s.push_back(s);
            if (s <= 0) throw Error("internal: partial exponent sums must stay positive");
        }

        // reduced sequence of atoms the witness actually uses
        std::vector<std::size_t> used;
        for (std::size_t pos = 0; pos < l; ++pos)
            if (k_rel[pos] > 0) used.push_back(pos);
        const double q = lat.q;
        rep.theta.reserve(n_theta);
        for (std::size_t n = 1; n <= n_theta; ++n) {
            const double dn = static_cast<double>(n);
            double direct = 0.0;
            long long prefix = 0;
            for (std::size_t pos : used) {
                const long long e = k_rel[pos] * mm[pos];
                const double rho = *rep.rho[rep.relabel[pos]];
                direct += rho * (std::pow(q, -dn * static_cast<double>(prefix)) -
                                 std::pow(q, -dn * static_cast<double>(prefix + e)));
                prefix += e;
            }
            double tele = *rep.rho[rep.relabel[used.front()]] -
                          *rep.rho[rep.relabel[used.back()]];
            long long partial = 0;
            for (std::size_t t = 0; t + 1 < used.size(); ++t) {
                partial += k_rel[used[t]] * mm[used[t]];
                tele += (*rep.rho[rep.relabel[used[t + 1]]] -
                         *rep.rho[rep.relabel[used[t]]]) *
                        std::pow(q, -dn * static_cast<double>(partial));
            }
            if (std::fabs(direct - tele) > 1e-10 * std::max(1.0, std::fabs(direct)))
                throw Error("internal: support-point forms disagree");
            rep.theta.push_back(direct);
        }
        rep.theta_limit =
            *rep.rho[rep.relabel[used.front()]] - *rep.rho[rep.relabel[used.back()]];
    }

    if (n_paths > 0) {
        auto samples = sample_stopped_shift(law, LatticeReturn{}, n_paths, cap, seed,
                                            static_cast<unsigned>(threads));
        rep.cap_rate = samples.cap_rate;
        rep.empirical_span = real_gcd_span(samples.values);
    }
    return rep;
}

}  // namespace rescale
