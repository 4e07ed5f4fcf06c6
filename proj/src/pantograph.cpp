#include "rescale/pantograph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "rescale/errors.hpp"

namespace rescale {

namespace {

// density of one component sgn(k) * Exp(|k|)
double component_density(double k, double t) {
    if (k > 0.0) return t >= 0.0 ? k * std::exp(-k * t) : 0.0;
    const double nu = -k;
    return t <= 0.0 ? nu * std::exp(nu * t) : 0.0;
}

// exact average of component_density over [ta, tb]; integrating through the
// jump at 0 keeps the discrete convolution free of boundary excess
double component_cell_average(double k, double ta, double tb) {
    const double h = tb - ta;
    if (k > 0.0) {
        const double a = std::max(ta, 0.0), b = std::max(tb, 0.0);
        if (b <= a) return 0.0;
        return (std::exp(-k * a) - std::exp(-k * b)) / h;
    }
    const double nu = -k;
    const double a = std::min(ta, 0.0), b = std::min(tb, 0.0);
    if (b <= a) return 0.0;
    return (std::exp(nu * b) - std::exp(nu * a)) / h;
}

bool pairwise_distinct(const std::vector<double>& ks) {
    for (std::size_t i = 0; i < ks.size(); ++i)
        for (std::size_t j = i + 1; j < ks.size(); ++j)
            if (std::fabs(ks[i] - ks[j]) <= 1e-9 * std::max(std::fabs(ks[i]), std::fabs(ks[j])))
                return false;
    return true;
}

// bilateral partial-fraction form for pairwise distinct rates
double distinct_rate_density(const std::vector<double>& ks, double t) {
    double prod = 1.0;
    for (double k : ks) prod *= k;
    double f = 0.0;
    for (std::size_t j = 0; j < ks.size(); ++j) {
        double r = prod;
        for (std::size_t l = 0; l < ks.size(); ++l)
            if (l != j) r /= ks[l] - ks[j];
        if (ks[j] > 0.0) {
            if (t >= 0.0) f += r * std::exp(-ks[j] * t);
        } else {
            if (t < 0.0) f -= r * std::exp(-ks[j] * t);
        }
    }
    return std::max(f, 0.0);  // roundoff can leave a tiny negative tail
}

struct ConvGrid {
    double lo = 0.0;
    double h = 1.0;
    std::vector<double> f;

    double eval(double t) const {
        const double u = (t - lo) / h;
        if (u <= 0.0 || u >= static_cast<double>(f.size() - 1)) return 0.0;
        const std::size_t i = static_cast<std::size_t>(u);
        const double theta = u - static_cast<double>(i);
        return f[i] + theta * (f[i + 1] - f[i]);
    }
};

// iterated numeric convolution for rate lists with repeats at order >= 3
const ConvGrid& convolved_density(const std::vector<double>& ks) {
    static std::map<std::vector<double>, ConvGrid> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(ks);
    if (it != cache.end()) return it->second;

    const auto [lo, hi] = shift_support(PointPlusHypoexp{0.0, ks}, 1e-13);
    constexpr std::size_t n = 8192;
    ConvGrid g;
    g.lo = lo;
    g.h = (hi - lo) / static_cast<double>(n - 1);
    g.f.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = lo + g.h * static_cast<double>(i);
        g.f[i] = component_cell_average(ks[0], c - 0.5 * g.h, c + 0.5 * g.h);
    }
    std::vector<double> next(n), kernel(2 * n - 1);
    for (std::size_t j = 1; j < ks.size(); ++j) {
        for (std::size_t d = 0; d < kernel.size(); ++d) {
            const double c = (static_cast<double>(d) - static_cast<double>(n - 1)) * g.h;
            kernel[d] = component_cell_average(ks[j], c - 0.5 * g.h, c + 0.5 * g.h);
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            // x_i - x_k = (i - k) h; kernel index (i - k) + (n - 1)
            for (std::size_t k = 0; k < n; ++k) s += g.f[k] * kernel[i + n - 1 - k];
            next[i] = s * g.h;
        }
        g.f.swap(next);
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mass += g.f[i] * (i == 0 || i == n - 1 ? 0.5 : 1.0);
    mass *= g.h;
    for (double& v : g.f) v /= mass;
    return cache.emplace(ks, std::move(g)).first->second;
}

}  // namespace

void validate_spec(const PantographSpec& spec) {
    if (spec.kappas.empty()) throw std::invalid_argument("spec needs at least one rate");
    for (double k : spec.kappas)
        if (k == 0.0 || !std::isfinite(k))
            throw std::invalid_argument("rates must be nonzero finite");
    if (spec.base.empty()) throw std::invalid_argument("spec needs at least one base atom");
    double sum = 0.0;
    for (const auto& atom : spec.base) {
        if (!std::isfinite(atom.a) || !std::isfinite(atom.c))
            throw std::invalid_argument("base atom values must be finite");
        if (!(atom.p > 0.0) || atom.p > 1.0)
            throw std::invalid_argument("base probabilities must lie in (0, 1]");
        sum += atom.p;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("base probabilities must sum to 1");
}

CoefficientLaw pantograph_to_archetypal(const PantographSpec& spec) {
    validate_spec(spec);
    std::vector<Atom> atoms;
    atoms.reserve(spec.base.size());
    for (const auto& b : spec.base)
        atoms.push_back({b.a, b.p, PointPlusHypoexp{b.c, spec.kappas}});
    return CoefficientLaw(std::move(atoms));
}

double xi_density(const std::vector<double>& kappas, double t) {
    if (kappas.empty()) throw std::invalid_argument("density needs at least one rate");
    const std::size_t r = kappas.size();
    if (r == 1) return component_density(kappas[0], t);
    if (r == 2) {
        const double k1 = kappas[0], k2 = kappas[1];
        if (std::fabs(k1 - k2) <= 1e-9 * std::max(std::fabs(k1), std::fabs(k2))) {
            const double k = 0.5 * (k1 + k2);
            if (k > 0.0) return t >= 0.0 ? k * k * t * std::exp(-k * t) : 0.0;
            const double nu = -k;
            return t <= 0.0 ? nu * nu * (-t) * std::exp(nu * t) : 0.0;
        }
        return distinct_rate_density(kappas, t);
    }
    if (pairwise_distinct(kappas)) return distinct_rate_density(kappas, t);
    return convolved_density(kappas).eval(t);
}

double ode_residual(const GridFunction& y, const PantographSpec& spec, double requested_tol) {
    validate_spec(spec);
    const std::size_t r = spec.kappas.size();
    const double dx = y.dx();
    if (requested_tol > 0.0 && dx * dx * std::max(1.0, std::fabs(max_value(y))) > requested_tol)
        throw GridTooCoarseError("grid spacing too coarse for the requested residual tolerance");
    if (y.size() < 2 * r + 3) throw GridTooCoarseError("grid too small for the difference stencils");

    // coefficients of prod_j (1 + D/kappa_j) as a polynomial in D
    std::vector<double> coef{1.0};
    for (double k : spec.kappas) {
        std::vector<double> nxt(coef.size() + 1, 0.0);
        for (std::size_t i = 0; i < coef.size(); ++i) {
            nxt[i] += coef[i];
            nxt[i + 1] += coef[i] / k;
        }
        coef.swap(nxt);
    }

    // iterated central first differences; order j usable on [j, n-1-j]
    const std::size_t n = y.size();
    std::vector<std::vector<double>> deriv(r + 1);
    deriv[0] = y.values();
    for (std::size_t j = 1; j <= r; ++j) {
        deriv[j].assign(n, 0.0);
        for (std::size_t i = j; i + j < n; ++i)
            deriv[j][i] = (deriv[j - 1][i + 1] - deriv[j - 1][i - 1]) / (2.0 * dx);
    }

    std::vector<ImageMap> images;
    images.reserve(spec.base.size());
    for (const auto& atom : spec.base) images.push_back({atom.a, atom.c, atom.c});
    auto [ilo, ihi] = interior_node_range(y, images);
    ilo = std::max(ilo, r);
    ihi = std::min(ihi, n - 1 - r);
    if (ilo > ihi) throw GridTooCoarseError("no interior node clears the stencil margins");

    double worst = 0.0;
    for (std::size_t i = ilo; i <= ihi; ++i) {
        double lhs = 0.0;
        for (std::size_t j = 0; j <= r; ++j) lhs += coef[j] * deriv[j][i];
        double phi = 0.0;
        const double x = y.x(i);
        for (const auto& atom : spec.base) phi += atom.p * y(atom.a * (x - atom.c));
        worst = std::max(worst, std::fabs(lhs - phi));
    }
    return worst;
}

PicardResult picard_variation_of_constants(const GridFunction& y0, const PantographSpec& spec,
                                           std::size_t max_iter, double step_tol) {
    validate_spec(spec);
    if (spec.kappas.size() != 1 || std::fabs(spec.kappas[0] - 1.0) > 1e-12)
        throw InapplicableError("variation-of-constants solve covers only order 1 with unit rate");

    const std::size_t n = y0.size();
    const double dx = y0.dx();
    const double decay = std::exp(-dx);
    // exact update weights for a piecewise-linear integrand against e^{u-x}
    const double w_b = (-std::expm1(-dx) - dx * decay) / dx;
    const double w_a = -std::expm1(-dx) - w_b;

    GridFunction y = y0;
    PicardResult out{y0, {}};
    std::vector<double> phi(n), next(n);
    const Window win = middle_half(y0);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            const double x = y.x(i);
            for (const auto& atom : spec.base) s += atom.p * y(atom.a * (x - atom.c));
            phi[i] = s;
        }
        // left tail closed with the clamp constant: integral of phi[0] e^{u-x}
        next[0] = phi[0];
        for (std::size_t i = 1; i < n; ++i)
            next[i] = decay * next[i - 1] + w_a * phi[i] + w_b * phi[i - 1];
        GridFunction y_next(y.x_min(), dx, next);
        const double step = sup_distance(y, y_next);
        y = std::move(y_next);
        out.trace.step_norms.push_back(step);
        out.trace.dispersions.push_back(dispersion(y, win));
        if (step <= step_tol) break;
    }
    out.trace.final_residual = ode_residual(y, spec);
    out.y = std::move(y);
    return out;
}

}  // namespace rescale
