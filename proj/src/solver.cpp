#include "rescale/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rescale/errors.hpp"
#include "rescale/pantograph.hpp"
#include "rescale/rng.hpp"

namespace rescale {

namespace {

double shift_density(const ShiftLaw& shift, double t) {
    return std::visit(
        [t](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return 0.0;  // never sampled through a density
            } else if constexpr (std::is_same_v<T, ExponentialFrom>) {
                return t >= s.c ? std::exp(-(t - s.c)) : 0.0;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return t >= s.lo && t <= s.hi ? 1.0 / (s.hi - s.lo) : 0.0;
            } else {
                return xi_density(s.kappas, t - s.c);
            }
        },
        shift);
}

}  // namespace

std::vector<AtomQuad> build_quadrature(const CoefficientLaw& law, const QuadratureSettings& quad,
                                       double dx) {
    std::vector<AtomQuad> out;
    out.reserve(law.atoms().size());
    for (const auto& atom : law.atoms()) {
        AtomQuad aq;
        aq.a = atom.a;
        aq.p = atom.p;
        if (const auto* pm = std::get_if<PointMass>(&atom.shift)) {
            aq.nodes = {pm->b};
            aq.weights = {1.0};
        } else {
            const auto [lo, hi] = shift_support(atom.shift, quad.tail_tol);
            const double h_req = quad.node_spacing > 0.0 ? quad.node_spacing : dx;
            const std::size_t n =
                std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil((hi - lo) / h_req)) + 1);
            const double h = (hi - lo) / static_cast<double>(n - 1);
            aq.nodes.resize(n);
            aq.weights.resize(n);
            double mass = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                aq.nodes[k] = lo + h * static_cast<double>(k);
                const double w =
                    shift_density(atom.shift, aq.nodes[k]) * h * (k == 0 || k == n - 1 ? 0.5 : 1.0);
                aq.weights[k] = w;
                mass += w;
            }
            if (quad.renormalize) {
                for (double& w : aq.weights) w /= mass;
            } else if (1.0 - mass > quad.tail_tol) {
                throw QuadratureUnderflowError(
                    "discretized shift mass falls short of 1 beyond tail_tol");
            }
        }
        out.push_back(std::move(aq));
    }
    return out;
}

GridFunction apply_operator(const GridFunction& y, const CoefficientLaw& law,
                            const QuadratureSettings& quad, unsigned threads) {
    const auto atoms = build_quadrature(law, quad, y.dx());
    std::vector<double> out(y.size());
    parallel_blocks(y.size(), threads, 1024, [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double x = y.x(i);
            const double center = y.values()[i];
            // accumulate deviations from the node's own value so that a
            // constant function is a bitwise fixed point
            double total = 0.0;
            for (const auto& aq : atoms) {
                double s = 0.0;
                for (std::size_t k = 0; k < aq.nodes.size(); ++k)
                    s += aq.weights[k] * (y(aq.a * (x - aq.nodes[k])) - center);
                total += aq.p * s;
            }
            out[i] = center + total;
        }
    });
    return GridFunction(y.x_min(), y.dx(), std::move(out));
}

std::pair<std::size_t, std::size_t> interior_node_range(const GridFunction& y,
                                                        const std::vector<ImageMap>& images) {
    const double g_lo = y.x_min(), g_hi = y.x_max();
    double x_lo = g_lo, x_hi = g_hi;
    for (const auto& im : images) {
        if (im.a > 0.0) {
            x_lo = std::max(x_lo, g_lo / im.a + im.t_hi);
            x_hi = std::min(x_hi, g_hi / im.a + im.t_lo);
        } else if (im.a < 0.0) {
            x_lo = std::max(x_lo, g_hi / im.a + im.t_hi);
            x_hi = std::min(x_hi, g_lo / im.a + im.t_lo);
        } else if (g_lo > 0.0 || g_hi < 0.0) {
            throw GridTooCoarseError("zero-scaling image 0 lies outside the grid");
        }
    }
    const double dx = y.dx();
    const double ilo_f = std::ceil((x_lo - g_lo) / dx - 1e-9);
    const double ihi_f = std::floor((x_hi - g_lo) / dx + 1e-9);
    if (ihi_f < ilo_f || ihi_f < 0.0)
        throw GridTooCoarseError("no grid node has all operator images inside the grid");
    const std::size_t ilo = static_cast<std::size_t>(std::max(0.0, ilo_f));
    const std::size_t ihi =
        std::min(static_cast<std::size_t>(ihi_f), y.size() - 1);
    if (ilo > ihi) throw GridTooCoarseError("no grid node has all operator images inside the grid");
    return {ilo, ihi};
}

double residual_sup(const GridFunction& y, const CoefficientLaw& law,
                    const QuadratureSettings& quad, unsigned threads) {
    const auto atoms = build_quadrature(law, quad, y.dx());
    const GridFunction ty = apply_operator(y, law, quad, threads);
    const double g_lo = y.x_min(), g_hi = y.x_max();
    double worst = -1.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double x = y.x(i);
        double outside = 0.0;
        for (const auto& aq : atoms)
            for (std::size_t k = 0; k < aq.nodes.size(); ++k) {
                const double img = aq.a * (x - aq.nodes[k]);
                if (img < g_lo || img > g_hi) outside += aq.p * aq.weights[k];
            }
        if (outside > quad.clamp_bias_tol) continue;
        worst = std::max(worst, std::fabs(y.values()[i] - ty.values()[i]));
    }
    if (worst < 0.0)
        throw GridTooCoarseError("every node carries clamp bias beyond the allowed bound");
    return worst;
}

PicardResult picard_iterate(const GridFunction& y0, const CoefficientLaw& law,
                            std::size_t max_iter, double step_tol,
                            const QuadratureSettings& quad, unsigned threads) {
    PicardResult out{y0, {}};
    const Window win = middle_half(y0);
    GridFunction y = y0;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        GridFunction y_next = apply_operator(y, law, quad, threads);
        const double step = sup_distance(y, y_next);
        y = std::move(y_next);
        out.trace.step_norms.push_back(step);
        out.trace.dispersions.push_back(dispersion(y, win));
        if (step <= step_tol) break;
    }
    out.trace.final_residual = residual_sup(y, law, quad, threads);
    out.y = std::move(y);
    return out;
}

Window middle_half(const GridFunction& y) {
    const double span = y.x_max() - y.x_min();
    return {y.x_min() + 0.25 * span, y.x_max() - 0.25 * span};
}

double dispersion(const GridFunction& y, const Window& w) {
    if (!(w.lo <= w.hi)) throw std::invalid_argument("window is empty");
    double lo = std::min(y(w.lo), y(w.hi));
    double hi = std::max(y(w.lo), y(w.hi));
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double x = y.x(i);
        if (x <= w.lo || x >= w.hi) continue;
        lo = std::min(lo, y.values()[i]);
        hi = std::max(hi, y.values()[i]);
    }
    return hi - lo;
}

double modulus_of_continuity(const GridFunction& y, double h) {
    if (!(h >= y.dx())) throw std::invalid_argument("step must be at least the grid spacing");
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        worst = std::max(worst, std::fabs(y(y.x(i) + h) - y.values()[i]));
    return worst;
}

}  // namespace rescale
