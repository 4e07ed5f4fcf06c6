#pragma once

#include <cstddef>
#include <vector>

#include "rescale/grid.hpp"
#include "rescale/laws.hpp"

namespace rescale {

struct QuadratureSettings {
    double tail_tol = 1e-10;   // density mass allowed outside the truncated support
    double node_spacing = 0.0; // 0 means: use the grid spacing
    // renormalize per-atom weights to sum 1 (keeps constants exactly fixed);
    // disabling it surfaces truncation loss as QuadratureUnderflowError
    bool renormalize = true;
    // residual window keeps nodes whose out-of-grid image weight is at most
    // this much; the clamp bias there is bounded by it times the value range
    double clamp_bias_tol = 1e-6;
};

// Per-atom discretization of the shift distribution.
struct AtomQuad {
    double a = 1.0;
    double p = 1.0;
    std::vector<double> nodes;
    std::vector<double> weights;
};

std::vector<AtomQuad> build_quadrature(const CoefficientLaw& law, const QuadratureSettings& quad,
                                       double dx);

// One application of the averaging step y(x) <- E y(a(x - t)) on the grid.
GridFunction apply_operator(const GridFunction& y, const CoefficientLaw& law,
                            const QuadratureSettings& quad = {}, unsigned threads = 1);

struct IterationTrace {
    std::vector<double> step_norms;   // sup |y_{k+1} - y_k| per iteration
    std::vector<double> dispersions;  // max - min over the middle half, per iteration
    double final_residual = 0.0;
};

struct PicardResult {
    GridFunction y;
    IterationTrace trace;
};

PicardResult picard_iterate(const GridFunction& y0, const CoefficientLaw& law,
                            std::size_t max_iter, double step_tol,
                            const QuadratureSettings& quad = {}, unsigned threads = 1);

// Node index range [first, last] whose images a(x - t), t in [t_lo, t_hi],
// stay inside the grid for every listed image map. Throws GridTooCoarseError
// when no node qualifies.
struct ImageMap {
    double a;
    double t_lo;
    double t_hi;
};
std::pair<std::size_t, std::size_t> interior_node_range(const GridFunction& y,
                                                        const std::vector<ImageMap>& images);

// Sup of |y - T y| over the interior window where the operator incurs no
// clamp bias.
double residual_sup(const GridFunction& y, const CoefficientLaw& law,
                    const QuadratureSettings& quad = {}, unsigned threads = 1);

struct Window {
    double lo;
    double hi;
};

Window middle_half(const GridFunction& y);

// max - min of the interpolated function over the window
double dispersion(const GridFunction& y, const Window& w);

// max over nodes of |y(x + h) - y(x)|; requires h >= dx
double modulus_of_continuity(const GridFunction& y, double h);

}  // namespace rescale
