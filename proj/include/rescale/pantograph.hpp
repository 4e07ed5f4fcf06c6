#pragma once

#include <vector>

#include "rescale/grid.hpp"
#include "rescale/laws.hpp"
#include "rescale/solver.hpp"

namespace rescale {

// Order-r functional-differential problem: prod_j (1 + D/kappa_j) y = phi,
// phi(x) = sum_i p_i y(a_i(x - c_i)).
struct PantographAtom {
    double a = 1.0;
    double c = 0.0;
    double p = 1.0;
};

struct PantographSpec {
    std::vector<double> kappas;        // all nonzero
    std::vector<PantographAtom> base;  // probabilities sum to 1
};

void validate_spec(const PantographSpec& spec);

// Equivalent averaging-equation law: shift = c_i + sum_j eta_j / kappa_j with
// standard exponentials eta_j.
CoefficientLaw pantograph_to_archetypal(const PantographSpec& spec);

// Density of sum_j eta_j / kappa_j. Closed forms for r <= 2 and for pairwise
// distinct rates; numeric convolution otherwise.
double xi_density(const std::vector<double>& kappas, double t);

// Sup over usable interior nodes of |prod_j (1 + D/kappa_j) y - phi|, with D
// applied by iterated central differences (each application costs one node of
// margin and keeps O(dx^2) accuracy). Throws GridTooCoarseError when the
// dx^2-scale difference noise exceeds requested_tol.
double ode_residual(const GridFunction& y, const PantographSpec& spec,
                    double requested_tol = 0.0);

// First-order solve (r = 1, kappa = 1 only): iterate
//   y_{k+1}(x) = integral_{-inf}^x phi_k(u) e^{u-x} du,
// with the left tail closed analytically by the clamp constant. Throws
// InapplicableError for any other spec.
PicardResult picard_variation_of_constants(const GridFunction& y0, const PantographSpec& spec,
                                           std::size_t max_iter, double step_tol);

}  // namespace rescale
