#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace rescale {

// Piecewise-linear function on a uniform grid. Evaluation outside the span
// clamps to the nearest endpoint value, so bounded functions stay bounded.
class GridFunction {
public:
    GridFunction(double x_min, double dx, std::vector<double> values);

    double x_min() const { return x_min_; }
    double x_max() const { return x_min_ + dx_ * static_cast<double>(values_.size() - 1); }
    double dx() const { return dx_; }
    std::size_t size() const { return values_.size(); }
    double x(std::size_t i) const { return x_min_ + dx_ * static_cast<double>(i); }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    double operator()(double x) const;

private:
    double x_min_;
    double dx_;
    std::vector<double> values_;
};

// Samples fn at the nodes of the uniform grid covering [x_min, x_max].
GridFunction sample_on_grid(double x_min, double x_max, double dx,
                            const std::function<double(double)>& fn);

// Largest pointwise gap between two functions on the same grid.
double sup_distance(const GridFunction& a, const GridFunction& b);

double min_value(const GridFunction& y);
double max_value(const GridFunction& y);

}  // namespace rescale
