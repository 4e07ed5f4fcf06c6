#include "rescale/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rescale {

GridFunction::GridFunction(double x_min, double dx, std::vector<double> values)
    : x_min_(x_min), dx_(dx), values_(std::move(values)) {
    if (!(dx_ > 0.0) || !std::isfinite(dx_) || !std::isfinite(x_min_))
        throw std::invalid_argument("grid needs finite x_min and dx > 0");
    if (values_.size() < 2) throw std::invalid_argument("grid needs at least two nodes");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("grid values must be finite");
}

double GridFunction::operator()(double x) const {
    const double u = (x - x_min_) / dx_;
    if (u <= 0.0) return values_.front();
    const std::size_t last = values_.size() - 1;
    if (u >= static_cast<double>(last)) return values_.back();
    const std::size_t i = static_cast<std::size_t>(u);
    const double theta = u - static_cast<double>(i);
    const double v1 = values_[i], v2 = values_[i + 1];
    return v1 + theta * (v2 - v1);  // exact when v1 == v2
}

GridFunction sample_on_grid(double x_min, double x_max, double dx,
                            const std::function<double(double)>& fn) {
    if (!(x_max > x_min)) throw std::invalid_argument("grid span must be nonempty");
    const std::size_t n = static_cast<std::size_t>(std::llround((x_max - x_min) / dx)) + 1;
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = fn(x_min + dx * static_cast<double>(i));
    return GridFunction(x_min, dx, std::move(values));
}

double sup_distance(const GridFunction& a, const GridFunction& b) {
    if (a.size() != b.size()) throw std::invalid_argument("grids must match");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.values()[i] - b.values()[i]));
    return m;
}

double min_value(const GridFunction& y) {
    return *std::min_element(y.values().begin(), y.values().end());
}

double max_value(const GridFunction& y) {
    return *std::max_element(y.values().begin(), y.values().end());
}

}  // namespace rescale
