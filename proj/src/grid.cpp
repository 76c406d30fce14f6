#include "aggdiff/grid.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "aggdiff/errors.hpp"

namespace aggdiff {

double GridField::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * dx;
}

double GridField::max_value() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

double GridField::min_value() const {
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

GridField GridField::zeros_like() const {
    GridField g = *this;
    std::fill(g.values.begin(), g.values.end(), 0.0);
    return g;
}

GridField GridField::zeros(double left, double right, std::size_t cells, Boundary bc) {
    if (!(right > left) || cells == 0) throw InputError("grid needs right > left and at least one cell");
    GridField g;
    g.values.assign(cells, 0.0);
    g.x_left = left;
    g.dx = (right - left) / static_cast<double>(cells);
    g.bc = bc;
    return g;
}

GridField GridField::from_function(double left, double right, std::size_t cells,
                                   const std::function<double(double)>& fn, Boundary bc) {
    GridField g = zeros(left, right, cells, bc);
    using GL = boost::math::quadrature::gauss<double, 8>;
    for (std::size_t i = 0; i < cells; ++i) {
        const double a = g.x_left + static_cast<double>(i) * g.dx;
        g.values[i] = GL::integrate(fn, a, a + g.dx) / g.dx;
    }
    return g;
}

GridField GridField::indicator(double left, double right, std::size_t cells, double a, double b,
                               double value, Boundary bc) {
    GridField g = zeros(left, right, cells, bc);
    for (std::size_t i = 0; i < cells; ++i) {
        const double lo = g.x_left + static_cast<double>(i) * g.dx;
        const double hi = lo + g.dx;
        const double overlap = std::max(0.0, std::min(hi, b) - std::max(lo, a));
        // Snap near-complete overlaps so aligned indicators are exact.
        double frac = overlap / g.dx;
        if (std::abs(frac - 1.0) < 1e-9) frac = 1.0;
        if (frac < 1e-9) frac = 0.0;
        g.values[i] = value * frac;
    }
    return g;
}

double l1_distance(const GridField& a, const GridField& b) {
    if (a.size() != b.size() || std::abs(a.dx - b.dx) > 1e-12 * a.dx ||
        std::abs(a.x_left - b.x_left) > 1e-9 * a.dx)
        return l1_distance_resampled(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
    return s * a.dx;
}

std::vector<double> cumulative_mass(const GridField& f) {
    std::vector<double> c(f.size() + 1, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) c[i + 1] = c[i] + f.values[i] * f.dx;
    return c;
}

namespace {

double cumulative_at(const GridField& f, const std::vector<double>& c, double x) {
    if (x <= f.x_left) return 0.0;
    if (x >= f.x_right()) return c.back();
    const double r = (x - f.x_left) / f.dx;
    std::size_t i = std::min(static_cast<std::size_t>(r), f.size() - 1);
    return c[i] + (r - static_cast<double>(i)) * f.values[i] * f.dx;
}

}  // namespace

double l1_distance_resampled(const GridField& a, const GridField& b) {
    const auto cb = cumulative_mass(b);
    double s = 0.0;
    // Mass of b outside a's interval counts fully.
    s += cumulative_at(b, cb, a.x_left);
    s += cb.back() - cumulative_at(b, cb, a.x_right());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double lo = a.x_left + static_cast<double>(i) * a.dx;
        const double avg = (cumulative_at(b, cb, lo + a.dx) - cumulative_at(b, cb, lo)) / a.dx;
        s += std::abs(a.values[i] - avg) * a.dx;
    }
    return s;
}

}  // namespace aggdiff
