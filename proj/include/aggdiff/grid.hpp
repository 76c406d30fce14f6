#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace aggdiff {

enum class Boundary { NoFlux, WholeLineTruncated };

// Cell-averaged density on a uniform 1D grid. Cell i covers
// [x_left + i*dx, x_left + (i+1)*dx].
struct GridField {
    std::vector<double> values;
    double x_left = 0.0;
    double dx = 1.0;
    Boundary bc = Boundary::NoFlux;

    std::size_t size() const { return values.size(); }
    double x_right() const { return x_left + dx * static_cast<double>(values.size()); }
    double center(std::size_t i) const { return x_left + (static_cast<double>(i) + 0.5) * dx; }
    double mass() const;
    double max_value() const;
    double min_value() const;

    // Same grid, all cells zero.
    GridField zeros_like() const;

    static GridField zeros(double left, double right, std::size_t cells, Boundary bc = Boundary::NoFlux);

    // Cell averages of fn by 8-point Gauss-Legendre per cell.
    static GridField from_function(double left, double right, std::size_t cells,
                                   const std::function<double(double)>& fn,
                                   Boundary bc = Boundary::NoFlux);

    // value * indicator of [a, b], with exact partial-cell overlap.
    static GridField indicator(double left, double right, std::size_t cells, double a, double b,
                               double value, Boundary bc = Boundary::NoFlux);
};

// L1 distance between two fields on the same grid.
double l1_distance(const GridField& a, const GridField& b);

// Sum of |a_i - b_i| dx where b is averaged or sampled onto a's grid
// through its piecewise-linear cumulative mass.
double l1_distance_resampled(const GridField& a, const GridField& b);

// Cumulative mass at the cell faces (size n+1), starting at 0.
std::vector<double> cumulative_mass(const GridField& f);

}  // namespace aggdiff
