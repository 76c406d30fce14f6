#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "aggdiff/ensemble.hpp"
#include "aggdiff/grid.hpp"

namespace aggdiff {

struct FreeSpace1D {};
struct BoundedInterval {
    double left = 0.0;
    double right = 1.0;
};

// Green function of sigma*G - eta*G'' = delta in 1D, optionally rescaled
// as G_eps(x) = G(x/eps)/eps.
struct InteractionKernel {
    double sigma = 1.0;
    double eta = 1.0;
    std::variant<FreeSpace1D, BoundedInterval> domain = FreeSpace1D{};
    double scale_eps = 1.0;

    void validate() const;
    bool free_space() const { return std::holds_alternative<FreeSpace1D>(domain); }
    // G_eps(x) = amplitude * exp(-decay_rate * |x|)
    double decay_rate() const;
    double amplitude() const;
    InteractionKernel rescaled(double eps) const;
};

double green_eval(const InteractionKernel& kernel, double x);
double green_derivative(const InteractionKernel& kernel, double x);
// Integral of G_eps over [x, inf) for x >= 0.
double green_tail_mass(const InteractionKernel& kernel, double x);
// Half-width beyond which G_eps is below tol relative to its peak.
double truncation_length(const InteractionKernel& kernel, double tol = 1e-14);

struct KernelTable {
    std::vector<double> x;
    std::vector<double> value;
};
// Samples on [-L, L] with an odd number of nodes (0 is a node).
KernelTable tabulate_green(const InteractionKernel& kernel, double spacing);
// Composite Simpson integral of a table with uniform nodes (odd count).
double simpson(const std::vector<double>& values, double spacing);

enum class MollifierShape { IndicatorBall, SmoothBump };

// Unit-mass even kernel supported in [-delta, delta].
class Mollifier {
public:
    Mollifier(double delta, MollifierShape shape = MollifierShape::SmoothBump);

    double delta() const { return delta_; }
    MollifierShape shape() const { return shape_; }
    double normalization() const { return norm_; }

    double value(double x) const;
    double derivative(double x) const;
    // Integral of K over (-inf, x].
    double primitive(double x) const;
    // Integral of primitive over (-inf, x]; equals x for x >= delta.
    double second_primitive(double x) const;

private:
    double delta_;
    MollifierShape shape_;
    double norm_;
};

// Cell averages of K_delta * rho. NoFlux fields are reflected at the
// boundary faces so mass is kept exactly; WholeLineTruncated fields are
// extended by zero.
GridField mollify(const GridField& density, const Mollifier& mollifier);

// Cell averages of K_delta * rho_N on the given grid (spacing <= delta/4).
GridField mollify(const ParticleEnsemble& ens, const Mollifier& mollifier, double x_left,
                  double dx, std::size_t cells);
// Same, on a grid covering the particles +- 2 delta with spacing delta/8.
GridField mollify(const ParticleEnsemble& ens, const Mollifier& mollifier);

// G~ = K * G * K for a free-space exponential kernel. On |x| >= 2 delta the
// double convolution equals far_factor() * G(x) exactly; inside it is a
// cubic Hermite table.
class RegularizedKernel {
public:
    double value(double x) const;
    double derivative(double x) const;
    double spacing() const { return h_; }
    double support() const { return 2.0 * delta_; }
    double far_factor() const { return far_; }
    const InteractionKernel& kernel() const { return kernel_; }

    // out[i] = sum_j w_j G~'(x_i - x_j) for 1D positions; positions need not
    // be sorted. O(N * neighbours) via recursive exponential sums.
    std::vector<double> gradient_sum(const std::vector<double>& x, double w) const;
    // sum_i sum_j w^2 G~(x_i - x_j), diagonal included.
    double pair_sum(const std::vector<double>& x, double w) const;

    // Direct O(N^2) versions.
    std::vector<double> gradient_sum_direct(const std::vector<double>& x, double w) const;
    double pair_sum_direct(const std::vector<double>& x, double w) const;

private:
    friend RegularizedKernel regularized_kernel(const InteractionKernel&, const Mollifier&, double);
    InteractionKernel kernel_;
    double delta_ = 0.0;
    double h_ = 0.0;
    double far_ = 1.0;
    std::vector<double> v_, d1_, d2_;
};

// spacing = 0 picks delta/64; anything above delta/8 is a ConfigError.
RegularizedKernel regularized_kernel(const InteractionKernel& kernel, const Mollifier& mollifier,
                                     double spacing = 0.0);

// Exact cell-to-cell weights of the exponential kernel for piecewise
// constant densities: A_ij = int_{cell i} int_{cell j} G_eps(x - y).
class ExpConvolution {
public:
    ExpConvolution(const InteractionKernel& kernel, double dx);

    // (A rho)_i ; dividing by dx gives the cell average of G_eps * rho
    // with rho extended by zero outside the grid.
    std::vector<double> apply(const std::vector<double>& rho) const;
    // int_{cell i} of G_eps * indicator(outside the grid).
    std::vector<double> outside_mass(std::size_t cells) const;

    // Pointwise representation inside cell i at offset s in [0, dx]:
    // phi(s) = rho_i/sigma + alpha_i exp(-k s) + beta_i exp(-k (dx - s)).
    struct Profile {
        std::vector<double> alpha, beta;
        double left_face = 0.0, right_face = 0.0;  // phi at the grid ends
    };
    Profile profile(const std::vector<double>& rho) const;

    double diagonal() const { return a0_; }
    double off_diagonal(std::size_t n) const;
    double q() const { return q_; }
    double one_minus_q() const { return omq_; }
    double rate() const { return k_; }
    double amplitude() const { return c_; }
    double sigma() const { return sigma_; }
    double dx() const { return dx_; }

private:
    double sigma_, k_, c_, dx_, q_, omq_, a0_, coef_;
};

struct RobinBC {
    double a = 0.0;
    double b = 1.0;
    void validate() const;
};

// Cell-centred finite-volume solve of sigma*phi - eta*eps^2*phi'' = rho on
// the field's interval with a*phi + eps*b*dphi/dn = 0 at both ends.
GridField solve_potential(const GridField& rho, const InteractionKernel& kernel, double eps,
                          const RobinBC& bc);

// Boundary layer: sigma*tau - eta*eps^2*tau'' = 0 with
// a*tau + eps*b*dtau/dn = a/sigma at both ends of [left, right].
GridField tau_field(const InteractionKernel& kernel, double eps, const RobinBC& bc, double left,
                    double right, std::size_t cells);

// Residual max-norm of the discrete Robin system for a computed phi.
double potential_residual(const GridField& rho, const GridField& phi, const InteractionKernel& kernel,
                          double eps, const RobinBC& bc, double boundary_value = 0.0);

// Solves the tridiagonal system (lower, diag, upper) x = rhs in place.
void solve_tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                       std::vector<double>& rhs);

}  // namespace aggdiff
