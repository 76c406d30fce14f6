#pragma once

#include <string>
#include <variant>

#include "aggdiff/kernels.hpp"

namespace aggdiff {

struct PowerLaw {
    double m = 3.0;
};
struct HardSphere {};
struct SingularReciprocal {
    double alpha = 1.0;
};
struct SingularLog {
    double alpha = 1.0;
};

using PressureLaw = std::variant<PowerLaw, HardSphere, SingularReciprocal, SingularLog>;

void validate_law(const PressureLaw& law);
std::string law_name(const PressureLaw& law);

// f and its derivatives. For the singular laws f' is the pressure p_alpha
// and f is its primitive with f(0) = 0. HardSphere returns +inf above 1
// from f_eval; its derivatives are not single valued and throw.
double f_eval(const PressureLaw& law, double rho);
double f_prime(const PressureLaw& law, double rho);
double f_second(const PressureLaw& law, double rho);

// P(rho) = int_0^rho s f''(s) ds, so that rho * d/dx f'(rho) = d/dx P(rho).
// Equals rho^m for PowerLaw.
double pressure_potential(const PressureLaw& law, double rho);

double theta_star(double m, double sigma);

// h(rho) = f(rho) - rho^2/(2 sigma) + a rho, with wells at 0 and theta.
struct DoubleWell {
    PressureLaw law;
    double sigma = 1.0;
    double theta = 1.0;
    double a_shift = 0.0;

    // PowerLaw with m > 2, or HardSphere.
    static DoubleWell make(const PressureLaw& law, double sigma);
};

double h_eval(const DoubleWell& dw, double rho);
double h_prime(const DoubleWell& dw, double rho);
double h_hull_eval(const DoubleWell& dw, double rho);
double h_hull_prime(const DoubleWell& dw, double rho);
// Q(rho) = int_0^rho s h**''(s) ds: the Stefan-limit diffusion potential.
double hull_pressure_potential(const DoubleWell& dw, double rho);

double cell_potential_g(const DoubleWell& dw, double s);
double surface_tension_gamma(const DoubleWell& dw);
double beta_moment(const InteractionKernel& kernel);

}  // namespace aggdiff
