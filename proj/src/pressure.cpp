#include "aggdiff/pressure.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "aggdiff/errors.hpp"

namespace aggdiff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_nonnegative(double rho) {
    if (!(rho >= 0.0) || std::isnan(rho)) throw DomainError("density must be nonnegative");
}

void check_below_one(double rho) {
    if (rho >= 1.0) throw DomainError("singular pressure law evaluated at density >= 1");
}

}  // namespace

void validate_law(const PressureLaw& law) {
    std::visit(overloaded{
                   [](const PowerLaw& p) {
                       if (!(p.m > 1.0) || !std::isfinite(p.m)) throw ConfigError("power law needs m > 1");
                   },
                   [](const HardSphere&) {},
                   [](const SingularReciprocal& p) {
                       if (!(p.alpha > 0.0)) throw ConfigError("singular law needs alpha > 0");
                   },
                   [](const SingularLog& p) {
                       if (!(p.alpha > 0.0)) throw ConfigError("singular law needs alpha > 0");
                   },
               },
               law);
}

std::string law_name(const PressureLaw& law) {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const PowerLaw& p) { os << "power(m=" << p.m << ")"; },
                   [&](const HardSphere&) { os << "hardsphere"; },
                   [&](const SingularReciprocal& p) { os << "reciprocal(alpha=" << p.alpha << ")"; },
                   [&](const SingularLog& p) { os << "log(alpha=" << p.alpha << ")"; },
               },
               law);
    return os.str();
}

double f_eval(const PressureLaw& law, double rho) {
    check_nonnegative(rho);
    return std::visit(overloaded{
                          [&](const PowerLaw& p) { return std::pow(rho, p.m) / (p.m - 1.0); },
                          [&](const HardSphere&) { return rho <= 1.0 ? 0.0 : kInf; },
                          [&](const SingularReciprocal& p) {
                              check_below_one(rho);
                              return -p.alpha * (rho + std::log1p(-rho));
                          },
                          [&](const SingularLog& p) {
                              check_below_one(rho);
                              return p.alpha * ((1.0 - rho) * std::log1p(-rho) + rho);
                          },
                      },
                      law);
}

double f_prime(const PressureLaw& law, double rho) {
    check_nonnegative(rho);
    return std::visit(overloaded{
                          [&](const PowerLaw& p) { return p.m * std::pow(rho, p.m - 1.0) / (p.m - 1.0); },
                          [&](const HardSphere&) -> double {
                              throw DomainError("hard-sphere pressure is multivalued; use a continuation law");
                          },
                          [&](const SingularReciprocal& p) {
                              check_below_one(rho);
                              return p.alpha * rho / (1.0 - rho);
                          },
                          [&](const SingularLog& p) {
                              check_below_one(rho);
                              return -p.alpha * std::log1p(-rho);
                          },
                      },
                      law);
}

double f_second(const PressureLaw& law, double rho) {
    check_nonnegative(rho);
    return std::visit(overloaded{
                          [&](const PowerLaw& p) {
                              if (rho == 0.0) return p.m < 2.0 ? kInf : (p.m == 2.0 ? 2.0 : 0.0);
                              return p.m * std::pow(rho, p.m - 2.0);
                          },
                          [&](const HardSphere&) -> double {
                              throw DomainError("hard-sphere pressure is multivalued; use a continuation law");
                          },
                          [&](const SingularReciprocal& p) {
                              check_below_one(rho);
                              return p.alpha / ((1.0 - rho) * (1.0 - rho));
                          },
                          [&](const SingularLog& p) {
                              check_below_one(rho);
                              return p.alpha / (1.0 - rho);
                          },
                      },
                      law);
}

double pressure_potential(const PressureLaw& law, double rho) {
    check_nonnegative(rho);
    return std::visit(overloaded{
                          [&](const PowerLaw& p) { return std::pow(rho, p.m); },
                          [&](const HardSphere&) -> double {
                              throw DomainError("hard-sphere pressure is multivalued; use a continuation law");
                          },
                          [&](const SingularReciprocal& p) {
                              check_below_one(rho);
                              return p.alpha * (rho / (1.0 - rho) + std::log1p(-rho));
                          },
                          [&](const SingularLog& p) {
                              check_below_one(rho);
                              return -p.alpha * (rho + std::log1p(-rho));
                          },
                      },
                      law);
}

double theta_star(double m, double sigma) {
    if (!(m > 2.0)) throw DomainError("theta_star needs m > 2");
    if (!(sigma > 0.0)) throw DomainError("theta_star needs sigma > 0");
    return std::pow(1.0 / (2.0 * sigma), 1.0 / (m - 2.0));
}

DoubleWell DoubleWell::make(const PressureLaw& law, double sigma) {
    validate_law(law);
    if (!(sigma > 0.0)) throw ConfigError("double well needs sigma > 0");
    DoubleWell dw;
    dw.law = law;
    dw.sigma = sigma;
    if (const auto* p = std::get_if<PowerLaw>(&law)) {
        dw.theta = theta_star(p->m, sigma);
        dw.a_shift = (p->m - 2.0) * std::pow(dw.theta, p->m - 1.0) / (p->m - 1.0);
    } else if (std::holds_alternative<HardSphere>(law)) {
        dw.theta = 1.0;
        dw.a_shift = 1.0 / (2.0 * sigma);
    } else {
        throw DomainError("double well is defined for power laws with m > 2 and the hard-sphere law");
    }
    return dw;
}

double h_eval(const DoubleWell& dw, double rho) {
    check_nonnegative(rho);
    if (const auto* p = std::get_if<PowerLaw>(&dw.law)) {
        const double m = p->m, t = dw.theta;
        // Factored form keeps h(theta) = 0 to rounding.
        return rho / (m - 1.0) *
               (std::pow(rho, m - 1.0) - (m - 1.0) * std::pow(t, m - 2.0) * rho + (m - 2.0) * std::pow(t, m - 1.0));
    }
    if (rho > 1.0) return kInf;
    return rho * (1.0 - rho) / (2.0 * dw.sigma);
}

double h_prime(const DoubleWell& dw, double rho) {
    check_nonnegative(rho);
    if (std::holds_alternative<HardSphere>(dw.law)) {
        if (rho > 1.0) throw DomainError("hard-sphere double well evaluated above 1");
        return (1.0 - 2.0 * rho) / (2.0 * dw.sigma);
    }
    return f_prime(dw.law, rho) - rho / dw.sigma + dw.a_shift;
}

double h_hull_eval(const DoubleWell& dw, double rho) {
    check_nonnegative(rho);
    return rho <= dw.theta ? 0.0 : h_eval(dw, rho);
}

double h_hull_prime(const DoubleWell& dw, double rho) {
    check_nonnegative(rho);
    return rho <= dw.theta ? 0.0 : h_prime(dw, rho);
}

double hull_pressure_potential(const DoubleWell& dw, double rho) {
    check_nonnegative(rho);
    if (rho <= dw.theta) return 0.0;
    if (std::holds_alternative<HardSphere>(dw.law)) throw DomainError("hard-sphere density above 1");
    const double t = dw.theta;
    return pressure_potential(dw.law, rho) - pressure_potential(dw.law, t) - (rho * rho - t * t) / (2.0 * dw.sigma);
}

double cell_potential_g(const DoubleWell& dw, double s) {
    if (!(s >= 0.0)) throw DomainError("cell potential needs s >= 0");
    const double sig = dw.sigma;
    auto objective = [&](double rho) {
        const double d = rho - sig * s;
        return h_eval(dw, rho) + d * d / (2.0 * sig);
    };
    // In rho the objective equals f(rho) + (a - s) rho + sigma s^2/2, which is
    // convex, so a single bracketed minimization finds the global minimum.
    double upper;
    if (std::holds_alternative<HardSphere>(dw.law)) {
        const double at0 = objective(0.0), at1 = objective(1.0);
        return std::max(0.0, std::min(at0, at1));
    }
    if (s <= dw.a_shift) return std::max(0.0, objective(0.0));
    upper = std::max(3.0 * dw.theta, 2.0 * sig * s);
    const auto r = boost::math::tools::brent_find_minima(objective, 0.0, upper, 52);
    return std::max(0.0, std::min(r.second, objective(0.0)));
}

double surface_tension_gamma(const DoubleWell& dw) {
    namespace q = boost::math::quadrature;
    const double upper = dw.theta / dw.sigma;
    auto integrand = [&](double s) { return std::sqrt(2.0 * cell_potential_g(dw, s)); };
    double err = 0.0;
    const double val = q::gauss_kronrod<double, 31>::integrate(integrand, 0.0, upper, 15, 1e-10, &err);
    if (!std::isfinite(val) || err > 1e-6 * std::abs(val)) {
        std::ostringstream os;
        os << "surface tension quadrature did not converge: value " << val << ", error estimate " << err;
        throw NumericalError(os.str());
    }
    return val / dw.theta;
}

double beta_moment(const InteractionKernel& kernel) {
    kernel.validate();
    if (!kernel.free_space()) throw ConfigError("beta_moment needs a free-space kernel");
    const double L = truncation_length(kernel);
    const double h = L / 20000.0;
    const auto t = tabulate_green(kernel, h);
    std::vector<double> w(t.x.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = t.x[i] * t.x[i] * t.value[i];
    const double beta = simpson(w, h);
    const double tail = 2.0 * L * L * green_eval(kernel, L) / kernel.decay_rate();
    if (!std::isfinite(beta) || tail > 1e-8 * beta) throw NumericalError("second moment tail does not vanish");
    return beta;
}

}  // namespace aggdiff
