#include <cmath>

#include "aggdiff/errors.hpp"
#include "aggdiff/pressure.hpp"
#include "doctest.h"

using namespace aggdiff;

TEST_CASE("pressure law values") {
    CHECK(f_eval(PowerLaw{3}, 2.0) == doctest::Approx(4.0));
    CHECK(f_eval(PowerLaw{2.5}, 0.0) == 0.0);
    CHECK(f_prime(SingularReciprocal{1.0}, 0.5) == doctest::Approx(1.0));
    CHECK(f_prime(SingularLog{2.0}, 0.5) == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(f_eval(HardSphere{}, 0.7) == 0.0);
    CHECK(std::isinf(f_eval(HardSphere{}, 1.5)));
    CHECK_THROWS_AS(f_prime(HardSphere{}, 0.5), DomainError);
    CHECK_THROWS_AS(f_eval(SingularReciprocal{1.0}, 1.0), DomainError);
    CHECK_THROWS_AS(f_prime(SingularLog{1.0}, 1.2), DomainError);
    CHECK_THROWS_AS(f_eval(PowerLaw{3}, -0.1), DomainError);
    CHECK_THROWS_AS(validate_law(PowerLaw{1.0}), ConfigError);
}

TEST_CASE("derivatives are consistent and f is convex") {
    const std::vector<PressureLaw> laws = {PowerLaw{2}, PowerLaw{3}, PowerLaw{7.5}, SingularReciprocal{0.3},
                                           SingularLog{0.5}};
    for (const auto& law : laws) {
        const double top = std::holds_alternative<PowerLaw>(law) ? 3.0 : 0.95;
        const double h = 1e-5;
        for (int i = 1; i < 200; ++i) {
            const double r = top * i / 200.0;
            if (r + h >= top && !std::holds_alternative<PowerLaw>(law)) continue;
            const double fd1 = (f_eval(law, r + h) - f_eval(law, r - h)) / (2 * h);
            const double fd2 = (f_eval(law, r + h) - 2 * f_eval(law, r) + f_eval(law, r - h)) / (h * h);
            CHECK(f_prime(law, r) == doctest::Approx(fd1).epsilon(1e-6));
            // rounding noise of the difference quotient scales like |f| 1e-16 / h^2
            CHECK(fd2 >= -1e-9 - 1e-15 * std::abs(f_eval(law, r)) / (h * h));
            CHECK(f_second(law, r) == doctest::Approx(fd2).epsilon(1e-3).scale(1.0 + std::abs(f_eval(law, r))));
            // P' = rho f''
            const double dp = (pressure_potential(law, r + h) - pressure_potential(law, r - h)) / (2 * h);
            CHECK(dp == doctest::Approx(r * f_second(law, r)).epsilon(1e-6));
        }
        CHECK(pressure_potential(law, 0.0) == 0.0);
    }
}

TEST_CASE("well location") {
    CHECK(std::abs(theta_star(3, 1) - 0.5) < 1e-12);
    CHECK(std::abs(theta_star(4, 1) - 0.7071067811865476) < 1e-12);
    CHECK(std::abs(theta_star(3, 0.5) - 1.0) < 1e-12);
    CHECK_THROWS_AS(theta_star(2.0, 1.0), DomainError);
    CHECK_THROWS_AS(DoubleWell::make(PowerLaw{2.0}, 1.0), DomainError);
}

TEST_CASE("double well structure") {
    for (double m : {3.0, 4.0, 6.0}) {
        for (double sigma : {0.5, 1.0, 2.0}) {
            const auto dw = DoubleWell::make(PowerLaw{m}, sigma);
            CHECK(std::abs(h_eval(dw, dw.theta)) < 1e-12);
            CHECK(h_eval(dw, 0.0) == 0.0);
            CHECK(std::abs(h_prime(dw, dw.theta)) < 1e-12);
            for (int i = 0; i <= 300; ++i) {
                const double r = 3.0 * dw.theta * i / 300.0;
                CHECK(h_eval(dw, r) >= -1e-14);
                CHECK(h_hull_eval(dw, r) <= h_eval(dw, r) + 1e-15);
                if (r >= dw.theta) CHECK(std::abs(h_hull_eval(dw, r) - h_eval(dw, r)) < 1e-12);
            }
            const double e = 1e-4 * dw.theta;
            auto h2 = [&](double r) { return (h_eval(dw, r + e) - 2 * h_eval(dw, r) + h_eval(dw, r - e)) / (e * e); };
            CHECK(h2(dw.theta / 10) < 0.0);
            CHECK(h2(2 * dw.theta) > 0.0);
            // Q' = rho h**''
            const double r = 1.7 * dw.theta, d = 1e-6;
            const double dq = (hull_pressure_potential(dw, r + d) - hull_pressure_potential(dw, r - d)) / (2 * d);
            CHECK(dq == doctest::Approx(r * h2(r)).epsilon(1e-4));
            CHECK(hull_pressure_potential(dw, 0.5 * dw.theta) == 0.0);
        }
    }
    const auto hs = DoubleWell::make(HardSphere{}, 1.0);
    CHECK(h_eval(hs, 0.5) == doctest::Approx(0.125));
    CHECK(hs.theta == 1.0);
    CHECK(std::isinf(h_eval(hs, 1.1)));
}

TEST_CASE("cell potential") {
    for (double sigma : {0.5, 1.0, 3.0}) {
        const auto hs = DoubleWell::make(HardSphere{}, sigma);
        for (int i = 0; i <= 40; ++i) {
            const double s = 1.5 / sigma * i / 40.0;
            const double closed = 0.5 * sigma * std::min(s * s, (s - 1.0 / sigma) * (s - 1.0 / sigma));
            CHECK(cell_potential_g(hs, s) == doctest::Approx(closed).epsilon(1e-12).scale(1e-3));
        }
    }
    CHECK(cell_potential_g(DoubleWell::make(HardSphere{}, 1.0), 0.5) == doctest::Approx(0.125));

    for (double m : {3.0, 5.0}) {
        const auto dw = DoubleWell::make(PowerLaw{m}, 1.0);
        CHECK(cell_potential_g(dw, 0.0) == 0.0);
        CHECK(cell_potential_g(dw, dw.theta / dw.sigma) < 1e-10);
        // Grid-scan oracle of the infimum.
        for (double s : {0.1, 0.25, 0.4, 0.7}) {
            double best = 1e300;
            for (int i = 0; i <= 400000; ++i) {
                const double r = 3.0 * std::max(dw.theta, s) * i / 400000.0;
                const double d = r - dw.sigma * s;
                best = std::min(best, h_eval(dw, r) + d * d / (2 * dw.sigma));
            }
            CHECK(cell_potential_g(dw, s) == doctest::Approx(best).epsilon(1e-8).scale(1e-6));
            CHECK(cell_potential_g(dw, s) <= best + 1e-14);
        }
    }
}

TEST_CASE("surface tension constant") {
    CHECK(std::abs(surface_tension_gamma(DoubleWell::make(HardSphere{}, 1.0)) - 0.25) < 1e-6);
    CHECK(std::abs(surface_tension_gamma(DoubleWell::make(HardSphere{}, 4.0)) - 1.0 / 32.0) < 1e-6);
    double prev = 1e300;
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
        const double g = surface_tension_gamma(DoubleWell::make(HardSphere{}, sigma));
        CHECK(g > 0.0);
        CHECK(g < prev);
        CHECK(g == doctest::Approx(0.25 / std::pow(sigma, 1.5)).epsilon(1e-6));
        prev = g;
    }
    // Dense trapezoid oracle on 10^6 points.
    const auto dw = DoubleWell::make(PowerLaw{3}, 1.0);
    const std::size_t n = 1000000;
    const double top = dw.theta / dw.sigma, h = top / n;
    double s = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double v = std::sqrt(2.0 * cell_potential_g(dw, i * h));
        s += (i == 0 || i == n) ? 0.5 * v : v;
    }
    const double oracle = s * h / dw.theta;
    CHECK(std::abs(surface_tension_gamma(dw) - oracle) < 1e-5);
}

TEST_CASE("kernel second moment") {
    InteractionKernel k;
    CHECK(beta_moment(k) == doctest::Approx(2.0).epsilon(1e-8));
    for (double eps : {0.5, 0.1, 0.01}) {
        CHECK(std::abs(beta_moment(k.rescaled(eps)) - eps * eps * 2.0) < 1e-8);
    }
    double prev = 1e300;
    for (double eta : {1.0, 0.1, 0.01, 0.001}) {
        k.eta = eta;
        const double b = beta_moment(k);
        CHECK(b < prev);
        CHECK(b == doctest::Approx(2.0 * eta).epsilon(1e-8));
        prev = b;
    }
    InteractionKernel bounded;
    bounded.domain = BoundedInterval{0.0, 1.0};
    CHECK_THROWS_AS(beta_moment(bounded), ConfigError);
}
