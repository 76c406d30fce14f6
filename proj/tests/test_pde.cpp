#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "aggdiff/errors.hpp"
#include "aggdiff/pde.hpp"
#include "doctest.h"

using namespace aggdiff;

namespace {

double second_moment(const GridField& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f.center(i) * f.center(i) * f.values[i];
    return s * f.dx;
}

GridField bump(double left, double right, std::size_t n, double height, double width,
               Boundary bc = Boundary::NoFlux) {
    return GridField::from_function(
        left, right, n,
        [=](double x) {
            const double y = x / width;
            return std::abs(y) < 1.0 ? height * std::pow(std::cos(0.5 * M_PI * y), 2) : 0.0;
        },
        bc);
}

}  // namespace

TEST_CASE("Barenblatt oracle is a mass-one solution of the porous medium equation") {
    auto gk = [](auto f, double a, double b) {
        return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 8, 1e-13);
    };
    for (double m : {2.0, 3.0}) {
        for (double t : {0.1, 0.7}) {
            // Integrate up to the support edge, located by bisection.
            double lo = 0.0, hi = 10.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (barenblatt_profile(m, 1.0, mid, t) > 0.0 ? lo : hi) = mid;
            }
            CHECK(gk([&](double x) { return barenblatt_profile(m, 1.0, x, t); }, -hi, hi) ==
                  doctest::Approx(1.0).epsilon(1e-9));
        }
        // d_t rho = (rho^m)'' at interior points, by central differences.
        for (double x : {0.0, 0.3, 0.6}) {
            const double t = 0.5, h = 1e-4, k = 1e-5;
            auto u = [&](double y, double s) { return barenblatt_profile(m, 1.0, y, s); };
            const double dt = (u(x, t + k) - u(x, t - k)) / (2 * k);
            const double lap = (std::pow(u(x + h, t), m) - 2 * std::pow(u(x, t), m) + std::pow(u(x - h, t), m)) / (h * h);
            CHECK(dt == doctest::Approx(lap).epsilon(1e-4));
        }
    }
    // m = 2 closed form: t^{-1/3} (C - x^2 t^{-2/3} / 12)_+ with C^{3/2} = 3 / (4 sqrt 12).
    const double C = std::pow(3.0 / (4.0 * std::sqrt(12.0)), 2.0 / 3.0);
    CHECK(barenblatt_profile(2.0, 1.0, 0.2, 0.3) ==
          doctest::Approx(std::pow(0.3, -1.0 / 3) * (C - 0.04 * std::pow(0.3, -2.0 / 3) / 12)).epsilon(1e-12));
}

TEST_CASE("pure diffusion matches Barenblatt") {
    PdeConfig c;
    c.law = PowerLaw{2.0};
    c.interaction_weight = 0.0;
    const double t0 = 0.1;
    const auto init = GridField::from_function(-2.5, 2.5, 2000, [&](double x) { return barenblatt_profile(2, 1, x, t0); },
                                               Boundary::WholeLineTruncated);
    const auto run = pde_run(c, init, 0.5);
    const auto exact =
        GridField::from_function(-2.5, 2.5, 2000, [&](double x) { return barenblatt_profile(2, 1, x, t0 + 0.5); },
                                 Boundary::WholeLineTruncated);
    const double rel = l1_distance(run.states.back(), exact) / exact.mass();
    MESSAGE("Barenblatt relative L1 error " << rel);
    CHECK(rel < 0.02);
    CHECK(run.max_relative_mass_drift < 1e-10);
    CHECK(run.min_value >= 0.0);
}

TEST_CASE("fixed points and conservation") {
    PdeConfig c;
    c.law = PowerLaw{3.0};
    SUBCASE("constant field with zero drift") {
        c.interaction_weight = 0.0;
        const auto f = GridField::indicator(0.0, 1.0, 50, 0.0, 1.0, 0.7);
        const auto g = pde_step(f, c);
        for (double v : g.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
    }
    SUBCASE("constant field with a Neumann potential") {
        c.potential = RobinSolve{RobinBC{0.0, 1.0}};
        const auto f = GridField::indicator(0.0, 1.0, 50, 0.0, 1.0, 0.7);
        const auto g = pde_step(f, c);
        for (double v : g.values) CHECK(std::abs(v - 0.7) < 1e-13);
    }
    SUBCASE("mass over 1000 steps") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto f = GridField::zeros(-1.0, 1.0, 200);
        for (double& v : f.values) v = u(rng);
        c.dt_max = 1e-3;
        const double m0 = f.mass();
        double lo = 1.0;
        for (int s = 0; s < 1000; ++s) {
            f = pde_step(f, c);
            lo = std::min(lo, f.min_value());
        }
        CHECK(std::abs(f.mass() - m0) / m0 < 1e-12);
        CHECK(lo >= 0.0);
    }
}

TEST_CASE("explicit and semi-implicit diffusion agree") {
    PdeConfig c;
    c.law = PowerLaw{3.0};
    c.kernel.scale_eps = 0.5;
    const auto init = bump(-2.0, 2.0, 200, 0.8, 1.0);
    const auto a = pde_run(c, init, 0.05);
    c.diffusion = DiffusionScheme::Explicit;
    const auto b = pde_run(c, init, 0.05);
    CHECK(b.steps > a.steps);
    CHECK(l1_distance(a.states.back(), b.states.back()) < 2e-3);
    c.drift = DriftScheme::Upwind;
    const auto up = pde_run(c, init, 0.05);
    CHECK(l1_distance(a.states.back(), up.states.back()) < 2e-2);
}

TEST_CASE("energy is dissipated and matches the energy evaluators") {
    PdeConfig c;
    c.law = PowerLaw{3.0};
    const auto init = bump(-3.0, 3.0, 300, 1.2, 1.0, Boundary::WholeLineTruncated);
    const auto run = pde_run(c, init, 1.0);
    REQUIRE(run.energies.size() == run.steps + 1);
    for (std::size_t k = 1; k < run.energies.size(); ++k) {
        const double dt = run.series_times[k] - run.series_times[k - 1];
        CHECK(run.energies[k] - run.energies[k - 1] <= 10.0 * dt * dt);
    }
    CHECK(run.energies.back() < run.energies.front());
    CHECK(pde_energy(init, c).total == doctest::Approx(energy_E_f(init, c.law, c.kernel).total).epsilon(1e-12));

    const auto dw = DoubleWell::make(PowerLaw{3.0}, 1.0);
    c.eps = 0.1;
    c.time_scaling = TimeScaling::Stefan;
    const auto j = pde_energy(init, c);
    CHECK(j.id == FunctionalId::J_eps);
    CHECK(j.total == doctest::Approx(energy_J_eps(init, dw, c.kernel, 0.1).total).epsilon(1e-10));
    c.time_scaling = TimeScaling::HeleShaw;
    CHECK(pde_energy(init, c).total == doctest::Approx(energy_G_eps(init, dw, c.kernel, 0.1).total).epsilon(1e-10));
}

TEST_CASE("potential modes") {
    PdeConfig c;
    c.kernel.sigma = 2.0;
    c.eps = 0.1;
    const auto zero = GridField::zeros(0.0, 1.0, 100);
    for (double v : potential_field(zero, c).values) CHECK(v == 0.0);

    c.potential = RobinSolve{RobinBC{0.0, 1.0}};
    const auto flat = GridField::indicator(0.0, 1.0, 100, 0.0, 1.0, 0.6);
    for (double v : potential_field(flat, c).values) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));

    // Extension by zero: phi(x) = (1 - e^{-kx}/2 - e^{-k(1-x)}/2)/sigma on [0, 1].
    c.potential = ObstacleExtendByZero{};
    const auto one = GridField::indicator(0.0, 1.0, 1000, 0.0, 1.0, 1.0);
    const auto phi = potential_field(one, c);
    const double k = c.effective_kernel().decay_rate();
    auto cell_avg = [&](std::size_t i) {
        const double a = one.x_left + i * one.dx, b = a + one.dx;
        const double ea = (std::exp(-k * a) - std::exp(-k * b)) / k, eb = (std::exp(-k * (1 - b)) - std::exp(-k * (1 - a))) / k;
        return (one.dx - 0.5 * ea - 0.5 * eb) / one.dx / 2.0;
    };
    for (std::size_t i = 0; i < one.size(); i += 37) CHECK(phi.values[i] == doctest::Approx(cell_avg(i)).epsilon(1e-10));
    CHECK(phi.values.front() < 0.5 / 2.0 + 0.01);
    CHECK(phi.values.front() < phi.values[500]);
    CHECK(phi.values[500] < 0.5);

    // The wall drift adds eta_w tau with tau = (e^{-kx} + e^{-k(1-x)})/(2 sigma).
    c.potential = EtaBoundaryDrift{0.3};
    const auto both = potential_field(one, c);
    for (std::size_t i = 0; i < one.size(); i += 37)
        CHECK(both.values[i] - phi.values[i] == doctest::Approx(0.3 * (1.0 / 2.0 - cell_avg(i))).epsilon(1e-9));
}

TEST_CASE("Hele-Shaw scaling is the Stefan regime with time stretched by 1/eps") {
    PdeConfig c;
    c.law = PowerLaw{3.0};
    c.eps = 0.1;
    c.time_scaling = TimeScaling::Stefan;
    const auto init = GridField::indicator(-1.0, 1.0, 200, -0.4, 0.4, 0.5, Boundary::WholeLineTruncated);
    const auto stefan = pde_run(c, init, 0.2);
    c.time_scaling = TimeScaling::HeleShaw;
    const auto hs = pde_run(c, init, 0.02);
    CHECK(hs.steps == stefan.steps);
    CHECK(l1_distance(hs.states.back(), stefan.states.back()) < 1e-12);
    CHECK(hs.dt_history.front() == doctest::Approx(0.1 * stefan.dt_history.front()));
}

TEST_CASE("discrete steady states balance pressure and potential") {
    PdeConfig c;
    c.law = PowerLaw{3.0};
    c.kernel.scale_eps = 0.5;
    c.dt_max = 0.02;
    const auto init = bump(-3.0, 3.0, 240, 0.5, 2.0, Boundary::WholeLineTruncated);
    const auto run = pde_run(c, init, 60.0);
    const auto& rho = run.states.back();
    const auto phi = potential_field(rho, c);
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (rho.values[i] < 0.05) continue;
        const double xi = f_prime(c.law, rho.values[i]) - phi.values[i];
        lo = std::min(lo, xi);
        hi = std::max(hi, xi);
    }
    CHECK(hi - lo < 1e-6);
}

TEST_CASE("health bounds along macro runs") {
    PdeConfig c;
    c.law = PowerLaw{3.0};
    c.kernel.scale_eps = 0.5;
    const auto init = bump(-3.0, 3.0, 300, 0.6, 1.2, Boundary::WholeLineTruncated);
    const auto run = pde_run(c, init, 1.0, {0.25, 0.5, 0.75});
    const auto rate = entropy_growth_rate(c, init);
    REQUIRE(rate.has_value());
    for (std::size_t k = 0; k < run.series_times.size(); ++k)
        CHECK(run.entropies[k] <= run.entropies.front() + *rate * run.series_times[k] + 1e-12);

    // Second moment: M2(t) <= (M2(0) + E(0) + C) e^t with C = G(0) M^2 / 2.
    const double E0 = run.energies.front();
    const double C = 0.5 * c.effective_kernel().amplitude() * init.mass() * init.mass();
    for (std::size_t k = 0; k < run.times.size(); ++k)
        CHECK(second_moment(run.states[k]) <= (second_moment(init) + E0 + C) * std::exp(run.times[k]));

    c.potential = RobinSolve{};
    CHECK(!entropy_growth_rate(c, init).has_value());
}

TEST_CASE("stefan_solve") {
    const auto dw = DoubleWell::make(PowerLaw{3.0}, 1.0);
    SUBCASE("characteristic function at theta is stationary") {
        const auto f = GridField::indicator(-2.0, 2.0, 400, -1.0, 1.0, dw.theta);
        const auto r = stefan_solve(f, dw, 1.0);
        CHECK(l1_distance(r.states.back(), f) < 1e-8);
    }
    SUBCASE("a dense block spreads") {
        const auto f = GridField::indicator(-2.0, 2.0, 400, -0.5, 0.5, 2.0 * dw.theta);
        const auto r = stefan_solve(f, dw, 0.5, {0.1, 0.2, 0.3, 0.4});
        for (std::size_t k = 1; k < r.times.size(); ++k) {
            CHECK(r.support_right[k] >= r.support_right[k - 1]);
            CHECK(r.support_left[k] <= r.support_left[k - 1]);
            CHECK(r.states[k].mass() == doctest::Approx(f.mass()).epsilon(1e-12));
        }
        CHECK(r.support_right.back() > 0.6);
        // Grid refinement oracle: coarse-to-mid distance exceeds mid-to-fine.
        auto at = [&](std::size_t n) {
            return stefan_solve(GridField::indicator(-2.0, 2.0, n, -0.5, 0.5, 2.0 * dw.theta), dw, 0.5).states.back();
        };
        const auto c = at(200), m = at(400), fn = at(800);
        const double d1 = l1_distance_resampled(fn, c), d2 = l1_distance_resampled(fn, m);
        CHECK(d2 < d1);
        CHECK(d2 < 0.02);
    }
    SUBCASE("ill-prepared data is rejected") {
        const auto f = GridField::indicator(-2.0, 2.0, 400, -0.5, 0.5, 0.5 * dw.theta);
        CHECK_THROWS_AS(stefan_solve(f, dw, 0.1), InputError);
    }
}

TEST_CASE("Stefan regime phase-separates to the well density") {
    const auto dw = DoubleWell::make(PowerLaw{3.0}, 1.0);
    PdeConfig c;
    c.law = PowerLaw{3.0};
    c.eps = 0.05;
    c.time_scaling = TimeScaling::Stefan;
    c.dt_max = 2e-3;
    const auto init = GridField::indicator(-2.0, 2.0, 800, -0.5, 0.5, 1.0, Boundary::WholeLineTruncated);
    const auto run = pde_run(c, init, 8.0);
    const auto d = interface_diagnostics(run.states.back(), dw);
    REQUIRE(d.plateau_value.has_value());
    MESSAGE("plateau " << *d.plateau_value);
    CHECK(std::abs(*d.plateau_value / dw.theta - 1.0) < 0.02);
    CHECK(d.perimeter_count == 2);
}

TEST_CASE("singular pressure keeps the density below one") {
    PdeConfig c;
    c.law = SingularReciprocal{0.05};
    c.kernel.sigma = 0.2;
    const auto init = GridField::indicator(-3.0, 3.0, 300, -1.5, 1.5, 0.6);
    const auto run = pde_run(c, init, 2.0);
    CHECK(run.states.back().max_value() < 1.0);
    CHECK(run.states.back().max_value() > 0.6);
    CHECK(run.max_relative_mass_drift < 1e-12);
}

TEST_CASE("pde errors") {
    PdeConfig c;
    const auto f = GridField::indicator(-1.0, 1.0, 100, -0.5, 0.5, 1.0, Boundary::WholeLineTruncated);
    c.law = HardSphere{};
    CHECK_THROWS_AS(pde_step(f, c), ConfigError);
    c.law = PowerLaw{3.0};
    c.dt_safety = 0.0;
    CHECK_THROWS_AS(pde_step(f, c), ConfigError);
    c.dt_safety = 0.25;
    // Mass reaches the truncated ends.
    const auto wide = GridField::indicator(-1.0, 1.0, 100, -1.0, 1.0, 1.0, Boundary::WholeLineTruncated);
    CHECK_THROWS_AS(pde_run(c, wide, 0.1), DomainError);
    CHECK_THROWS_AS(pde_run(c, f, -1.0), ConfigError);
    CHECK_THROWS_AS(incompressible_continuation(c, GridField::indicator(0, 1, 10, 0, 1, 2.0), 0.1, LargeM{{10, 20}}),
                    InputError);
}
