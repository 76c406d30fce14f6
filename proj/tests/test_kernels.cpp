#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "aggdiff/errors.hpp"
#include "aggdiff/kernels.hpp"
#include "doctest.h"

using namespace aggdiff;
namespace bq = boost::math::quadrature;

namespace {

double gk(const std::function<double(double)>& f, double a, double b) {
    return bq::gauss_kronrod<double, 61>::integrate(f, a, b, 6, 1e-12);
}

InteractionKernel free_kernel(double sigma = 1.0, double eta = 1.0, double eps = 1.0) {
    InteractionKernel k;
    k.sigma = sigma;
    k.eta = eta;
    k.scale_eps = eps;
    return k;
}

}  // namespace

TEST_CASE("green function closed form and jump condition") {
    const auto k = free_kernel();
    CHECK(green_eval(k, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(green_eval(k, 50.0) < 1e-12);
    CHECK(green_eval(k, 0.7) == green_eval(k, -0.7));
    CHECK_THROWS_AS(green_eval(k, NAN), InputError);

    // sigma G - eta G'' = 0 away from 0, and eta * (G'(0-) - G'(0+)) = 1.
    for (const auto& kk : {free_kernel(1, 1), free_kernel(2.0, 0.5), free_kernel(0.3, 3.0)}) {
        const double x = 0.37, h = 1e-4;
        const double g2 = (green_eval(kk, x + h) - 2 * green_eval(kk, x) + green_eval(kk, x - h)) / (h * h);
        CHECK(std::abs(kk.sigma * green_eval(kk, x) - kk.eta * g2) < 1e-6);
        const double jump = kk.eta * (green_derivative(kk, -1e-12) - green_derivative(kk, 1e-12));
        CHECK(jump == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("kernel mass identity and scaling covariance") {
    for (double eps : {1.0, 0.1, 0.01}) {
        const auto k = free_kernel(1.0, 1.0, eps);
        const auto t = tabulate_green(k, eps / 2000.0);
        // The kink at 0 sits on a node shared by two Simpson halves.
        const std::size_t mid = t.x.size() / 2;
        std::vector<double> lhs(t.value.begin(), t.value.begin() + mid + 1);
        std::vector<double> rhs(t.value.begin() + mid, t.value.end());
        const double h = t.x[1] - t.x[0];
        double mass;
        if (lhs.size() % 2)
            mass = simpson(lhs, h) + simpson(rhs, h);
        else
            mass = gk([&](double x) { return green_eval(k, x); }, t.x.front(), 0.0) * 2.0;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    }
    const auto k1 = free_kernel(1.3, 0.7, 1.0);
    for (double eps : {0.5, 0.05, 0.003}) {
        const auto ke = k1.rescaled(eps);
        for (double x : {0.0, 0.001, -0.02, 0.4}) {
            const double a = green_eval(ke, x), b = green_eval(k1, x / eps) / eps;
            CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
        }
    }
    CHECK(green_tail_mass(free_kernel(2.0, 1.0), 0.0) == doctest::Approx(0.25));
}

TEST_CASE("mollifier shape invariants") {
    for (auto shape : {MollifierShape::SmoothBump, MollifierShape::IndicatorBall}) {
        const Mollifier m(0.2, shape);
        const double mass = gk([&](double x) { return m.value(x); }, -0.2, 0.2);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.value(0.2) == 0.0);
        CHECK(m.value(-0.25) == 0.0);
        double prev = m.value(0.0);
        for (int i = 1; i <= 100; ++i) {
            const double v = m.value(0.002 * i);
            CHECK(v <= prev + 1e-15);
            CHECK(v == m.value(-0.002 * i));
            prev = v;
        }
        for (double x : {-0.15, -0.02, 0.0, 0.11, 0.19}) {
            CHECK(m.primitive(x) == doctest::Approx(gk([&](double y) { return m.value(y); }, -0.2, x)).epsilon(1e-12));
            CHECK(m.second_primitive(x) ==
                  doctest::Approx(gk([&](double y) { return m.primitive(y); }, -0.2, x)).epsilon(1e-12));
        }
        CHECK(m.second_primitive(0.5) == doctest::Approx(0.5));
    }
    const Mollifier m(0.1);
    for (double x : {-0.07, 0.03, 0.09}) {
        const double h = 1e-6;
        CHECK(m.derivative(x) == doctest::Approx((m.value(x + h) - m.value(x - h)) / (2 * h)).epsilon(1e-6));
    }
    CHECK_THROWS_AS(Mollifier(-1.0), ConfigError);
}

TEST_CASE("mollify grids and particles") {
    const Mollifier m(0.1);
    SUBCASE("single particle reproduces the bump") {
        ParticleEnsemble e;
        e.positions = {0.0};
        const auto f = mollify(e, m, -0.3, 0.001, 600);
        for (std::size_t i = 0; i < f.size(); i += 37) {
            const double a = f.x_left + i * f.dx;
            const double avg = gk([&](double x) { return m.value(x); }, a, a + f.dx) / f.dx;
            CHECK(f.values[i] == doctest::Approx(avg).epsilon(1e-10));
        }
        CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant field stays constant under reflection") {
        auto f = GridField::indicator(0.0, 1.0, 200, 0.0, 1.0, 0.7);
        const auto g = mollify(f, m);
        for (double v : g.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("mass preserved") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 2.0);
        auto f = GridField::zeros(-1.0, 1.0, 137);
        for (double& v : f.values) v = u(rng);
        CHECK(mollify(f, m).mass() == doctest::Approx(f.mass()).epsilon(1e-12));
        f.bc = Boundary::WholeLineTruncated;
        f.values.front() = f.values.back() = 0.0;
        for (int i = 0; i < 10; ++i) f.values[i] = f.values[136 - i] = 0.0;
        CHECK(mollify(f, m).mass() == doctest::Approx(f.mass()).epsilon(1e-12));

        ParticleEnsemble e;
        for (int i = 0; i < 40; ++i) e.positions.push_back(u(rng) - 1.0);
        CHECK(std::abs(mollify(e, m).mass() - 1.0) < 1e-10);
    }
    SUBCASE("errors") {
        ParticleEnsemble e;
        CHECK_THROWS_AS(mollify(e, m), InputError);
        e.positions = {0.0};
        CHECK_THROWS_AS(mollify(e, m, -1.0, 0.03, 60), ConfigError);
    }
}

TEST_CASE("regularized kernel against nested quadrature") {
    const auto k = free_kernel();
    const Mollifier m(0.1);
    const auto rk = regularized_kernel(k, m);

    auto oracle = [&](double x) {
        // int int K(y) G(x - y - z) K(z) dz dy, inner split at the kink z = x - y.
        auto inner = [&](double y) {
            auto f = [&](double z) { return m.value(z) * green_eval(k, x - y - z); };
            const double c = std::clamp(x - y, -0.1, 0.1);
            return gk(f, -0.1, c) + gk(f, c, 0.1);
        };
        return gk([&](double y) { return m.value(y) * inner(y); }, -0.1, 0.1);
    };
    for (double x : {0.0, 0.013, 0.07, 0.15, 0.199, 0.25, 0.6}) {
        CHECK(std::abs(rk.value(x) - oracle(x)) < 1e-8);
        CHECK(rk.value(-x) == rk.value(x));
    }
    CHECK(rk.derivative(0.0) == 0.0);
    for (double x : {0.004, 0.05, 0.13, 0.3}) {
        const double h = 1e-5;
        CHECK(std::abs(rk.derivative(x) - (oracle(x + h) - oracle(x - h)) / (2 * h)) < 1e-7);
        CHECK(rk.derivative(-x) == -rk.derivative(x));
    }
    // Total mass 1/sigma: table part by dense Gauss-Kronrod plus exact far tail.
    const double inner = 2.0 * gk([&](double x) { return rk.value(x); }, 0.0, 0.2);
    const double tail = 2.0 * rk.far_factor() * green_tail_mass(k, 0.2);
    CHECK(inner + tail == doctest::Approx(1.0).epsilon(1e-8));

    CHECK_THROWS_AS(regularized_kernel(k, m, 0.1 / 7.0), ConfigError);
    InteractionKernel bounded = k;
    bounded.domain = BoundedInterval{0.0, 1.0};
    CHECK_THROWS_AS(regularized_kernel(bounded, m), ConfigError);
}

TEST_CASE("fast exponential sums match direct sums") {
    const auto k = free_kernel(1.0, 0.5, 1.0);
    const Mollifier m(0.05);
    const auto rk = regularized_kernel(k, m);
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g(0.0, 0.4);
    std::vector<double> x(300);
    for (double& v : x) v = g(rng);
    x[5] = x[6];  // coincident particles
    const double w = 1.0 / 300;
    const auto fast = rk.gradient_sum(x, w), slow = rk.gradient_sum_direct(x, w);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(fast[i] - slow[i]) < 1e-12);
    CHECK(rk.pair_sum(x, w) == doctest::Approx(rk.pair_sum_direct(x, w)).epsilon(1e-12));
}

TEST_CASE("cell convolution weights against direct quadrature") {
    const auto k = free_kernel(1.0, 1.0, 0.2);
    const double dx = 0.05;
    const ExpConvolution conv(k, dx);
    auto cell_pair = [&](int i, int j) {
        auto inner = [&](double x) {
            auto f = [&](double y) { return green_eval(k, x - y); };
            const double a = j * dx, b = (j + 1) * dx;
            if (x > a && x < b) return gk(f, a, x) + gk(f, x, b);
            return gk(f, a, b);
        };
        return gk(inner, i * dx, (i + 1) * dx);
    };
    CHECK(conv.diagonal() == doctest::Approx(cell_pair(0, 0)).epsilon(1e-10));
    CHECK(conv.off_diagonal(1) == doctest::Approx(cell_pair(0, 1)).epsilon(1e-10));
    CHECK(conv.off_diagonal(4) == doctest::Approx(cell_pair(0, 4)).epsilon(1e-10));

    std::vector<double> rho = {0.3, 1.0, 0.0, 2.0, 0.5, 0.5, 0.1};
    const auto a = conv.apply(rho);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < rho.size(); ++j) s += conv.off_diagonal(i > j ? i - j : j - i) * rho[j];
        CHECK(a[i] == doctest::Approx(s).epsilon(1e-12));
    }
    const auto t = conv.outside_mass(7);
    const double right = 7 * dx;
    for (int i : {0, 3, 6}) {
        const double direct = gk([&](double x) { return green_tail_mass(k, right - x) + green_tail_mass(k, x); },
                                 i * dx, (i + 1) * dx);
        CHECK(t[i] == doctest::Approx(direct).epsilon(1e-10));
    }
    // Profile reproduces G*rho pointwise.
    const auto p = conv.profile(rho);
    for (int i : {0, 2, 5}) {
        for (double s : {0.0, 0.013, 0.05}) {
            const double x = i * dx + s;
            double direct = 0.0;
            for (std::size_t j = 0; j < rho.size(); ++j) {
                auto f = [&](double y) { return green_eval(k, x - y); };
                const double a0 = j * dx, b0 = (j + 1) * dx;
                direct += rho[j] * ((x > a0 && x < b0) ? gk(f, a0, x) + gk(f, x, b0) : gk(f, a0, b0));
            }
            const double val = rho[i] / k.sigma + p.alpha[i] * std::exp(-conv.rate() * s) +
                               p.beta[i] * std::exp(-conv.rate() * (dx - s));
            CHECK(val == doctest::Approx(direct).epsilon(1e-10));
        }
    }
}

TEST_CASE("Robin potential solves") {
    const auto k = free_kernel();
    const double eps = 0.05;
    SUBCASE("constant density under Neumann") {
        const auto rho = GridField::indicator(0.0, 1.0, 400, 0.0, 1.0, 0.8);
        const auto phi = solve_potential(rho, k, eps, RobinBC{0.0, 1.0});
        for (double v : phi.values) CHECK(std::abs(v - 0.8) < 1e-10);
    }
    SUBCASE("zero density") {
        const auto rho = GridField::zeros(0.0, 1.0, 100);
        const auto phi = solve_potential(rho, k, eps, RobinBC{1.0, 1.0});
        for (double v : phi.values) CHECK(v == 0.0);
    }
    SUBCASE("mass identity, maximum principle and residual") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto rho = GridField::zeros(-1.0, 2.0, 500);
        for (double& v : rho.values) v = u(rng);
        const auto phi = solve_potential(rho, k, eps, RobinBC{0.0, 1.0});
        CHECK(k.sigma * phi.mass() == doctest::Approx(rho.mass()).epsilon(1e-8));
        for (const RobinBC bc : {RobinBC{1.0, 0.0}, RobinBC{1.0, 2.0}, RobinBC{0.0, 1.0}}) {
            const auto p = solve_potential(rho, k, eps, bc);
            CHECK(p.min_value() >= 0.0);
            CHECK(potential_residual(rho, p, k, eps, bc) <= 1e-10 * rho.max_value());
        }
    }
    CHECK_THROWS_AS(solve_potential(GridField::zeros(0, 1, 10), k, eps, RobinBC{0.0, 0.0}), ConfigError);
}

TEST_CASE("boundary layer profile") {
    const auto k = free_kernel();
    SUBCASE("Dirichlet layer is the exponential") {
        const double eps = 0.01;
        const auto tau = tau_field(k, eps, RobinBC{1.0, 0.0}, 0.0, 1.0, 20000);
        for (std::size_t i = 0; i < tau.size(); ++i) {
            const double t = tau.center(i);
            if (t > 5 * eps) break;
            CHECK(std::abs(tau.values[i] / std::exp(-t / eps) - 1.0) < 0.01);
        }
        for (double v : tau.values) CHECK((v >= 0.0 && v <= 1.0 / k.sigma));
    }
    SUBCASE("Neumann gives zero") {
        const auto tau = tau_field(k, 0.01, RobinBC{0.0, 1.0}, 0.0, 1.0, 1000);
        for (double v : tau.values) CHECK(std::abs(v) < 1e-10);
    }
    SUBCASE("integrated layer weight") {
        const double eps = 1e-3;
        for (const RobinBC bc : {RobinBC{1.0, 0.0}, RobinBC{1.0, 1.0}}) {
            const auto tau = tau_field(k, eps, bc, 0.0, 1.0, 100000);
            double half = 0.0;
            for (std::size_t i = 0; i < tau.size() / 2; ++i) half += tau.values[i] * tau.dx;
            const double expected = bc.a / (bc.a + bc.b * std::sqrt(k.sigma)) / std::pow(k.sigma, 1.5);
            CHECK(std::abs(half / eps / expected - 1.0) < 0.02);
        }
    }
}
