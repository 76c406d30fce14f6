#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "aggdiff/errors.hpp"
#include "aggdiff/metrics.hpp"
#include "doctest.h"

using namespace aggdiff;

namespace {

ParticleEnsemble ens(std::vector<double> x) {
    ParticleEnsemble e;
    e.positions = std::move(x);
    return e;
}

double brute_w2(std::vector<double> a, std::vector<double> b) {
    std::sort(b.begin(), b.end());
    double best = 1e300;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        best = std::min(best, s / a.size());
    } while (std::next_permutation(b.begin(), b.end()));
    return std::sqrt(best);
}

}  // namespace

TEST_CASE("wasserstein distance") {
    CHECK(wasserstein1d(ens({0.0}), ens({1.0})) == doctest::Approx(1.0));
    const auto u01 = GridField::indicator(-1.0, 3.0, 400, 0.0, 1.0, 1.0);
    const auto u12 = GridField::indicator(-1.0, 3.0, 400, 1.0, 2.0, 1.0);
    CHECK(wasserstein1d(u01, u12) == doctest::Approx(1.0).epsilon(1e-12));
    // Uniform [0,1] against its midpoint: sqrt(1/12).
    CHECK(wasserstein1d(u01, ens({0.5})) == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-12));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a(3), b(3), c(3);
        for (int i = 0; i < 3; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
            c[i] = u(rng);
        }
        const double ab = wasserstein1d(ens(a), ens(b));
        CHECK(ab == doctest::Approx(brute_w2(a, b)).epsilon(1e-12));
        CHECK(ab == wasserstein1d(ens(b), ens(a)));
        CHECK(ab <= wasserstein1d(ens(a), ens(c)) + wasserstein1d(ens(c), ens(b)) + 1e-10);
        CHECK(wasserstein1d(ens(a), ens(a)) == 0.0);
    }
    for (int t = 0; t < 20; ++t) {
        GridField f = GridField::zeros(-1.0, 1.0, 50), g = f, h = f;
        for (std::size_t i = 0; i < 50; ++i) {
            f.values[i] = u(rng) + 2.0;
            g.values[i] = u(rng) + 2.0;
            h.values[i] = u(rng) + 2.0;
        }
        const double fg = wasserstein1d(f, g);
        CHECK(fg == doctest::Approx(wasserstein1d(g, f)).epsilon(1e-14));
        CHECK(fg <= wasserstein1d(f, h) + wasserstein1d(h, g) + 1e-10);
        CHECK(wasserstein1d(f, f) < 1e-12);
    }
    CHECK_THROWS_AS(wasserstein1d(GridField::zeros(0, 1, 10), u01), InputError);
}

TEST_CASE("E_f evaluation") {
    InteractionKernel k;
    k.scale_eps = 0.2;
    const auto f = GridField::indicator(-1.0, 1.0, 800, -0.5, 0.5, 0.6);
    const auto r = energy_E_f(f, PowerLaw{3}, k);
    CHECK(r.terms.at("entropy") == doctest::Approx(0.6 * 0.6 * 0.6 / 2.0).epsilon(1e-12));
    // -1/2 c^2 int_{-1/2}^{1/2} (G * chi) = -1/2 c^2 (1/sigma)(1 - (1 - e^{-k})/k) with k = 1/0.2.
    const double kk = 5.0;
    const double expected = -0.5 * 0.36 * (1.0 - (1.0 - std::exp(-kk)) / kk);
    CHECK(r.terms.at("interaction") == doctest::Approx(expected).epsilon(1e-10));
    CHECK(r.total == doctest::Approx(r.terms.at("entropy") + r.terms.at("interaction")).epsilon(1e-12));
}

TEST_CASE("J_eps routes and limits") {
    InteractionKernel k;
    const auto dw3 = DoubleWell::make(PowerLaw{3}, 1.0);
    SUBCASE("plateau has zero double-well term") {
        const auto f = GridField::indicator(-2.0, 2.0, 4000, -1.0, 1.0, dw3.theta);
        const auto r = energy_J_eps(f, dw3, k, 0.05);
        CHECK(std::abs(r.terms.at("double_well")) < 1e-14);
    }
    SUBCASE("flat density has vanishing interaction per unit mass") {
        double prev = 1e300;
        for (double L : {1.0, 4.0, 16.0}) {
            const auto f = GridField::indicator(-L, L, static_cast<std::size_t>(400 * L), -L, L, dw3.theta);
            const double per_mass = energy_J_eps(f, dw3, k, 0.05).terms.at("interaction") / f.mass();
            CHECK(per_mass < prev);
            prev = per_mass;
        }
        CHECK(prev < 2e-3);
    }
    SUBCASE("two routes agree on random fields") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 50 + static_cast<std::size_t>(u(rng) * 300);
            auto f = GridField::zeros(0.0, 1.0 + u(rng), n);
            for (double& v : f.values) v = u(rng) < 0.3 ? 0.0 : 1.2 * u(rng);
            const double eps = 0.01 + 0.2 * u(rng);
            const auto r = energy_J_eps(f, dw3, k, eps);
            REQUIRE(r.cross_check.has_value());
            CHECK(r.relative_route_gap() < 1e-5);
        }
    }
    SUBCASE("hard-sphere sentinel") {
        const auto hs = DoubleWell::make(HardSphere{}, 1.0);
        const auto f = GridField::indicator(0.0, 1.0, 10, 0.0, 0.5, 1.5);
        CHECK(std::isinf(energy_J_eps(f, hs, k, 0.1).total));
    }
}

TEST_CASE("G_eps sharp-interface values") {
    InteractionKernel k;
    SUBCASE("hard sphere converges to two interfaces times gamma") {
        const auto hs = DoubleWell::make(HardSphere{}, 1.0);
        const auto f = GridField::indicator(-0.5, 1.5, 200000, 0.0, 1.0, 1.0);
        std::vector<double> vals;
        for (double eps : {0.04, 0.02, 0.01}) vals.push_back(energy_G_eps(f, hs, k, eps).total);
        CHECK(std::abs(vals.back() - 0.5) < 0.025);
        CHECK(std::abs(vals[1] - 0.5) <= std::abs(vals[0] - 0.5) + 1e-9);
        CHECK(std::abs(vals[2] - 0.5) <= std::abs(vals[1] - 0.5) + 1e-9);
    }
    SUBCASE("power law plateau is bounded below by the sharp-interface cost") {
        const auto dw = DoubleWell::make(PowerLaw{3}, 1.0);
        const double gamma = surface_tension_gamma(dw);
        const auto f = GridField::indicator(-0.5, 1.5, 200000, 0.0, 1.0, dw.theta);
        const auto r = energy_G_eps(f, dw, k, 0.01);
        CHECK(r.total >= 0.9 * 2.0 * gamma * dw.theta);
        CHECK(!r.divergent);
    }
    SUBCASE("smooth profile without plateau diverges") {
        const auto dw = DoubleWell::make(PowerLaw{3}, 1.0);
        const auto f = GridField::from_function(-2.0, 2.0, 2000, [](double x) { return 0.3 * std::exp(-x * x); });
        const double a = energy_G_eps(f, dw, k, 0.02).total, b = energy_G_eps(f, dw, k, 0.01).total;
        CHECK(energy_G_eps(f, dw, k, 0.01).divergent);
        CHECK(b / a == doctest::Approx(2.0).epsilon(0.05));
    }
}

TEST_CASE("wall-weighted energy") {
    InteractionKernel k;
    const auto hs = DoubleWell::make(HardSphere{}, 1.0);
    const auto f = GridField::indicator(0.0, 1.0, 100000, 0.0, 0.3, 1.0);
    const double expected[3] = {0.5, 0.375, 0.25};
    const double etas[3] = {0.0, 0.25, 0.5};
    for (int i = 0; i < 3; ++i) {
        const auto r = energy_G_eta_eps(f, hs, k, 0.01, etas[i]);
        CHECK(std::abs(r.total / expected[i] - 1.0) < 0.05);
        CHECK(r.total == doctest::Approx(r.terms.at("bulk") + r.terms.at("boundary")).epsilon(1e-12));
    }
    CHECK(energy_G_eta_eps(GridField::zeros(0.0, 1.0, 100), hs, k, 0.01, 0.3).total == 0.0);
    CHECK(energy_G_eta_eps(f, hs, k, 0.01, 0.8).details.count("eta_outside_proof_range") == 1);
    CHECK_THROWS_AS(energy_G_eta_eps(f, DoubleWell::make(PowerLaw{3}, 1.0), k, 0.01, 0.0), ConfigError);
}

TEST_CASE("contact angles") {
    CHECK(contact_angle(RobinBC{0.0, 1.0}, 1.0) == std::numbers::pi / 2);
    CHECK(contact_angle(RobinBC{1.0, 0.0}, 1.0) == std::numbers::pi);
    CHECK(contact_angle(0.5) == std::numbers::pi / 2);
    for (double eta : {0.0, 0.1, 0.25, 0.4, 0.5, 0.9, 1.0}) CHECK(std::cos(contact_angle(eta)) == doctest::Approx(2 * eta - 1));
    double prev = 0.0;
    for (double a : {0.0, 0.1, 0.3, 0.6, 0.9}) {
        const double ang = contact_angle(RobinBC{a, 1.0}, 1.0);
        CHECK(ang >= prev);
        prev = ang;
    }
    prev = 10.0;
    for (double eta : {0.0, 0.2, 0.4, 0.6}) {
        CHECK(contact_angle(eta) < prev);
        prev = contact_angle(eta);
    }
}

TEST_CASE("interface diagnostics") {
    const auto dw = DoubleWell::make(PowerLaw{3}, 1.0);
    const auto f = GridField::indicator(-2.0, 2.0, 400, -1.0, 1.0, dw.theta);
    const auto d = interface_diagnostics(f, dw);
    REQUIRE(d.positions.size() == 2);
    CHECK(d.positions[0] == doctest::Approx(-1.0).epsilon(0.01));
    CHECK(d.positions[1] == doctest::Approx(1.0).epsilon(0.01));
    REQUIRE(d.width.has_value());
    CHECK(*d.width <= f.dx);
    REQUIRE(d.plateau_value.has_value());
    CHECK(*d.plateau_value == doctest::Approx(dw.theta));
    CHECK(d.perimeter_count == 2);

    const auto bump = GridField::from_function(-2.0, 2.0, 400, [&](double x) { return 0.4 * dw.theta * std::exp(-x * x); });
    CHECK(!interface_diagnostics(bump, dw).plateau_value.has_value());
}

TEST_CASE("dissipation check") {
    CHECK(dissipation_check({3.0, 2.0, 1.0, 0.5}, 0.0).pass);
    const auto r = dissipation_check({3.0, 2.0, 2.0 + 2e-6, 1.0}, 1e-6);
    CHECK(!r.pass);
    CHECK(r.worst_index == 2);
    CHECK(r.worst_increase == doctest::Approx(2e-6));
    CHECK_THROWS_AS(dissipation_check({1.0}, 0.1), InputError);
}

TEST_CASE("entropy") {
    const auto f = GridField::indicator(0.0, 2.0, 100, 0.0, 2.0, 0.5);
    CHECK(entropy(f) == doctest::Approx(0.5 * std::log(0.5) * 2.0));
}
