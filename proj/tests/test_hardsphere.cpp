#include <algorithm>
#include <functional>
#include <cmath>
#include <random>

#include "aggdiff/errors.hpp"
#include "aggdiff/hardsphere.hpp"
#include "aggdiff/oracles.hpp"
#include "doctest.h"

using namespace aggdiff;

namespace {

ParticleEnsemble line(std::vector<double> x, double delta) {
    ParticleEnsemble e;
    e.positions = std::move(x);
    e.delta = delta;
    return e;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double rel_rate(const std::vector<double>& u, int dim, const Contact& c) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) s += (u[c.j * dim + k] - u[c.i * dim + k]) * c.e[k];
    return s;
}

}  // namespace

TEST_CASE("contact detection") {
    const double d = 0.1;
    CHECK(detect_contacts(line({0.0, 0.3}, d), 1e-9).pairs.empty());
    const auto g = detect_contacts(line({0.0, 0.2}, d), 1e-9);
    REQUIRE(g.pairs.size() == 1);
    CHECK(g.pairs[0].e[0] == 1.0);
    CHECK(detect_contacts(line({0.0, 0.2, 0.4, 0.6, 0.8}, d), 1e-9).pairs.size() == 4);
    CHECK_THROWS_AS(detect_contacts(line({0.0, 0.19}, d), 1e-9), InfeasibleError);
    CHECK_THROWS_AS(detect_contacts(line({0.0, 0.3}, d), -1.0), ConfigError);
}

TEST_CASE("projection of simple pairs") {
    const auto e = line({0.0, 0.2}, 0.1);
    const auto g = detect_contacts(e, 1e-9);
    SUBCASE("head-on pair stops") {
        const auto r = project_velocity(e, {1.0, -1.0}, g);
        CHECK(std::abs(r.velocities[0]) < 1e-10);
        CHECK(std::abs(r.velocities[1]) < 1e-10);
        CHECK(r.pressures[0] == doctest::Approx(1.0));
    }
    SUBCASE("separating pair is untouched") {
        const auto r = project_velocity(e, {-1.0, 2.0}, g);
        CHECK(r.velocities[0] == -1.0);
        CHECK(r.velocities[1] == 2.0);
        CHECK(r.pressures[0] == 0.0);
    }
    SUBCASE("common drift passes through") {
        const auto r = project_velocity(e, {0.5, 0.5}, g);
        CHECK(r.velocities[0] == doctest::Approx(0.5));
        CHECK(r.velocities[1] == doctest::Approx(0.5));
    }
}

TEST_CASE("three particles against active-set enumeration") {
    const auto e = line({0.0, 0.2, 0.4}, 0.1);
    const auto g = detect_contacts(e, 1e-9);
    const std::vector<std::vector<double>> cases = {{1, 0, -1}, {1, -1, 0}, {0, 1, -1}, {2, 0.5, 0}, {-1, 0, 1}};
    for (const auto& v : cases) {
        const auto r = project_velocity(e, v, g);
        CHECK(max_diff(r.velocities, enumerate_projection(e, v, g)) < 1e-8);
        CHECK(lcp_natural_residual(contact_lcp(e, v, g), r.pressures) < 1e-9);
    }
    // Everything pushing inward: all three end with the mean velocity.
    const auto r = project_velocity(e, {1, 0, -1}, g);
    for (double u : r.velocities) CHECK(std::abs(u) < 1e-9);
}

TEST_CASE("random clusters match enumeration and satisfy projection optimality") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::size_t checked2d = 0;
    for (int t = 0; t < 200; ++t) {
        const auto e = random_contact_cluster(rng, 0.05);
        const auto g = detect_contacts(e, 1e-9);
        if (g.pairs.empty() || g.pairs.size() > 12) continue;
        if (e.dim == 2) ++checked2d;
        std::vector<double> v(e.positions.size());
        for (double& x : v) x = nd(rng);
        const auto r = project_velocity(e, v, g);
        const auto oracle = enumerate_projection(e, v, g);
        CHECK(max_diff(r.velocities, oracle) < 1e-7);

        // Cone membership, complementarity and orthogonality <v - u, u> = 0.
        double orth = 0.0, dist_u = 0.0;
        for (std::size_t c = 0; c < g.pairs.size(); ++c) {
            const double w = rel_rate(r.velocities, e.dim, g.pairs[c]);
            CHECK(w >= -1e-9);
            CHECK(std::abs(r.pressures[c] * w) < 1e-8);
            CHECK(r.pressures[c] >= 0.0);
        }
        for (std::size_t k = 0; k < v.size(); ++k) {
            orth += (v[k] - r.velocities[k]) * r.velocities[k];
            dist_u += (v[k] - r.velocities[k]) * (v[k] - r.velocities[k]);
        }
        CHECK(std::abs(orth) < 1e-8);

        // Monte-Carlo probe: no feasible point is closer to v.
        for (int s = 0; s < 200; ++s) {
            std::vector<double> q = r.velocities;
            for (double& x : q) x += 0.3 * nd(rng);
            bool feasible = true;
            for (const auto& c : g.pairs) feasible = feasible && rel_rate(q, e.dim, c) >= 0.0;
            if (!feasible) continue;
            double dq = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) dq += (v[k] - q[k]) * (v[k] - q[k]);
            CHECK(dq >= dist_u - 1e-9);
        }
    }
    CHECK(checked2d > 20);
}

TEST_CASE("desired velocities") {
    const auto e = line({-0.5, 0.0, 0.7}, 0.01);
    const auto v = desired_velocity(e, FixedPotential{[](double x) { return x; }, {}});
    for (double x : v) CHECK(x == doctest::Approx(1.0).epsilon(1e-8));
    const auto vg = desired_velocity(e, FixedPotential{{}, [](double x) { return 2.0 * x; }});
    CHECK(vg[2] == doctest::Approx(1.4));
    CHECK_THROWS_AS(desired_velocity(e, FixedPotential{}), ConfigError);

    SelfConsistent sc;
    sc.kernel.scale_eps = 0.5;
    sc.mollifier = Mollifier(0.01);
    const auto pair = desired_velocity(line({-0.3, 0.3}, 0.01), sc);
    // Attraction: each moves toward the other, antisymmetrically.
    CHECK(pair[0] > 0.0);
    CHECK(pair[1] < 0.0);
    CHECK(pair[0] == doctest::Approx(-pair[1]).epsilon(1e-12));

    ParticleEnsemble two;
    two.dim = 2;
    two.positions = {0, 0, 1, 1};
    CHECK_THROWS_AS(desired_velocity(two, sc), InputError);
}

TEST_CASE("catch-up steps") {
    HsConfig cfg;
    cfg.dt = 0.01;
    SUBCASE("free particle translates") {
        auto e = line({0.3}, 0.05);
        const FixedPotential phi{{}, [](double) { return 1.0; }};
        const auto tr = hs_simulate(e, cfg, phi, 0.5);
        CHECK(tr.states.back().positions[0] == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("compressed touching pair stays put") {
        const auto e = line({-0.05, 0.05}, 0.05);
        const FixedPotential phi{{}, [](double x) { return -x; }};
        const auto next = hs_step(e, cfg, phi);
        CHECK(std::abs(next.positions[0] + 0.05) < 1e-12);
        CHECK(std::abs(next.positions[1] - 0.05) < 1e-12);
    }
    SUBCASE("approaching pair closes the gap exactly") {
        const auto e = line({0.0, 0.11}, 0.05);
        const FixedPotential phi{{}, [](double x) { return x < 0.05 ? 2.0 : -2.0; }};
        const auto next = hs_step(e, cfg, phi);
        CHECK(next.positions[1] - next.positions[0] == doctest::Approx(0.1).epsilon(1e-10));
        CHECK(next.positions[0] == doctest::Approx(0.005));
    }
    SUBCASE("chain at exact contact spacing compressed from both ends") {
        std::vector<double> x;
        for (int i = 0; i < 10; ++i) x.push_back(0.1 * i);
        const auto e = line(x, 0.05);
        const FixedPotential phi{{}, [](double y) { return 0.45 - y; }};
        const auto tr = hs_simulate(e, cfg, phi, 0.2, {0.1});
        for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(tr.states.back().positions[i] - 0.1 * i) < 1e-10);
        CHECK(tr.max_restoration < 1e-12);
        CHECK(!tr.contacts.empty());
        for (double d : tr.min_distance) CHECK(d >= 0.1 - 1e-12);
    }
    SUBCASE("overlapping start is rejected") {
        CHECK_THROWS_AS(hs_simulate(line({0.0, 0.05}, 0.05), cfg, FixedPotential{{}, [](double) { return 0.0; }}, 0.1),
                        InfeasibleError);
    }
}

TEST_CASE("hard-sphere energy") {
    InteractionKernel k;
    k.scale_eps = 0.3;
    const Mollifier m(0.02, MollifierShape::IndicatorBall);
    auto e = line({-0.2, 0.0, 0.04, 0.3}, 0.02);
    const auto r = hs_energy(e, k, m);
    CHECK(std::isfinite(r.total));
    CHECK(r.total < 0.0);
    auto shifted = e;
    for (double& x : shifted.positions) x += 1.7;
    CHECK(hs_energy(shifted, k, m).total == doctest::Approx(r.total).epsilon(1e-12));
    CHECK(std::isinf(hs_energy(line({0.0, 0.03}, 0.02), k, m).total));
}

TEST_CASE("self-consistent dynamics dissipate and satisfy the weak form") {
    InteractionKernel k;
    k.scale_eps = 0.2;
    const double delta = 0.01;
    SelfConsistent sc;
    sc.kernel = k;
    sc.mollifier = Mollifier(delta, MollifierShape::IndicatorBall);
    std::vector<double> x;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 0.6);
    for (int i = 0; i < 20; ++i) x.push_back(0.05 * i + 0.5 * delta * u(rng) / 0.6);
    const auto e = line(x, delta);
    HsConfig cfg;
    cfg.dt = 2e-3;
    const auto tr = hs_simulate(e, cfg, sc, 0.4, {}, k);
    REQUIRE(tr.step_energy.size() == tr.steps + 1);
    CHECK(dissipation_check(tr.step_energy, 10.0 * cfg.dt * cfg.dt).pass);
    CHECK(tr.step_energy.back() < tr.step_energy.front());
    for (double d : tr.min_distance) CHECK(d >= 2.0 * delta - 1e-9 * delta);

    // d/dt <mu, psi> = <mu, psi' u> along one step, to first order in dt.
    const auto step = hs_step_detailed(e, cfg, sc);
    const std::vector<std::function<double(double)>> psi = {
        [](double y) { return y; }, [](double y) { return y * y; }, [](double y) { return std::sin(3 * y); },
        [](double y) { return std::exp(-y); }, [](double y) { return std::cos(y) * y; }};
    const std::vector<std::function<double(double)>> dpsi = {
        [](double) { return 1.0; }, [](double y) { return 2 * y; }, [](double y) { return 3 * std::cos(3 * y); },
        [](double y) { return -std::exp(-y); }, [](double y) { return std::cos(y) - y * std::sin(y); }};
    for (std::size_t f = 0; f < psi.size(); ++f) {
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            lhs += (psi[f](step.ensemble.positions[i]) - psi[f](x[i])) / cfg.dt;
            rhs += dpsi[f](x[i]) * step.projection.velocities[i];
        }
        CHECK(std::abs(lhs - rhs) / x.size() < 10.0 * cfg.dt);
    }
}
