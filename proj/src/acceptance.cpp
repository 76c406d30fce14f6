#include "aggdiff/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "aggdiff/config.hpp"
#include "aggdiff/errors.hpp"
#include "aggdiff/hardsphere.hpp"
#include "aggdiff/harness.hpp"
#include "aggdiff/metrics.hpp"
#include "aggdiff/oracles.hpp"
#include "aggdiff/particles.hpp"
#include "aggdiff/pde.hpp"
#include "aggdiff/pressure.hpp"

namespace aggdiff {

namespace {

class Probe {
public:
    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass_ = false;
            failed_ << (failed_.tellp() > 0 ? "; " : "") << what;
        }
    }
    template <class T>
    void note(const std::string& key, const T& value) {
        notes_ << (notes_.tellp() > 0 ? " " : "") << key << "=" << value;
    }
    void note_list(const std::string& key, const std::vector<double>& v) {
        std::ostringstream s;
        s << std::setprecision(4);
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
        note(key, s.str());
    }
    bool pass() const { return pass_; }
    std::string detail() const {
        return notes_.str() + (pass_ ? std::string() : " | failed: " + failed_.str());
    }

private:
    bool pass_ = true;
    std::ostringstream notes_, failed_;
};

std::string sci(double v) {
    std::ostringstream s;
    s << std::setprecision(4) << v;
    return s.str();
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

// 1. Closed-form constants.
void constants(Probe& p) {
    const double gamma = surface_tension_gamma(DoubleWell::make(HardSphere{}, 1.0));
    const double t3 = theta_star(3.0, 1.0), t4 = theta_star(4.0, 1.0);
    p.note("gamma_hs", sci(gamma));
    p.note("theta3", sci(t3));
    p.note("theta4", std::to_string(t4));
    p.check(std::abs(gamma - 0.25) < 1e-6, "gamma(HardSphere, sigma=1) = 0.25");
    p.check(std::abs(t3 - 0.5) < 1e-12, "theta_3 = 0.5");
    p.check(std::abs(t4 - std::sqrt(0.5)) < 1e-12, "theta_4 = 0.70711");
}

// 2. Sharp-interface limit of G_eps for a hard-sphere plateau.
void gamma_limit(Probe& p) {
    const InteractionKernel k;
    const auto hs = DoubleWell::make(HardSphere{}, 1.0);
    const auto f = GridField::indicator(-0.5, 1.5, 100000, 0.0, 1.0, 1.0);
    std::vector<double> vals, gaps;
    for (double eps : {0.04, 0.02, 0.01}) {
        vals.push_back(energy_G_eps(f, hs, k, eps).total);
        gaps.push_back(std::abs(vals.back() - 0.5));
    }
    p.note_list("G_eps(0.04,0.02,0.01)", vals);
    p.note("gaps", sci(gaps[0]) + "," + sci(gaps[1]) + "," + sci(gaps[2]));
    p.check(gaps.back() < 0.025, "G_eps within 5% of 0.5 at eps = 0.01");
    // The exact gap of a plateau is O(exp(-1/eps)), below quadrature rounding here.
    p.check(gaps[1] <= gaps[0] + 1e-9 && gaps[2] <= gaps[1] + 1e-9, "monotone approach to 0.5");
}

// 3. Boundary layer tau_eps.
void boundary_layer(Probe& p) {
    const InteractionKernel k;
    const double eps = 0.01;
    const auto tau = tau_field(k, eps, RobinBC{1.0, 0.0}, 0.0, 1.0, 20000);
    double worst = 0.0;
    for (std::size_t i = 0; i < tau.size() && tau.center(i) <= 5 * eps; ++i)
        worst = std::max(worst, std::abs(tau.values[i] / std::exp(-tau.center(i) / eps) - 1.0));
    const double eps2 = 1e-3;
    const auto tau2 = tau_field(k, eps2, RobinBC{1.0, 0.0}, 0.0, 1.0, 100000);
    double half = 0.0;
    for (std::size_t i = 0; i < tau2.size() / 2; ++i) half += tau2.values[i] * tau2.dx;
    p.note("profile_rel_err", sci(worst));
    p.note("weight", sci(half / eps2));
    p.check(worst < 0.01, "profile within 1% of exp(-x/eps) on [0, 5 eps]");
    p.check(std::abs(half / eps2 - 1.0) < 0.02, "integrated weight within 2% of 1");
}

// 4. Blob velocity oracle and dissipation of a 500-particle run.
void blob_oracle(Probe& p) {
    BlobConfig fine;
    fine.mollifier = Mollifier(0.2);
    fine.eval_spacing = 0.2 / 4096.0;
    const std::vector<double> x = {-0.1, 0.1};
    ParticleEnsemble pair;
    pair.positions = x;
    pair.delta = 0.2;
    const auto v = blob_velocity(pair, fine);
    const auto o = nested_quadrature_velocity(x, fine);
    const double err = std::max(std::abs(v[0] - o[0]), std::abs(v[1] - o[1]));
    p.note("pair_err", sci(err));
    p.check(err < 1e-6, "2-particle velocity within 1e-6 of nested quadrature");

    BlobConfig cfg;
    cfg.mollifier = Mollifier(0.05);
    const Bump bump{0.0, 1.0, 1.0};
    const auto e0 = sample_quantiles(bump, -1.0, 1.0, 500, 0.05);
    const double dt = BlobModel(cfg).stable_dt(e0);
    cfg.dt = dt;
    const auto tr = blob_simulate(cfg, e0, 1000 * dt * (1.0 - 1e-9), {}, 1);
    const auto d = dissipation_check(tr.step_energy, 10.0 * dt * dt * 500);
    p.note("steps", tr.steps);
    p.note("worst_increase", sci(d.worst_increase));
    p.note("tol", sci(10.0 * dt * dt * 500));
    p.check(tr.steps >= 1000, "10^3 steps");
    p.check(d.pass, "energy dissipation at 10 dt^2 N");
}

// 5. Projection against enumeration; feasibility of a long attraction run.
void hardsphere_kkt(Probe& p) {
    Rng rng(20240601);
    std::size_t done = 0, tries = 0;
    double worst_u = 0.0, worst_res = 0.0;
    while (done < 200 && tries < 5000) {
        ++tries;
        const auto e = random_contact_cluster(rng, 0.05);
        const auto g = detect_contacts(e, 1e-9);
        if (g.pairs.empty() || g.pairs.size() > 12) continue;
        const auto v = normal_draws(rng, e.positions.size());
        const auto r = project_velocity(e, v, g);
        const auto u = enumerate_projection(e, v, g);
        for (std::size_t k = 0; k < u.size(); ++k) worst_u = std::max(worst_u, std::abs(u[k] - r.velocities[k]));
        worst_res = std::max(worst_res, lcp_natural_residual(contact_lcp(e, v, g), r.pressures));
        ++done;
    }
    p.note("instances", done);
    p.note("max_velocity_diff", sci(worst_u));
    p.note("max_kkt_residual", sci(worst_res));
    p.check(done == 200, "200 instances");
    p.check(worst_u <= 1e-8 && worst_res <= 1e-8, "enumeration match and residual <= 1e-8");

    const double delta = 0.01;
    ParticleEnsemble e;
    e.delta = delta;
    for (int i = 0; i < 50; ++i) e.positions.push_back(-1.0 + 2.0 * (i + 0.5) / 50.0);
    HsConfig cfg;
    cfg.dt = 1e-3;
    SelfConsistent mode;
    mode.mollifier = Mollifier(delta);
    const auto tr = hs_simulate(e, cfg, mode, 1e4 * cfg.dt * (1.0 - 1e-12));
    double dmin = min_pair_distance(e);
    for (double d : tr.min_distance) dmin = std::min(dmin, d);
    const double spread = tr.states.back().positions.back() - tr.states.back().positions.front();
    p.note("steps", tr.steps);
    p.note("min_gap_over_delta", sci((dmin - 2 * delta) / delta));
    p.note("final_spread", sci(spread));
    p.check(tr.steps >= 10000, "10^4 steps");
    p.check(dmin >= 2 * delta - 1e-9 * delta, "min distance >= 2 delta - 1e-9 delta");
}

// 6. Barenblatt.
void barenblatt(Probe& p) {
    PdeConfig c;
    c.law = PowerLaw{2.0};
    c.interaction_weight = 0.0;
    const double t0 = 0.1;
    auto profile = [](double t) {
        return GridField::from_function(-2.5, 2.5, 2000, [t](double x) { return barenblatt_profile(2, 1, x, t); },
                                        Boundary::WholeLineTruncated);
    };
    const auto run = pde_run(c, profile(t0), 0.5);
    const auto exact = profile(t0 + 0.5);
    const double rel = l1_distance(run.states.back(), exact) / exact.mass();
    p.note("rel_L1", sci(rel));
    p.note("mass_drift", sci(run.max_relative_mass_drift));
    p.check(rel < 0.02, "L1 within 2%");
    p.check(run.max_relative_mass_drift < 1e-10, "mass conserved to 1e-10");
}

const char* kBridgeBlob = R"(
[scenario]
id = delta_bridge
tier = blob
[model]
law = power
m = 3
sigma = 1
eta = 1
[initial]
kind = bump
width = 1
[particles]
n = 2000
delta = 0.2
[time]
T = 0.25
energy_every = 0
)";

const char* kBridgePde = R"(
[scenario]
id = delta_bridge_pde
tier = pde
[model]
m = 3
sigma = 1
eta = 1
[initial]
kind = bump
width = 1
[grid]
left = -3
right = 3
cells = 4000
boundary = whole_line
[time]
T = 0.25
energy_every = 0
)";

// 7. delta -> 0: blob against the PDE in W2.
void delta_bridge(Probe& p) {
    const auto blob = parse_config(kBridgeBlob);
    const auto pde = parse_config(kBridgePde);
    const auto t = convergence_study(blob, "particles.delta", {0.2, 0.1, 0.05}, Oracle{pde}, "w2", 0.25);
    std::vector<double> d;
    for (const auto& r : t.rows) d.push_back(r.distance);
    p.note_list("d_W(0.2,0.1,0.05)", d);
    if (t.fitted_order) p.note("order", sci(*t.fitted_order));
    p.check(t.monotone && strictly_decreasing(d), "distances strictly decreasing");
}

// 8. m -> infinity for an attractive collapse.
void m_bridge(Probe& p) {
    PdeConfig c;
    c.kernel.sigma = 0.1;
    c.kernel.scale_eps = 0.2;
    const auto init = GridField::indicator(-5.0, 5.0, 1000, -3.0, 3.0, 0.5);
    const auto r = incompressible_continuation(c, init, 1.0, LargeM{{10.0, 20.0, 40.0}});
    p.note_list("overshoot", r.overshoot);
    p.note_list("L1_successive", r.l1_successive);
    p.note_list("cauchy_ratio", r.cauchy_ratios);
    p.note_list("complementarity", r.complementarity);
    const auto a = incompressible_continuation(c, init, 1.0, SingularAlpha{SingularAlpha::Kind::Reciprocal, {0.1, 0.03, 0.01}});
    std::vector<double> to_ref;
    for (const auto& f : r.finals) to_ref.push_back(l1_distance(f, a.finals.back()));
    p.note_list("L1_to_alpha0.01", to_ref);
    p.check(r.overshoot[0] > 0.0, "collapse reaches density above 1");
    p.check(strictly_decreasing(r.overshoot), "overshoot decreasing");
    p.check(strictly_decreasing(r.l1_successive) && r.cauchy_ratios[0] < 1.0, "Cauchy ratio below 1");
}

// 9. Stefan regime.
void stefan_regime(Probe& p) {
    const auto dw = DoubleWell::make(PowerLaw{3.0}, 1.0);
    const auto init = GridField::indicator(-2.0, 2.0, 3200, -0.5, 0.5, 1.0, Boundary::WholeLineTruncated);
    const auto limit = stefan_solve(init, dw, 0.5);
    std::vector<double> dist, width;
    for (double eps : {0.1, 0.05, 0.025}) {
        PdeConfig c;
        c.law = PowerLaw{3.0};
        c.eps = eps;
        c.time_scaling = TimeScaling::Stefan;
        const auto run = pde_run(c, init, 0.5, {}, 1000000);
        dist.push_back(l1_distance(run.states.back(), limit.states.back()));
        width.push_back(interface_diagnostics(run.states.back(), dw).width.value_or(0.0));
    }
    p.note_list("L1_to_stefan", dist);
    p.note_list("width", width);
    const double r1 = width[0] / width[1], r2 = width[1] / width[2];
    p.note("width_ratios", sci(r1) + "," + sci(r2));
    p.check(strictly_decreasing(dist), "L1 distance to stefan_solve decreasing");
    p.check(r1 > 1.5 && r1 < 2.5 && r2 > 1.5 && r2 < 2.5, "width ratio per octave in 2 +- 25%");

    PdeConfig c;
    c.law = PowerLaw{3.0};
    c.eps = 0.05;
    c.time_scaling = TimeScaling::Stefan;
    const auto coarse = GridField::indicator(-2.0, 2.0, 1600, -0.5, 0.5, 1.0, Boundary::WholeLineTruncated);
    const auto run = pde_run(c, coarse, 8.0, {}, 1000000);
    const auto plateau = interface_diagnostics(run.states.back(), dw).plateau_value;
    p.note("plateau", plateau ? sci(*plateau) : std::string("none"));
    p.check(plateau && std::abs(*plateau / dw.theta - 1.0) < 0.02, "plateau within 2% of theta_3 = 0.5");
}

// 10. Hele-Shaw metastability.
void hele_shaw(Probe& p) {
    const auto dw = DoubleWell::make(PowerLaw{3.0}, 1.0);
    const double g0 = 2.0 * surface_tension_gamma(dw) * dw.theta;
    std::vector<double> drift, gap;
    for (double eps : {0.08, 0.04, 0.02}) {
        const double L = 1.5;
        const auto n = static_cast<std::size_t>(2 * L / (eps / 10) + 0.5);
        const auto init = GridField::indicator(-L, L, n, -1.0, 1.0, dw.theta, Boundary::WholeLineTruncated);
        PdeConfig c;
        c.law = PowerLaw{3.0};
        c.eps = eps;
        c.time_scaling = TimeScaling::HeleShaw;
        std::vector<double> samples;
        for (int k = 1; k < 20; ++k) samples.push_back(k / 20.0);
        const auto run = pde_run(c, init, 1.0, samples, 20);
        double worst = 0.0;
        for (const auto& f : run.states) worst = std::max(worst, l1_distance(f, init));
        double integral = 0.0;
        for (std::size_t k = 1; k < run.series_times.size(); ++k)
            integral += 0.5 * (run.energies[k] + run.energies[k - 1] - 2 * g0) * (run.series_times[k] - run.series_times[k - 1]);
        drift.push_back(worst);
        gap.push_back(integral);
    }
    p.note_list("max_L1_drift(0.08,0.04,0.02)", drift);
    p.note_list("energy_gap", gap);
    p.note("G0", sci(g0));
    p.check(drift.back() < 0.05, "L1 drift below 0.05 at eps = 0.02");
    p.check(strictly_decreasing(gap), "energy gap decreasing in eps");
}

// 11. Contact angles and the wall-weighted energy.
void contact_angles(Probe& p) {
    p.check(contact_angle(RobinBC{0.0, 1.0}, 1.0) == std::numbers::pi / 2, "a = 0 gives pi/2");
    p.check(contact_angle(RobinBC{1.0, 0.0}, 1.0) == std::numbers::pi, "b = 0 gives pi");
    double worst = 0.0;
    for (double eta : {0.0, 0.1, 0.25, 0.4, 0.5, 0.75, 1.0})
        worst = std::max(worst, std::abs(std::cos(contact_angle(eta)) - (2 * eta - 1)));
    p.note("cos_err", sci(worst));
    p.check(worst < 1e-15, "cos alpha = 2 eta - 1");

    const InteractionKernel k;
    const auto hs = DoubleWell::make(HardSphere{}, 1.0);
    const auto f = GridField::indicator(0.0, 1.0, 100000, 0.0, 0.3, 1.0);
    std::vector<double> vals;
    const double etas[3] = {0.0, 0.25, 0.5};
    bool ok = true;
    for (double eta : etas) {
        // Interior interface 1/(4 sigma^1.5) plus wall contact (1/(2 sigma^1.5))(1/2 - eta).
        const double expected = 0.25 + 0.5 * (0.5 - eta);
        vals.push_back(energy_G_eta_eps(f, hs, k, 0.01, eta).total);
        ok = ok && std::abs(vals.back() / expected - 1.0) < 0.05;
    }
    p.note_list("G_eta_eps(0,1/4,1/2)", vals);
    p.check(ok, "wall energies within 5% of 0.5, 0.375, 0.25");
}

// 12. Entropy health bound and the two J_eps routes.
void health(Probe& p) {
    PdeConfig c;
    c.law = PowerLaw{3.0};
    c.kernel.scale_eps = 0.5;
    const auto init = GridField::from_function(-3.0, 3.0, 300, Bump{0.0, 0.6, 1.2}, Boundary::WholeLineTruncated);
    const auto run = pde_run(c, init, 1.0, {0.25, 0.5, 0.75});
    const auto rate = entropy_growth_rate(c, init);
    bool bounded = rate.has_value();
    double slack = 1e300;
    for (std::size_t k = 0; rate && k < run.series_times.size(); ++k) {
        const double bound = run.entropies.front() + *rate * run.series_times[k];
        slack = std::min(slack, bound - run.entropies[k]);
        bounded = bounded && run.entropies[k] <= bound + 1e-12;
    }
    p.note("rate", rate ? sci(*rate) : std::string("none"));
    p.note("min_slack", sci(slack));
    p.check(bounded, "entropy below S(0) + r t");

    const auto dw = DoubleWell::make(PowerLaw{3.0}, 1.0);
    const InteractionKernel k;
    Rng rng(5);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const auto n = 50 + static_cast<std::size_t>(uniform01(rng) * 300);
        auto f = GridField::zeros(0.0, 1.0 + uniform01(rng), n);
        for (double& v : f.values) v = uniform01(rng) < 0.3 ? 0.0 : 1.2 * uniform01(rng);
        const double eps = 0.01 + 0.2 * uniform01(rng);
        worst = std::max(worst, energy_J_eps(f, dw, k, eps).relative_route_gap());
    }
    p.note("route_gap", sci(worst));
    p.check(worst < 1e-5, "J_eps routes agree within 1e-5 on 50 random fields");
}

Criterion make(int id, const std::string& name, double budget, void (*fn)(Probe&)) {
    return Criterion{id, name, budget, [=]() {
                         CriterionResult r;
                         r.id = id;
                         r.name = name;
                         r.budget_seconds = budget;
                         Probe p;
                         const auto t0 = std::chrono::steady_clock::now();
                         try {
                             fn(p);
                         } catch (const std::exception& e) {
                             p.check(false, std::string("exception: ") + e.what());
                         }
                         r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                         p.check(r.seconds < budget, "runtime budget " + sci(budget) + " s");
                         r.pass = p.pass();
                         r.detail = p.detail();
                         return r;
                     }};
}

}  // namespace

const std::vector<Criterion>& acceptance_criteria() {
    static const std::vector<Criterion> list = {
        make(1, "constants", 1.0, constants),
        make(2, "gamma_limit", 60.0, gamma_limit),
        make(3, "boundary_layer", 10.0, boundary_layer),
        make(4, "blob_oracle", 120.0, blob_oracle),
        make(5, "hardsphere_kkt", 120.0, hardsphere_kkt),
        make(6, "barenblatt", 60.0, barenblatt),
        make(7, "delta_bridge", 600.0, delta_bridge),
        make(8, "m_bridge", 600.0, m_bridge),
        make(9, "stefan_regime", 900.0, stefan_regime),
        make(10, "hele_shaw", 600.0, hele_shaw),
        make(11, "contact_angles", 300.0, contact_angles),
        make(12, "health", 120.0, health),
    };
    return list;
}

std::vector<CriterionResult> run_acceptance(const std::string& selector, std::ostream& out) {
    std::vector<const Criterion*> chosen;
    for (const auto& c : acceptance_criteria())
        if (selector == "all" || selector == c.name || selector == std::to_string(c.id)) chosen.push_back(&c);
    if (chosen.empty()) throw ConfigError("unknown acceptance suite '" + selector + "'");
    std::vector<CriterionResult> results;
    for (const auto* c : chosen) {
        auto r = c->run();
        out << "criterion " << std::setw(2) << r.id << " " << std::left << std::setw(15) << r.name << std::right << " "
            << (r.pass ? "PASS" : "FAIL") << " (" << std::fixed << std::setprecision(1) << r.seconds << " s) "
            << std::defaultfloat << r.detail << std::endl;
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace aggdiff
