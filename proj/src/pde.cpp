#include "aggdiff/pde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "aggdiff/errors.hpp"

namespace aggdiff {

namespace {

bool singular_law(const PressureLaw& law) {
    return std::holds_alternative<SingularReciprocal>(law) || std::holds_alternative<SingularLog>(law);
}

void check_field(const GridField& f) {
    if (f.size() < 3) throw InputError("pde fields need at least 3 cells");
    if (!(f.dx > 0.0) || !std::isfinite(f.dx)) throw InputError("grid spacing must be positive");
    for (double v : f.values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("density must be finite and nonnegative");
}

bool in_law_domain(const PressureLaw& law, const std::vector<double>& rho) {
    if (!singular_law(law)) return true;
    for (double v : rho)
        if (v >= 1.0) return false;
    return true;
}

double resolved_dt_max(const PdeConfig& cfg, double dx) { return cfg.dt_max > 0.0 ? cfg.dt_max : 0.1 * dx; }

// Potential pieces on the field's grid: phi (interaction only) and tau.
struct Potentials {
    std::vector<double> phi;
    std::vector<double> tau;  // empty unless EtaBoundaryDrift
    double eta_w = 0.0;
};

Potentials potentials(const GridField& field, const PdeConfig& cfg) {
    Potentials p;
    const auto k = cfg.effective_kernel();
    const std::size_t n = field.size();
    if (const auto* r = std::get_if<RobinSolve>(&cfg.potential)) {
        p.phi = solve_potential(field, k, cfg.effective_eps(), r->bc).values;
        return p;
    }
    const ExpConvolution conv(k, field.dx);
    p.phi = conv.apply(field.values);
    for (double& v : p.phi) v /= field.dx;
    if (const auto* e = std::get_if<EtaBoundaryDrift>(&cfg.potential)) {
        p.tau = conv.outside_mass(n);
        for (double& v : p.tau) v /= field.dx;
        p.eta_w = e->eta_w;
    }
    return p;
}

std::vector<double> drift_potential(const GridField& field, const PdeConfig& cfg) {
    if (cfg.interaction_weight == 0.0 && !std::holds_alternative<EtaBoundaryDrift>(cfg.potential))
        return std::vector<double>(field.size(), 0.0);
    const auto p = potentials(field, cfg);
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = cfg.interaction_weight * p.phi[i];
        if (!p.tau.empty()) out[i] += p.eta_w * p.tau[i];
    }
    return out;
}

// Face velocities u_{i+1/2} for i = 0..n-2.
std::vector<double> face_velocities(const std::vector<double>& Phi, double dx) {
    std::vector<double> u(Phi.size() - 1);
    for (std::size_t i = 0; i + 1 < Phi.size(); ++i) u[i] = (Phi[i + 1] - Phi[i]) / dx;
    return u;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Secant slope of a monotone potential across each face.
std::vector<double> secant_coefficients(const std::vector<double>& rho, const std::vector<double>& P,
                                        const std::function<double(double)>& dP) {
    std::vector<double> c(rho.size() - 1);
    for (std::size_t i = 0; i + 1 < rho.size(); ++i) {
        const double d = rho[i + 1] - rho[i];
        if (std::abs(d) > 1e-12 * std::max(1.0, std::abs(rho[i]))) {
            c[i] = (P[i + 1] - P[i]) / d;
        } else {
            c[i] = dP(0.5 * (rho[i] + rho[i + 1]));
        }
        c[i] = std::max(c[i], 0.0);
    }
    return c;
}

// Solves (I + lambda L) x = rhs, L the divergence of -c grad with zero end fluxes.
void implicit_diffusion(const std::vector<double>& c, double lambda, std::vector<double>& rhs) {
    const std::size_t n = rhs.size();
    std::vector<double> lo(n, 0.0), di(n, 1.0), up(n, 0.0);
    for (std::size_t f = 0; f + 1 < n; ++f) {
        const double a = lambda * c[f];
        di[f] += a;
        di[f + 1] += a;
        up[f] = -a;
        lo[f + 1] = -a;
    }
    solve_tridiagonal(std::move(lo), std::move(di), std::move(up), rhs);
}

// Accepts a candidate state, clipping rounding-level negatives. False on
// genuine negativity or non-finite values.
bool accept_values(std::vector<double>& v) {
    double top = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) return false;
        top = std::max(top, std::abs(x));
    }
    const double floor = -1e-13 * std::max(top, 1e-300);
    for (double& x : v) {
        if (x < floor) return false;
        if (x < 0.0) x = 0.0;
    }
    return true;
}

double max_pressure_slope(const PressureLaw& law, const std::vector<double>& rho) {
    double s = 0.0;
    for (double v : rho) s = std::max(s, v * f_second(law, v));
    return s;
}

void check_boundary_mass(const GridField& f, const PdeConfig& cfg) {
    if (f.bc != Boundary::WholeLineTruncated) return;
    const double left = f.values.front() * f.dx, right = f.values.back() * f.dx;
    if (left > cfg.boundary_mass_tol || right > cfg.boundary_mass_tol) {
        std::ostringstream os;
        os << "truncated whole-line domain too small: end-cell mass " << std::max(left, right) << " exceeds "
           << cfg.boundary_mass_tol;
        throw DomainError(os.str());
    }
}

std::vector<double> merged_targets(const std::vector<double>& sample_times, double T) {
    std::vector<double> t;
    for (double s : sample_times)
        if (s > 0.0 && s < T) t.push_back(s);
    t.push_back(T);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

}  // namespace

void PdeConfig::validate() const {
    validate_law(law);
    if (std::holds_alternative<HardSphere>(law))
        throw ConfigError("the hard-sphere law is reached only by continuation, not by pde_step");
    kernel.validate();
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("eps must be positive");
    if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw ConfigError("dt_safety must lie in (0, 1]");
    if (dt_max < 0.0) throw ConfigError("dt_max must be nonnegative");
    if (!(interaction_weight >= 0.0) || !std::isfinite(interaction_weight))
        throw ConfigError("interaction weight must be nonnegative");
    if (!(boundary_mass_tol > 0.0)) throw ConfigError("boundary mass tolerance must be positive");
    if (const auto* r = std::get_if<RobinSolve>(&potential)) r->bc.validate();
    if (const auto* e = std::get_if<EtaBoundaryDrift>(&potential))
        if (!std::isfinite(e->eta_w)) throw ConfigError("eta_w must be finite");
}

GridField potential_field(const GridField& field, const PdeConfig& cfg) {
    cfg.validate();
    check_field(field);
    GridField out = field;
    const auto p = potentials(field, cfg);
    out.values = p.phi;
    if (!p.tau.empty())
        for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += p.eta_w * p.tau[i];
    return out;
}

namespace {

// Solver-time step from the stability rule for given face velocities.
double stable_solver_dt(const GridField& field, const PdeConfig& cfg, const std::vector<double>& u) {
    const double umax = max_abs(u);
    double dt = resolved_dt_max(cfg, field.dx);
    if (umax > 0.0) dt = std::min(dt, field.dx / umax);
    if (cfg.diffusion == DiffusionScheme::Explicit) {
        const double s = max_pressure_slope(cfg.law, field.values);
        if (s > 0.0) dt = std::min(dt, 0.25 * field.dx * field.dx / s);
    }
    return cfg.dt_safety * dt;
}

}  // namespace

double pde_stable_dt(const GridField& field, const PdeConfig& cfg) {
    cfg.validate();
    check_field(field);
    return stable_solver_dt(field, cfg, face_velocities(drift_potential(field, cfg), field.dx)) * cfg.time_factor();
}

PdeStepResult pde_step_detailed(const GridField& field, const PdeConfig& cfg, double dt_limit) {
    cfg.validate();
    check_field(field);
    if (!in_law_domain(cfg.law, field.values)) throw DomainError("density outside the pressure law's domain");
    const std::size_t n = field.size();
    const double dx = field.dx;
    const auto& rho = field.values;

    const auto u = face_velocities(drift_potential(field, cfg), dx);
    std::vector<double> P(n);
    for (std::size_t i = 0; i < n; ++i) P[i] = pressure_potential(cfg.law, rho[i]);

    // Solver-time step from the stability rule, then the caller's cap.
    const double tf = cfg.time_factor();
    double dts = stable_solver_dt(field, cfg, u);
    if (dt_limit > 0.0) dts = std::min(dts, dt_limit / tf);

    std::vector<double> drift_flux(n - 1);
    for (std::size_t f = 0; f + 1 < n; ++f) {
        const double donor = u[f] > 0.0 ? rho[f] : rho[f + 1];
        double face = donor;
        if (cfg.drift == DriftScheme::PressureConsistent) {
            const double dfp = f_prime(cfg.law, rho[f + 1]) - f_prime(cfg.law, rho[f]);
            const double mean = std::abs(dfp) > 1e-12 * (1.0 + std::abs(P[f]) + std::abs(P[f + 1]))
                                    ? (P[f + 1] - P[f]) / dfp
                                    : 0.5 * (rho[f] + rho[f + 1]);
            face = std::min(std::clamp(mean, std::min(rho[f], rho[f + 1]), std::max(rho[f], rho[f + 1])),
                            2.0 * donor);
        }
        drift_flux[f] = u[f] * face;
    }

    std::vector<double> coef;
    if (cfg.diffusion == DiffusionScheme::SemiImplicit)
        coef = secant_coefficients(rho, P, [&](double r) { return r * f_second(cfg.law, r); });

    PdeStepResult out;
    out.field = field;
    for (;; ++out.halvings) {
        if (out.halvings > cfg.max_halvings) {
            std::ostringstream os;
            os << "pde step failed after " << cfg.max_halvings << " step halvings";
            throw NumericalError(os.str());
        }
        const double lam = dts / dx;
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double fin = i > 0 ? drift_flux[i - 1] : 0.0;
            const double fout = i + 1 < n ? drift_flux[i] : 0.0;
            next[i] = rho[i] - lam * (fout - fin);
        }
        if (cfg.diffusion == DiffusionScheme::Explicit) {
            for (std::size_t f = 0; f + 1 < n; ++f) {
                const double flux = -(P[f + 1] - P[f]) / dx;
                next[f] -= lam * flux;
                next[f + 1] += lam * flux;
            }
        } else {
            implicit_diffusion(coef, dts / (dx * dx), next);
        }
        if (accept_values(next) && in_law_domain(cfg.law, next)) {
            out.field.values = std::move(next);
            out.dt = dts * tf;
            break;
        }
        dts *= 0.5;
    }
    check_boundary_mass(out.field, cfg);
    return out;
}

GridField pde_step(const GridField& field, const PdeConfig& cfg) { return pde_step_detailed(field, cfg).field; }

EnergyReport pde_energy(const GridField& field, const PdeConfig& cfg) {
    cfg.validate();
    check_field(field);
    const auto p = potentials(field, cfg);
    EnergyReport r;
    double ent = 0.0, inter = 0.0, wall = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        ent += f_eval(cfg.law, field.values[i]);
        inter += field.values[i] * p.phi[i];
        if (!p.tau.empty()) wall += field.values[i] * p.tau[i];
    }
    const double dx = field.dx;
    r.terms["entropy"] = ent * dx;
    r.terms["interaction"] = -0.5 * cfg.interaction_weight * inter * dx;
    if (!p.tau.empty()) r.terms["boundary"] = -p.eta_w * wall * dx;
    r.id = FunctionalId::E_f;
    const auto* pl = std::get_if<PowerLaw>(&cfg.law);
    if (cfg.time_scaling != TimeScaling::Micro && pl && pl->m > 2.0 && cfg.interaction_weight == 1.0) {
        const auto dw = DoubleWell::make(cfg.law, cfg.kernel.sigma);
        r.terms["well_shift"] = dw.a_shift * field.mass();
        r.id = FunctionalId::J_eps;
    }
    r.sum_terms();
    if (cfg.time_scaling == TimeScaling::HeleShaw) {
        for (auto& [k, v] : r.terms) v /= cfg.eps;
        r.total /= cfg.eps;
        if (r.id == FunctionalId::J_eps) r.id = FunctionalId::G_eps;
    }
    return r;
}

PdeRun pde_run(const PdeConfig& cfg, const GridField& initial, double T, const std::vector<double>& sample_times,
               std::size_t energy_every) {
    cfg.validate();
    check_field(initial);
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("run horizon must be positive");
    if (energy_every == 0) throw ConfigError("energy_every must be positive");
    check_boundary_mass(initial, cfg);

    PdeRun run;
    run.initial_mass = initial.mass();
    run.min_value = initial.min_value();
    GridField cur = initial;
    double t = 0.0;
    auto record_series = [&]() {
        const auto e = pde_energy(cur, cfg);
        run.energy_id = e.id;
        run.series_times.push_back(t);
        run.energies.push_back(e.total);
        run.entropies.push_back(entropy(cur));
    };
    run.times.push_back(0.0);
    run.states.push_back(cur);
    record_series();
    for (double target : merged_targets(sample_times, T)) {
        const double tol = 1e-13 * std::max(1.0, target);
        while (t < target - tol) {
            auto st = pde_step_detailed(cur, cfg, target - t);
            cur = std::move(st.field);
            t = (t + st.dt >= target - tol) ? target : t + st.dt;
            ++run.steps;
            run.halvings += st.halvings;
            run.dt_history.push_back(st.dt);
            run.min_value = std::min(run.min_value, cur.min_value());
            if (run.initial_mass > 0.0)
                run.max_relative_mass_drift =
                    std::max(run.max_relative_mass_drift, std::abs(cur.mass() - run.initial_mass) / run.initial_mass);
            if (run.steps % energy_every == 0 || t == T) record_series();
        }
        run.times.push_back(t);
        run.states.push_back(cur);
    }
    if (run.series_times.back() != t) record_series();
    return run;
}

std::optional<double> entropy_growth_rate(const PdeConfig& cfg, const GridField& initial) {
    cfg.validate();
    check_field(initial);
    if (std::holds_alternative<RobinSolve>(cfg.potential)) return std::nullopt;
    const auto k = cfg.effective_kernel();
    const double M = initial.mass();
    const double w = cfg.interaction_weight;
    const double eps = cfg.effective_eps();
    double rho2;  // bound on int rho^2 along the run
    if (singular_law(cfg.law)) {
        rho2 = M;
    } else {
        const double m = std::get<PowerLaw>(cfg.law).m;
        if (m < 2.0) return std::nullopt;
        PdeConfig c = cfg;
        c.time_scaling = TimeScaling::Micro;
        const auto e = pde_energy(initial, c);
        double f_bound = e.total + 0.5 * w * k.amplitude() * M * M;
        if (const auto* d = std::get_if<EtaBoundaryDrift>(&cfg.potential))
            f_bound += std::max(0.0, d->eta_w) * M / k.sigma;
        rho2 = M + (m - 1.0) * f_bound;
    }
    return w * rho2 / (k.eta * eps * eps) / cfg.time_factor();
}

StefanRun stefan_solve(const GridField& initial, const DoubleWell& dw, double T,
                       const std::vector<double>& sample_times, const StefanOptions& opt) {
    check_field(initial);
    if (!(T > 0.0)) throw ConfigError("stefan_solve needs T > 0");
    if (std::holds_alternative<HardSphere>(dw.law)) throw ConfigError("stefan_solve needs a power-law double well");
    const double th = dw.theta;
    const double tol = opt.prepared_tol * th;
    for (std::size_t i = 0; i < initial.size(); ++i) {
        const double v = initial.values[i];
        if (v > tol && v < th - tol) {
            std::ostringstream os;
            os << "ill-prepared Stefan data: cell " << i << " has density " << v << " inside (0, theta = " << th
               << ")";
            throw InputError(os.str());
        }
    }
    const std::size_t n = initial.size();
    const double dx = initial.dx;
    const double dt = opt.dt > 0.0 ? opt.dt : 0.1 * dx;

    auto Q = [&](double r) { return hull_pressure_potential(dw, r); };
    auto dQ = [&](double r) { return r <= th ? 0.0 : r * (f_second(dw.law, r) - 1.0 / dw.sigma); };

    StefanRun out;
    GridField cur = initial;
    double t = 0.0;
    auto sample = [&]() {
        out.times.push_back(t);
        out.states.push_back(cur);
        double lo = std::numeric_limits<double>::quiet_NaN(), hi = lo;
        for (std::size_t i = 0; i < n; ++i)
            if (cur.values[i] > 0.0) {
                if (std::isnan(lo)) lo = cur.x_left + i * dx;
                hi = cur.x_left + (i + 1) * dx;
            }
        out.support_left.push_back(lo);
        out.support_right.push_back(hi);
    };
    sample();
    std::vector<double> q(n);
    for (double target : merged_targets(sample_times, T)) {
        const double ttol = 1e-13 * std::max(1.0, target);
        while (t < target - ttol) {
            const double h = std::min(dt, target - t);
            for (std::size_t i = 0; i < n; ++i) q[i] = Q(cur.values[i]);
            const auto c = secant_coefficients(cur.values, q, dQ);
            std::vector<double> next = cur.values;
            implicit_diffusion(c, h / (dx * dx), next);
            if (!accept_values(next)) throw NumericalError("Stefan step lost positivity");
            cur.values = std::move(next);
            t = (t + h >= target - ttol) ? target : t + h;
            ++out.steps;
        }
        sample();
    }
    return out;
}

ContinuationReport incompressible_continuation(const PdeConfig& base, const GridField& initial, double T,
                                               const ContinuationSchedule& schedule) {
    check_field(initial);
    const double capacity = initial.x_right() - initial.x_left;
    if (initial.mass() > capacity) throw InputError("initial mass exceeds the domain capacity at density 1");
    std::vector<PressureLaw> laws;
    ContinuationReport rep;
    if (const auto* s = std::get_if<LargeM>(&schedule)) {
        for (double m : s->m) {
            laws.push_back(PowerLaw{m});
            rep.parameters.push_back(m);
        }
    } else {
        const auto& sa = std::get<SingularAlpha>(schedule);
        for (double a : sa.alpha) {
            if (sa.kind == SingularAlpha::Kind::Reciprocal)
                laws.push_back(SingularReciprocal{a});
            else
                laws.push_back(SingularLog{a});
            rep.parameters.push_back(a);
        }
    }
    if (laws.size() < 2) throw ConfigError("continuation needs at least two schedule entries");
    for (const auto& law : laws) {
        PdeConfig c = base;
        c.law = law;
        const auto r = pde_run(c, initial, T);
        const GridField& fin = r.states.back();
        rep.finals.push_back(fin);
        rep.max_density.push_back(fin.max_value());
        rep.overshoot.push_back(fin.max_value() - 1.0);
        double comp = 0.0;
        for (double v : fin.values) comp += std::abs(f_prime(law, v) * (1.0 - v));
        rep.complementarity.push_back(comp * fin.dx);
    }
    for (std::size_t k = 0; k + 1 < rep.finals.size(); ++k)
        rep.l1_successive.push_back(l1_distance(rep.finals[k], rep.finals[k + 1]));
    for (std::size_t k = 0; k + 1 < rep.l1_successive.size(); ++k)
        rep.cauchy_ratios.push_back(rep.l1_successive[k + 1] / rep.l1_successive[k]);
    return rep;
}

double barenblatt_profile(double m, double mass, double x, double t) {
    if (!(m > 1.0) || !(mass > 0.0) || !(t > 0.0)) throw InputError("Barenblatt profile needs m > 1, mass > 0, t > 0");
    const double alpha = 1.0 / (m + 1.0);
    const double k = (m - 1.0) / (2.0 * m * (m + 1.0));
    const double p = 1.0 / (m - 1.0);
    // mass = C^(p + 1/2) k^(-1/2) B(1/2, p + 1)
    const double C = std::pow(mass * std::sqrt(k) / std::beta(0.5, p + 1.0), 1.0 / (p + 0.5));
    const double y = x * std::pow(t, -alpha);
    const double base = C - k * y * y;
    return base > 0.0 ? std::pow(t, -alpha) * std::pow(base, p) : 0.0;
}

}  // namespace aggdiff
