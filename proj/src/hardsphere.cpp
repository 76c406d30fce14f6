#include "aggdiff/hardsphere.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "aggdiff/errors.hpp"

namespace aggdiff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_ensemble(const ParticleEnsemble& ens) {
    ens.validate();
    if (ens.dim > 3) throw InputError("hard-sphere dynamics supports dim <= 3");
    if (!(ens.delta > 0.0)) throw InputError("particle radius must be positive");
}

double distance(const ParticleEnsemble& ens, std::size_t i, std::size_t j, std::array<double, 3>* e) {
    double d2 = 0.0;
    std::array<double, 3> diff{};
    for (int k = 0; k < ens.dim; ++k) {
        diff[k] = ens.coord(j, k) - ens.coord(i, k);
        d2 += diff[k] * diff[k];
    }
    const double d = std::sqrt(d2);
    if (e) {
        *e = {};
        if (d > 0.0)
            for (int k = 0; k < ens.dim; ++k) (*e)[k] = diff[k] / d;
        else
            (*e)[0] = 1.0;
    }
    return d;
}

// All pairs i < j closer than radius, ordered by (i, j).
std::vector<Contact> pairs_within(const ParticleEnsemble& ens, double radius) {
    std::vector<Contact> out;
    const std::size_t n = ens.count();
    auto add = [&](std::size_t a, std::size_t b) {
        Contact c;
        c.i = std::min(a, b);
        c.j = std::max(a, b);
        c.distance = distance(ens, c.i, c.j, &c.e);
        if (c.distance <= radius) out.push_back(c);
    };
    if (ens.dim == 1) {
        const auto order = sorted_order(ens);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n && ens.coord(order[b]) - ens.coord(order[a]) <= radius; ++b)
                add(order[a], order[b]);
    } else {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) add(a, b);
    }
    std::sort(out.begin(), out.end(), [](const Contact& x, const Contact& y) {
        return x.i != y.i ? x.i < y.i : x.j < y.j;
    });
    return out;
}

double dot_rel(const std::vector<double>& u, int dim, const Contact& c) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) s += (u[c.j * dim + k] - u[c.i * dim + k]) * c.e[k];
    return s;
}

void apply_impulse(std::vector<double>& u, int dim, const Contact& c, double dp) {
    for (int k = 0; k < dim; ++k) {
        u[c.i * dim + k] -= dp * c.e[k];
        u[c.j * dim + k] += dp * c.e[k];
    }
}

double natural_residual(const std::vector<double>& u, int dim, const std::vector<Contact>& pairs,
                        const std::vector<double>& p) {
    double r = 0.0;
    for (std::size_t c = 0; c < pairs.size(); ++c) {
        const double w = dot_rel(u, dim, pairs[c]) - pairs[c].min_rate;
        r = std::max(r, std::abs(std::min(p[c], w)));
    }
    return r;
}

}  // namespace

ContactGraph detect_contacts(const ParticleEnsemble& ens, double gap_tol, double feas_tol) {
    check_ensemble(ens);
    if (gap_tol < 0.0) throw ConfigError("gap tolerance must be nonnegative");
    const double two_delta = 2.0 * ens.delta;
    if (feas_tol <= 0.0) feas_tol = 1e-9 * ens.delta;
    ContactGraph g;
    g.pairs = pairs_within(ens, two_delta + gap_tol);
    for (const auto& c : g.pairs) {
        if (c.distance < two_delta - feas_tol) {
            std::ostringstream os;
            os << "particles " << c.i << " and " << c.j << " overlap: distance " << c.distance << " < 2 delta";
            throw InfeasibleError(os.str());
        }
    }
    return g;
}

ProjectionResult project_velocity(const ParticleEnsemble& ens, const std::vector<double>& v,
                                  const ContactGraph& graph, const ProjectionOptions& opt,
                                  const std::vector<double>* warm_start) {
    check_ensemble(ens);
    if (v.size() != ens.positions.size()) throw InputError("desired velocity has the wrong size");
    if (!(opt.omega > 0.0 && opt.omega < 2.0)) throw ConfigError("over-relaxation must lie in (0, 2)");
    const int dim = ens.dim;
    const auto& pairs = graph.pairs;
    ProjectionResult r;
    r.velocities = v;
    r.pressures.assign(pairs.size(), 0.0);
    if (warm_start && warm_start->size() == pairs.size()) {
        for (std::size_t c = 0; c < pairs.size(); ++c) {
            r.pressures[c] = std::max(0.0, (*warm_start)[c]);
            apply_impulse(r.velocities, dim, pairs[c], r.pressures[c]);
        }
    }
    if (pairs.empty()) return r;
    r.kkt_residual = natural_residual(r.velocities, dim, pairs, r.pressures);
    while (r.kkt_residual > opt.tolerance) {
        if (r.sweeps >= opt.max_sweeps) {
            std::ostringstream os;
            os << "projected Gauss-Seidel did not converge in " << opt.max_sweeps << " sweeps, residual "
               << r.kkt_residual;
            throw NumericalError(os.str());
        }
        for (std::size_t c = 0; c < pairs.size(); ++c) {
            // Diagonal of the contact operator is |e|^2 + |e|^2 = 2.
            const double w = dot_rel(r.velocities, dim, pairs[c]) - pairs[c].min_rate;
            const double pn = std::max(0.0, r.pressures[c] - opt.omega * w / 2.0);
            const double dp = pn - r.pressures[c];
            if (dp != 0.0) {
                apply_impulse(r.velocities, dim, pairs[c], dp);
                r.pressures[c] = pn;
            }
        }
        ++r.sweeps;
        r.kkt_residual = natural_residual(r.velocities, dim, pairs, r.pressures);
    }
    return r;
}

ContactLcp contact_lcp(const ParticleEnsemble& ens, const std::vector<double>& v, const ContactGraph& graph) {
    const auto& P = graph.pairs;
    const std::size_t n = P.size();
    const int dim = ens.dim;
    ContactLcp l;
    l.size = n;
    l.A.assign(n * n, 0.0);
    l.b.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        l.b[c] = dot_rel(v, dim, P[c]) - P[c].min_rate;
        for (std::size_t d = 0; d < n; ++d) {
            double ee = 0.0;
            for (int k = 0; k < dim; ++k) ee += P[c].e[k] * P[d].e[k];
            double s = 0.0;
            if (P[c].i == P[d].i) s += ee;
            if (P[c].j == P[d].j) s += ee;
            if (P[c].i == P[d].j) s -= ee;
            if (P[c].j == P[d].i) s -= ee;
            l.A[c * n + d] = s;
        }
    }
    return l;
}

double lcp_natural_residual(const ContactLcp& lcp, const std::vector<double>& p) {
    double r = 0.0;
    for (std::size_t c = 0; c < lcp.size; ++c) {
        double w = lcp.b[c];
        for (std::size_t d = 0; d < lcp.size; ++d) w += lcp.A[c * lcp.size + d] * p[d];
        r = std::max(r, std::abs(std::min(p[c], w)));
    }
    return r;
}

const RegularizedKernel& SelfConsistent::table() const {
    if (!table_) table_ = std::make_shared<const RegularizedKernel>(regularized_kernel(kernel, mollifier));
    return *table_;
}

std::vector<double> desired_velocity(const ParticleEnsemble& ens, const DesiredVelocityMode& mode) {
    check_ensemble(ens);
    if (ens.dim != 1) throw InputError("desired velocities are one dimensional");
    std::vector<double> v(ens.count());
    if (const auto* fp = std::get_if<FixedPotential>(&mode)) {
        if (!fp->phi && !fp->grad) throw ConfigError("fixed potential needs phi or its gradient");
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double x = ens.positions[i];
            if (fp->grad) {
                v[i] = fp->grad(x);
            } else {
                const double h = 1e-6 * std::max(1.0, std::abs(x));
                v[i] = (fp->phi(x + h) - fp->phi(x - h)) / (2.0 * h);
            }
        }
    } else {
        const auto& sc = std::get<SelfConsistent>(mode);
        v = sc.table().gradient_sum(ens.positions, ens.weight());
    }
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalError("non-finite desired velocity");
    return v;
}

void HsConfig::validate(double delta) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("hard-sphere dt must be positive");
    if (gap_tol < 0.0 || feas_tol < 0.0) throw ConfigError("tolerances must be nonnegative");
    if (!(delta > 0.0)) throw ConfigError("particle radius must be positive");
    if (max_restore_sweeps == 0) throw ConfigError("restoration needs at least one sweep");
    if (!(projection.omega > 0.0 && projection.omega < 2.0)) throw ConfigError("over-relaxation must lie in (0, 2)");
}

double min_pair_distance(const ParticleEnsemble& ens) {
    check_ensemble(ens);
    const std::size_t n = ens.count();
    double best = kInf;
    if (ens.dim == 1) {
        const auto order = sorted_order(ens);
        for (std::size_t a = 1; a < n; ++a) best = std::min(best, ens.coord(order[a]) - ens.coord(order[a - 1]));
        return best;
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) best = std::min(best, distance(ens, a, b, nullptr));
    return best;
}

HsStepResult hs_step_detailed(const ParticleEnsemble& ens, const HsConfig& cfg, const DesiredVelocityMode& mode,
                              const PressureCache* warm_start) {
    check_ensemble(ens);
    cfg.validate(ens.delta);
    const double two_delta = 2.0 * ens.delta;
    const double gap_tol = cfg.resolved_gap_tol(ens.delta);
    const double feas = cfg.resolved_feas_tol(ens.delta);
    const int dim = ens.dim;

    HsStepResult out;
    out.desired = desired_velocity(ens, mode);
    double vmax = 0.0;
    for (double x : out.desired) vmax = std::max(vmax, std::abs(x));

    // Pairs that could meet within dt, each limited to closing its own gap.
    out.graph.pairs = pairs_within(ens, two_delta + gap_tol + 2.0 * cfg.dt * vmax);
    for (auto& c : out.graph.pairs) {
        const double gap = c.distance - two_delta;
        if (gap < -feas) throw InfeasibleError("hard-sphere step started from an overlapping state");
        c.min_rate = -gap / cfg.dt;
    }
    std::vector<double> warm;
    if (warm_start) {
        warm.resize(out.graph.pairs.size(), 0.0);
        for (std::size_t c = 0; c < warm.size(); ++c) {
            const auto it = warm_start->find({out.graph.pairs[c].i, out.graph.pairs[c].j});
            if (it != warm_start->end()) warm[c] = it->second;
        }
    }
    out.projection = project_velocity(ens, out.desired, out.graph, cfg.projection, warm_start ? &warm : nullptr);

    out.ensemble = ens;
    for (std::size_t k = 0; k < ens.positions.size(); ++k) out.ensemble.positions[k] += cfg.dt * out.projection.velocities[k];

    // Push-apart pass for residual overlaps (rounding in 1D, curvature in 2D).
    auto& x = out.ensemble.positions;
    std::vector<double> moved(x.size(), 0.0);
    for (std::size_t sweep = 0;; ++sweep) {
        const auto close = pairs_within(out.ensemble, two_delta - 0.5 * feas);
        if (close.empty()) break;
        if (sweep == cfg.max_restore_sweeps) {
            std::ostringstream os;
            os << "feasibility restoration failed after " << sweep << " sweeps";
            throw InfeasibleError(os.str());
        }
        for (auto c : close) {
            c.distance = distance(out.ensemble, c.i, c.j, &c.e);
            const double push = 0.5 * (two_delta - c.distance);
            if (push <= 0.0) continue;
            for (int k = 0; k < dim; ++k) {
                x[c.i * dim + k] -= push * c.e[k];
                x[c.j * dim + k] += push * c.e[k];
                moved[c.i * dim + k] -= push * c.e[k];
                moved[c.j * dim + k] += push * c.e[k];
            }
        }
        out.restoration_sweeps = sweep + 1;
    }
    for (double m : moved) out.restoration_displacement = std::max(out.restoration_displacement, std::abs(m));
    for (double p : x)
        if (!std::isfinite(p)) throw NumericalError("non-finite particle position after hard-sphere step");
    return out;
}

ParticleEnsemble hs_step(const ParticleEnsemble& ens, const HsConfig& cfg, const DesiredVelocityMode& mode) {
    return hs_step_detailed(ens, cfg, mode).ensemble;
}

namespace {

EnergyReport hs_energy_with(const ParticleEnsemble& ens, const RegularizedKernel& rk, const Mollifier& mollifier) {
    EnergyReport r;
    r.id = FunctionalId::E_delta;
    bool feasible = min_pair_distance(ens) >= 2.0 * ens.delta - 1e-9 * ens.delta;
    if (feasible && mollifier.shape() == MollifierShape::IndicatorBall) {
        // Covered fraction: 2 delta N (K * rho_N) counts the balls over each cell.
        const auto mu = mollify(ens, mollifier);
        const double scale = 2.0 * mollifier.delta() * static_cast<double>(ens.count());
        for (double v : mu.values)
            if (v * scale > 1.0 + 1e-8) {
                feasible = false;
                break;
            }
    }
    if (!feasible) {
        r.terms["entropy"] = kInf;
        r.terms["interaction"] = 0.0;
        r.total = kInf;
        return r;
    }
    const double w = ens.weight();
    r.terms["entropy"] = 0.0;
    r.terms["interaction"] =
        -0.5 * (rk.pair_sum(ens.positions, w) - static_cast<double>(ens.count()) * w * w * rk.value(0.0));
    r.sum_terms();
    return r;
}

}  // namespace

EnergyReport hs_energy(const ParticleEnsemble& ens, const InteractionKernel& kernel, const Mollifier& mollifier) {
    check_ensemble(ens);
    if (ens.dim != 1) throw InputError("hard-sphere energy is one dimensional");
    return hs_energy_with(ens, regularized_kernel(kernel, mollifier), mollifier);
}

HsTrajectory hs_simulate(const ParticleEnsemble& initial, const HsConfig& cfg, const DesiredVelocityMode& mode,
                         double T, const std::vector<double>& sample_times,
                         const std::optional<InteractionKernel>& energy_kernel) {
    if (!(T > 0.0)) throw ConfigError("simulation horizon must be positive");
    check_ensemble(initial);
    cfg.validate(initial.delta);
    detect_contacts(initial, cfg.resolved_gap_tol(initial.delta), cfg.resolved_feas_tol(initial.delta));

    std::optional<RegularizedKernel> rk;
    const Mollifier emoll(initial.delta, MollifierShape::IndicatorBall);
    if (energy_kernel) rk = regularized_kernel(*energy_kernel, emoll);

    std::vector<double> targets;
    for (double t : sample_times)
        if (t > 0.0 && t < T) targets.push_back(t);
    targets.push_back(T);
    std::sort(targets.begin(), targets.end());

    HsTrajectory tr;
    ParticleEnsemble cur = initial;
    double t = 0.0;
    PressureCache warm;
    ContactGraph last_graph;
    std::vector<double> last_p;
    auto sample = [&]() {
        tr.times.push_back(t);
        tr.states.push_back(cur);
        for (std::size_t c = 0; c < last_graph.pairs.size(); ++c) {
            const auto& pc = last_graph.pairs[c];
            if (last_p[c] > 0.0) tr.contacts.push_back({t, pc.i, pc.j, last_p[c]});
        }
    };
    sample();
    if (rk) tr.step_energy.push_back(hs_energy_with(cur, *rk, emoll).total);
    for (double target : targets) {
        while (t < target - 1e-14 * std::max(1.0, target)) {
            HsConfig c = cfg;
            if (t + c.dt > target) c.dt = target - t;
            auto res = hs_step_detailed(cur, c, mode, &warm);
            warm.clear();
            for (std::size_t k = 0; k < res.graph.pairs.size(); ++k)
                if (res.projection.pressures[k] > 0.0)
                    warm[{res.graph.pairs[k].i, res.graph.pairs[k].j}] = res.projection.pressures[k];
            last_graph = std::move(res.graph);
            last_p = res.projection.pressures;
            cur = std::move(res.ensemble);
            t = (t + c.dt > target - 1e-14 * std::max(1.0, target)) ? target : t + c.dt;
            ++tr.steps;
            tr.max_restoration = std::max(tr.max_restoration, res.restoration_displacement);
            tr.min_distance.push_back(min_pair_distance(cur));
            if (rk) tr.step_energy.push_back(hs_energy_with(cur, *rk, emoll).total);
        }
        sample();
    }
    return tr;
}

}  // namespace aggdiff
