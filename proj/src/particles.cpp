#include "aggdiff/particles.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "aggdiff/errors.hpp"

namespace aggdiff {

namespace {

using GL8 = boost::math::quadrature::gauss<double, 8>;

const PowerLaw& power_law(const PressureLaw& law) {
    const auto* p = std::get_if<PowerLaw>(&law);
    if (!p) throw ConfigError("blob dynamics needs a power law");
    return *p;
}

std::vector<double> sorted_copy(const std::vector<double>& x, std::vector<std::size_t>* order) {
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) xs[i] = x[idx[i]];
    if (order) *order = std::move(idx);
    return xs;
}

void check_1d(const ParticleEnsemble& ens) {
    ens.validate();
    if (ens.dim != 1) throw InputError("blob dynamics is one dimensional");
}

}  // namespace

void BlobConfig::validate() const {
    validate_law(law);
    power_law(law);
    kernel.validate();
    if (!kernel.free_space()) throw ConfigError("blob dynamics needs a free-space kernel");
    if (dt < 0.0 || !std::isfinite(dt)) throw ConfigError("blob dt must be nonnegative");
    if (eval_spacing < 0.0) throw ConfigError("eval spacing must be nonnegative");
    if (eval_spacing > mollifier.delta() / 4.0 * (1.0 + 1e-12))
        throw ConfigError("eval grid coarser than delta/4");
    if (!std::isfinite(interaction_weight)) throw ConfigError("interaction weight must be finite");
}

BlobModel::BlobModel(const BlobConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    rk_ = regularized_kernel(cfg_.kernel, cfg_.mollifier);
    const double delta = cfg_.mollifier.delta();
    const double spacing = cfg_.eval_spacing > 0.0 ? cfg_.eval_spacing : delta / 8.0;
    auto n = static_cast<long>(std::ceil(2.0 * delta / spacing - 1e-9));
    if (n % 2) ++n;
    const double h = 2.0 * delta / static_cast<double>(n);
    nodes_.resize(static_cast<std::size_t>(n + 1));
    node_weights_.resize(static_cast<std::size_t>(n + 1));
    // Nodes symmetric about 0 exactly: t_k = (k - n/2) h.
    for (long k = 0; k <= n; ++k) {
        nodes_[static_cast<std::size_t>(k)] = static_cast<double>(k - n / 2) * h;
        const double s = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        node_weights_[static_cast<std::size_t>(k)] = s * h / 3.0;
    }
}

std::vector<double> BlobModel::attraction(const ParticleEnsemble& ens) const {
    check_1d(ens);
    auto v = rk_.gradient_sum(ens.positions, ens.weight());
    for (double& x : v) x *= cfg_.interaction_weight;
    return v;
}

std::vector<double> BlobModel::repulsion(const ParticleEnsemble& ens) const {
    check_1d(ens);
    const auto& K = cfg_.mollifier;
    const double delta = K.delta();
    const double m = power_law(cfg_.law).m;
    const double w = ens.weight();
    std::vector<std::size_t> order;
    const auto xs = sorted_copy(ens.positions, &order);
    const std::size_t n = xs.size();
    const std::size_t nk = nodes_.size();
    const std::size_t mid = nk / 2;
    std::vector<double> kp(nk);
    for (std::size_t k = 0; k < nk; ++k) kp[k] = K.derivative(nodes_[k]);

    std::vector<double> mu(nk), out(n);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(mu.begin(), mu.end(), 0.0);
        while (xs[i] - xs[lo] >= 2.0 * delta) ++lo;
        for (std::size_t j = lo; j < n && xs[j] - xs[i] < 2.0 * delta; ++j) {
            const double d = xs[i] - xs[j];
            for (std::size_t k = 0; k < nk; ++k) mu[k] += K.value(d + nodes_[k]);
        }
        // int K'(t) f'(mu(x_i + t)) dt, pairing t and -t.
        double s = 0.0;
        for (std::size_t k = 0; k < mid; ++k) {
            const double pa = m / (m - 1.0) * std::pow(w * mu[k], m - 1.0);
            const double pb = m / (m - 1.0) * std::pow(w * mu[nk - 1 - k], m - 1.0);
            s += node_weights_[k] * kp[k] * (pa - pb);
        }
        out[order[i]] = s;
    }
    return out;
}

std::vector<double> BlobModel::velocity(const ParticleEnsemble& ens) const {
    auto v = repulsion(ens);
    if (cfg_.interaction_weight != 0.0) {
        const auto a = attraction(ens);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += a[i];
    }
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalError("non-finite blob velocity");
    return v;
}

double BlobModel::max_mollified_density(const ParticleEnsemble& ens) const {
    const auto& K = cfg_.mollifier;
    const double delta = K.delta();
    const auto xs = sorted_copy(ens.positions, nullptr);
    double best = 0.0;
    std::size_t lo = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        while (xs[i] - xs[lo] >= delta) ++lo;
        double s = 0.0;
        for (std::size_t j = lo; j < xs.size() && xs[j] - xs[i] < delta; ++j) s += K.value(xs[i] - xs[j]);
        best = std::max(best, s * ens.weight());
    }
    return best;
}

double BlobModel::stable_dt(const ParticleEnsemble& ens) const {
    const double delta = cfg_.mollifier.delta();
    const double rho = max_mollified_density(ens);
    const double stiff = rho > 0.0 ? f_second(cfg_.law, rho) * rho : 0.0;
    return 0.2 * delta * delta / std::max(1.0, stiff);
}

ParticleEnsemble BlobModel::step(const ParticleEnsemble& ens, double dt) const {
    if (!(dt > 0.0)) throw ConfigError("blob step needs dt > 0");
    ParticleEnsemble next = ens;
    const auto v = velocity(ens);
    for (std::size_t i = 0; i < v.size(); ++i) next.positions[i] += dt * v[i];
    if (cfg_.integrator == Integrator::Heun) {
        const auto v2 = velocity(next);
        for (std::size_t i = 0; i < v.size(); ++i) next.positions[i] = ens.positions[i] + 0.5 * dt * (v[i] + v2[i]);
    }
    for (double x : next.positions)
        if (!std::isfinite(x)) throw NumericalError("non-finite particle position after step");
    return next;
}

EnergyReport BlobModel::energy(const ParticleEnsemble& ens, double cross_check_spacing) const {
    check_1d(ens);
    const auto& K = cfg_.mollifier;
    const double delta = K.delta();
    const double w = ens.weight();
    const auto xs = sorted_copy(ens.positions, nullptr);
    const std::size_t n = xs.size();

    // f(K * rho_N) is smooth between consecutive points of {x_j +- delta}.
    std::vector<double> bp;
    bp.reserve(2 * n);
    for (double x : xs) {
        bp.push_back(x - delta);
        bp.push_back(x + delta);
    }
    std::sort(bp.begin(), bp.end());
    double ent = 0.0;
    std::size_t lo = 0, hi = 0;
    for (std::size_t l = 0; l + 1 < bp.size(); ++l) {
        const double a = bp[l], b = bp[l + 1];
        if (!(b > a)) continue;
        while (lo < n && xs[lo] + delta <= a) ++lo;
        while (hi < n && xs[hi] - delta < b) ++hi;
        ent += GL8::integrate(
            [&](double y) {
                double mu = 0.0;
                for (std::size_t j = lo; j < hi; ++j) mu += K.value(y - xs[j]);
                return f_eval(cfg_.law, w * mu);
            },
            a, b);
    }
    EnergyReport r;
    r.id = FunctionalId::E_delta;
    r.terms["entropy"] = ent;
    r.terms["interaction"] = -0.5 * cfg_.interaction_weight * rk_.pair_sum(ens.positions, w);
    r.sum_terms();
    if (cross_check_spacing > 0.0) r.cross_check = energy_on_grid(ens, cross_check_spacing).total;
    return r;
}

EnergyReport BlobModel::energy_on_grid(const ParticleEnsemble& ens, double spacing) const {
    check_1d(ens);
    const auto& K = cfg_.mollifier;
    const double delta = K.delta();
    const auto [mn, mx] = std::minmax_element(ens.positions.begin(), ens.positions.end());
    const double left = *mn - 2.0 * delta;
    auto cells = static_cast<std::size_t>(std::ceil((*mx + 2.0 * delta - left) / spacing));
    if (cells % 2) ++cells;
    const auto dens = mollify(ens, K, left, spacing, cells);

    // Entropy: Simpson on exact point values of K * rho_N.
    const auto xs = sorted_copy(ens.positions, nullptr);
    std::vector<double> fv(cells + 1);
    std::size_t lo = 0;
    for (std::size_t k = 0; k <= cells; ++k) {
        const double y = left + static_cast<double>(k) * spacing;
        while (lo < xs.size() && xs[lo] + delta <= y) ++lo;
        double mu = 0.0;
        for (std::size_t j = lo; j < xs.size() && xs[j] - delta < y; ++j) mu += K.value(y - xs[j]);
        fv[k] = f_eval(cfg_.law, mu * ens.weight());
    }
    EnergyReport r;
    r.id = FunctionalId::E_f;
    r.terms["entropy"] = simpson(fv, spacing);
    const ExpConvolution conv(cfg_.kernel, spacing);
    const auto a = conv.apply(dens.values);
    double inter = 0.0;
    for (std::size_t i = 0; i < cells; ++i) inter += dens.values[i] * a[i];
    r.terms["interaction"] = -0.5 * cfg_.interaction_weight * inter;
    r.sum_terms();
    return r;
}

std::vector<double> blob_velocity(const ParticleEnsemble& ens, const BlobConfig& cfg) {
    return BlobModel(cfg).velocity(ens);
}

ParticleEnsemble blob_step(const ParticleEnsemble& ens, const BlobConfig& cfg) {
    const BlobModel model(cfg);
    return model.step(ens, cfg.dt > 0.0 ? cfg.dt : model.stable_dt(ens));
}

EnergyReport empirical_energy(const ParticleEnsemble& ens, const BlobConfig& cfg) {
    return BlobModel(cfg).energy(ens);
}

double second_moment(const ParticleEnsemble& ens) {
    ens.validate();
    double s = 0.0;
    for (double x : ens.positions) s += x * x;
    return s * ens.weight();
}

BlobTrajectory blob_simulate(const BlobConfig& cfg, const ParticleEnsemble& initial, double T,
                             const std::vector<double>& sample_times, std::size_t energy_every) {
    if (!(T > 0.0)) throw ConfigError("simulation horizon must be positive");
    const BlobModel model(cfg);
    check_1d(initial);
    if (cfg.dt > 0.0 && cfg.dt > model.stable_dt(initial) * (1.0 + 1e-12))
        throw ConfigError("blob dt exceeds the stability bound 0.2 delta^2 / max(1, f''(rho) rho)");

    std::vector<double> targets;
    for (double t : sample_times)
        if (t > 0.0 && t < T) targets.push_back(t);
    targets.push_back(T);
    std::sort(targets.begin(), targets.end());

    BlobTrajectory tr;
    ParticleEnsemble cur = initial;
    double t = 0.0;
    auto sample = [&]() {
        tr.times.push_back(t);
        tr.states.push_back(cur);
        tr.energies.push_back(model.energy(cur));
        tr.second_moments.push_back(second_moment(cur));
    };
    sample();
    if (energy_every > 0) tr.step_energy.push_back(tr.energies.back().total);
    for (double target : targets) {
        while (t < target - 1e-14 * std::max(1.0, target)) {
            double dt = cfg.dt > 0.0 ? cfg.dt : model.stable_dt(cur);
            if (t + dt > target) dt = target - t;
            cur = model.step(cur, dt);
            t = (t + dt > target - 1e-14 * std::max(1.0, target)) ? target : t + dt;
            ++tr.steps;
            tr.step_dt.push_back(dt);
            if (energy_every > 0 && tr.steps % energy_every == 0) tr.step_energy.push_back(model.energy(cur).total);
        }
        sample();
    }
    return tr;
}

double fitted_contraction_rate(const std::vector<double>& times, const std::vector<double>& d) {
    if (times.size() != d.size() || d.empty() || !(d[0] > 0.0)) throw InputError("contraction fit needs a positive series");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) {
        if (!(d[i] > 0.0)) continue;
        const double t = times[i] - times[0];
        num += t * std::log(d[i] / d[0]);
        den += t * t;
    }
    return den > 0.0 ? -num / den : 0.0;
}

}  // namespace aggdiff
