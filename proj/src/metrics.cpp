#include "aggdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "aggdiff/errors.hpp"

namespace aggdiff {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string functional_name(FunctionalId id) {
    switch (id) {
        case FunctionalId::E_f: return "E_f";
        case FunctionalId::E_delta: return "E_delta";
        case FunctionalId::J_eps: return "J_eps";
        case FunctionalId::G_eps: return "G_eps";
        case FunctionalId::G_eta_eps: return "G_eta_eps";
    }
    return "unknown";
}

double EnergyReport::relative_route_gap() const {
    if (!cross_check) return 0.0;
    const double scale = std::max(std::abs(total), std::abs(*cross_check));
    return scale > 0.0 ? std::abs(total - *cross_check) / scale : 0.0;
}

void EnergyReport::sum_terms() {
    total = 0.0;
    for (const auto& [k, v] : terms) total += v;
}

// ------------------------------------------------------------ Wasserstein

namespace {

// Quantile function as linear pieces X(u) on [u0, u1].
struct QuantilePiece {
    double u0, u1, x0, x1;
};

std::vector<QuantilePiece> quantiles(const GridField& f) {
    const double m = f.mass();
    if (!(m > 0.0)) throw InputError("wasserstein1d: zero-mass field");
    std::vector<QuantilePiece> out;
    double c = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.values[i] < 0.0) throw InputError("wasserstein1d: negative density");
        if (f.values[i] == 0.0) continue;
        const double c1 = c + f.values[i] * f.dx / m;
        const double a = f.x_left + static_cast<double>(i) * f.dx;
        out.push_back({c, c1, a, a + f.dx});
        c = c1;
    }
    out.back().u1 = 1.0;
    return out;
}

std::vector<QuantilePiece> quantiles(const ParticleEnsemble& e) {
    if (e.positions.empty()) throw InputError("wasserstein1d: empty ensemble");
    if (e.dim != 1) throw InputError("wasserstein1d: ensembles must be 1D");
    std::vector<double> x = e.positions;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    std::vector<QuantilePiece> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = {static_cast<double>(i) / n, static_cast<double>(i + 1) / n, x[i], x[i]};
    out.back().u1 = 1.0;
    return out;
}

double at(const QuantilePiece& p, double u) {
    if (p.u1 <= p.u0) return p.x0;
    return p.x0 + (p.x1 - p.x0) * (u - p.u0) / (p.u1 - p.u0);
}

double w2(const std::vector<QuantilePiece>& a, const std::vector<QuantilePiece>& b) {
    std::size_t i = 0, j = 0;
    double u = 0.0, s = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i].u1, b[j].u1);
        if (v > u) {
            const double da = at(a[i], u) - at(b[j], u);
            const double db = at(a[i], v) - at(b[j], v);
            s += (v - u) * (da * da + da * db + db * db) / 3.0;
            u = v;
        }
        if (a[i].u1 <= v) ++i;
        if (j < b.size() && b[j].u1 <= v) ++j;
    }
    return std::sqrt(std::max(0.0, s));
}

}  // namespace

double wasserstein1d(const GridField& mu, const GridField& nu) { return w2(quantiles(mu), quantiles(nu)); }
double wasserstein1d(const ParticleEnsemble& mu, const ParticleEnsemble& nu) {
    return w2(quantiles(mu), quantiles(nu));
}
double wasserstein1d(const ParticleEnsemble& mu, const GridField& nu) { return w2(quantiles(mu), quantiles(nu)); }
double wasserstein1d(const GridField& mu, const ParticleEnsemble& nu) { return w2(quantiles(mu), quantiles(nu)); }

// --------------------------------------------------------------- energies

EnergyReport energy_E_f(const GridField& field, const PressureLaw& law, const InteractionKernel& kernel) {
    EnergyReport r;
    r.id = FunctionalId::E_f;
    double ent = 0.0;
    for (double v : field.values) ent += f_eval(law, v);
    ent *= field.dx;
    const ExpConvolution conv(kernel, field.dx);
    const auto a = conv.apply(field.values);
    double inter = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) inter += field.values[i] * a[i];
    r.terms["entropy"] = ent;
    r.terms["interaction"] = -0.5 * inter;
    r.sum_terms();
    return r;
}

namespace {

struct InteractionRoutes {
    double double_integral;
    double mismatch;   // (1/(2 sigma)) int (rho - sigma phi)^2
    double dirichlet;  // (eta eps^2 / 2) int |phi'|^2
};

InteractionRoutes interaction_routes(const GridField& field, const InteractionKernel& k) {
    const ExpConvolution conv(k, field.dx);
    const auto& rho = field.values;
    const auto a = conv.apply(rho);
    const double sigma = k.sigma;
    double sq = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        sq += rho[i] * rho[i];
        cross += rho[i] * a[i];
    }
    InteractionRoutes r{};
    r.double_integral = sq * field.dx / (2.0 * sigma) - 0.5 * cross;

    const auto p = conv.profile(rho);
    const double kk = conv.rate();
    const double h = field.dx;
    const double q = conv.q();
    const double one_minus_q2 = -std::expm1(-2.0 * kk * h);
    const double even = one_minus_q2 / (2.0 * kk);
    double mis = 0.0, dir = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double al = p.alpha[i], be = p.beta[i];
        const double sq_part = (al * al + be * be) * even;
        const double mix = 2.0 * al * be * h * q;
        mis += 0.5 * sigma * (sq_part + mix);
        dir += 0.5 * sigma * (sq_part - mix);
    }
    // Exterior tails: phi decays like exp(-k|x|) and rho = 0 there.
    const double tails = sigma * (p.left_face * p.left_face + p.right_face * p.right_face) / (4.0 * kk);
    r.mismatch = mis + tails;
    r.dirichlet = dir + tails;
    return r;
}

bool any_above_one(const GridField& f) {
    return std::any_of(f.values.begin(), f.values.end(), [](double v) { return v > 1.0; });
}

}  // namespace

EnergyReport energy_J_eps(const GridField& field, const DoubleWell& dw, const InteractionKernel& kernel,
                          double eps) {
    if (!(eps > 0.0)) throw ConfigError("energy needs eps > 0");
    for (double v : field.values)
        if (!(v >= 0.0)) throw InputError("energy: density must be nonnegative");
    EnergyReport r;
    r.id = FunctionalId::J_eps;
    if (std::holds_alternative<HardSphere>(dw.law) && any_above_one(field)) {
        r.terms["double_well"] = kInf;
        r.terms["interaction"] = 0.0;
        r.total = kInf;
        return r;
    }
    const auto k = kernel.rescaled(eps);
    double well = 0.0;
    for (double v : field.values) well += h_eval(dw, v);
    well *= field.dx;
    const auto routes = interaction_routes(field, k);
    r.terms["double_well"] = well;
    r.terms["interaction"] = routes.double_integral;
    r.sum_terms();
    r.cross_check = well + routes.mismatch + routes.dirichlet;
    r.details["mismatch"] = routes.mismatch;
    r.details["dirichlet_like"] = routes.dirichlet;
    return r;
}

EnergyReport energy_G_eps(const GridField& field, const DoubleWell& dw, const InteractionKernel& kernel,
                          double eps) {
    EnergyReport r = energy_J_eps(field, dw, kernel, eps);
    r.id = FunctionalId::G_eps;
    for (auto& [key, v] : r.terms) v /= eps;
    for (auto& [key, v] : r.details) v /= eps;
    r.total /= eps;
    if (r.cross_check) *r.cross_check /= eps;
    const double well = r.terms["double_well"];
    r.divergent = std::isfinite(well) && well > 10.0 * std::abs(r.terms["interaction"]);
    return r;
}

EnergyReport energy_G_eta_eps(const GridField& field, const DoubleWell& dw, const InteractionKernel& kernel,
                              double eps, double eta_w) {
    if (!std::holds_alternative<HardSphere>(dw.law)) throw ConfigError("wall-weighted energy needs the hard-sphere law");
    if (!(eps > 0.0)) throw ConfigError("energy needs eps > 0");
    EnergyReport r;
    r.id = FunctionalId::G_eta_eps;
    if (eta_w < 0.0 || eta_w > 0.5) r.details["eta_outside_proof_range"] = 1.0;
    if (any_above_one(field)) {
        r.terms["bulk"] = kInf;
        r.terms["boundary"] = 0.0;
        r.total = kInf;
        return r;
    }
    const auto k = kernel.rescaled(eps);
    const ExpConvolution conv(k, field.dx);
    const auto a = conv.apply(field.values);
    const auto t = conv.outside_mass(field.size());
    double lin = 0.0, self = 0.0, wall = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double v = field.values[i];
        if (v < 0.0) throw InputError("energy: density must be nonnegative");
        lin += v * field.dx / (2.0 * k.sigma);
        self += v * a[i];
        wall += v * t[i];
    }
    r.terms["bulk"] = (lin - 0.5 * self - 0.5 * wall) / eps;
    r.terms["boundary"] = (0.5 - eta_w) * wall / eps;
    r.details["wall_integral"] = wall / eps;
    r.sum_terms();
    return r;
}

// --------------------------------------------------------- contact angles

double contact_angle(const RobinBC& bc, double sigma) {
    bc.validate();
    if (!(sigma > 0.0)) throw ConfigError("contact angle needs sigma > 0");
    const double c = -std::min(1.0, 2.0 * bc.a / (bc.a + std::sqrt(sigma) * bc.b));
    if (c == 0.0) return std::numbers::pi / 2.0;
    if (c == -1.0) return std::numbers::pi;
    return std::acos(c);
}

double contact_angle(double eta_w) {
    const double c = std::clamp(2.0 * eta_w - 1.0, -1.0, 1.0);
    if (c == 0.0) return std::numbers::pi / 2.0;
    if (c == -1.0) return std::numbers::pi;
    return std::acos(c);
}

// ------------------------------------------------------------- interfaces

namespace {

double level_point(const GridField& f, std::size_t i, std::size_t j, double level) {
    const double vi = f.values[i], vj = f.values[j];
    const double t = vj == vi ? 0.5 : (level - vi) / (vj - vi);
    return f.center(i) + t * (f.center(j) - f.center(i));
}

}  // namespace

InterfaceDiagnostics interface_diagnostics(const GridField& f, const DoubleWell& dw) {
    InterfaceDiagnostics d;
    const double th = dw.theta;
    const double half = 0.5 * th, lo = 0.1 * th, hi = 0.9 * th;
    const std::size_t n = f.size();
    if (n < 2) return d;

    double width_sum = 0.0;
    std::size_t width_count = 0;
    std::vector<std::size_t> cross_cells;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a = f.values[i] - half, b = f.values[i + 1] - half;
        if (!((a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0))) continue;
        d.positions.push_back(level_point(f, i, i + 1, half));
        cross_cells.push_back(i);
        const bool rising = b >= 0.0;
        // Walk towards the low side for the 0.1 theta crossing, towards the
        // high side for 0.9 theta.
        std::optional<double> x_lo, x_hi;
        if (rising) {
            for (std::size_t j = i + 1; j-- > 0;)
                if (f.values[j] <= lo) { x_lo = level_point(f, j, j + 1, lo); break; }
            for (std::size_t j = i + 1; j < n; ++j)
                if (f.values[j] >= hi) { x_hi = level_point(f, j - 1, j, hi); break; }
        } else {
            for (std::size_t j = i + 1; j < n; ++j)
                if (f.values[j] <= lo) { x_lo = level_point(f, j - 1, j, lo); break; }
            for (std::size_t j = i + 1; j-- > 0;)
                if (f.values[j] >= hi) { x_hi = level_point(f, j, j + 1, hi); break; }
        }
        if (x_lo && x_hi) {
            width_sum += std::abs(*x_hi - *x_lo);
            ++width_count;
        }
    }
    d.perimeter_count = d.positions.size();
    if (width_count > 0) d.width = width_sum / static_cast<double>(width_count);

    if (f.max_value() < hi) return d;
    // Bulk cells: above theta/2 and away from every crossing.
    const double margin = std::max(3.0 * f.dx, 2.0 * d.width.value_or(0.0));
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (f.values[i] < half) continue;
        bool near = false;
        for (double x : d.positions)
            if (std::abs(f.center(i) - x) < margin) { near = true; break; }
        if (near) continue;
        s += f.values[i];
        ++cnt;
    }
    if (cnt == 0) {
        for (double v : f.values)
            if (v >= half) { s += v; ++cnt; }
    }
    if (cnt > 0) d.plateau_value = s / static_cast<double>(cnt);
    return d;
}

// ------------------------------------------------------------ dissipation

DissipationResult dissipation_check(const std::vector<double>& series, double tol) {
    return dissipation_check(series, std::vector<double>(series.size(), tol));
}

DissipationResult dissipation_check(const std::vector<double>& series, const std::vector<double>& tol) {
    if (series.size() < 2) throw InputError("dissipation_check needs at least two values");
    DissipationResult r;
    for (std::size_t k = 1; k < series.size(); ++k) {
        const double inc = series[k] - series[k - 1];
        if (inc > r.worst_increase) {
            r.worst_increase = inc;
            r.worst_index = k;
        }
        if (inc > tol[std::min(k, tol.size() - 1)]) r.pass = false;
    }
    return r;
}

double entropy(const GridField& f) {
    double s = 0.0;
    for (double v : f.values)
        if (v > 0.0) s += v * std::log(v);
    return s * f.dx;
}

}  // namespace aggdiff
