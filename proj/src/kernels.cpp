#include "aggdiff/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numeric>

#include "aggdiff/errors.hpp"

namespace aggdiff {

namespace {

using GL8 = boost::math::quadrature::gauss<double, 8>;
using GL20 = boost::math::quadrature::gauss<double, 20>;

// x - (1 - exp(-x)), accurate for small x.
double x_minus_one_minus_exp(double x) {
    if (x < 1e-3) return x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)));
    return x + std::expm1(-x);
}

}  // namespace

// ---------------------------------------------------------------- kernel

void InteractionKernel::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel sigma must be positive");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("kernel eta must be positive");
    if (!(scale_eps > 0.0) || !std::isfinite(scale_eps)) throw ConfigError("kernel scale_eps must be positive");
    if (auto* b = std::get_if<BoundedInterval>(&domain); b && !(b->right > b->left))
        throw ConfigError("bounded kernel domain needs right > left");
}

double InteractionKernel::decay_rate() const { return std::sqrt(sigma / eta) / scale_eps; }

double InteractionKernel::amplitude() const { return 1.0 / (2.0 * std::sqrt(sigma * eta) * scale_eps); }

InteractionKernel InteractionKernel::rescaled(double eps) const {
    InteractionKernel k = *this;
    k.scale_eps = eps;
    return k;
}

double green_eval(const InteractionKernel& kernel, double x) {
    if (!std::isfinite(x)) throw InputError("green_eval: non-finite argument");
    if (!kernel.free_space()) throw ConfigError("green_eval needs a free-space kernel");
    return kernel.amplitude() * std::exp(-kernel.decay_rate() * std::abs(x));
}

double green_derivative(const InteractionKernel& kernel, double x) {
    if (!std::isfinite(x)) throw InputError("green_derivative: non-finite argument");
    if (x == 0.0) return 0.0;
    const double g = kernel.amplitude() * std::exp(-kernel.decay_rate() * std::abs(x));
    return -std::copysign(kernel.decay_rate() * g, x);
}

double green_tail_mass(const InteractionKernel& kernel, double x) {
    if (x < 0.0) return 1.0 / kernel.sigma - green_tail_mass(kernel, -x);
    return std::exp(-kernel.decay_rate() * x) / (2.0 * kernel.sigma);
}

double truncation_length(const InteractionKernel& kernel, double tol) {
    return kernel.scale_eps * std::sqrt(kernel.eta / kernel.sigma) * std::log(1.0 / tol);
}

KernelTable tabulate_green(const InteractionKernel& kernel, double spacing) {
    kernel.validate();
    if (!(spacing > 0.0)) throw ConfigError("table spacing must be positive");
    const double L = truncation_length(kernel);
    const auto half = static_cast<std::size_t>(std::ceil(L / spacing));
    KernelTable t;
    t.x.resize(2 * half + 1);
    t.value.resize(2 * half + 1);
    for (std::size_t i = 0; i <= 2 * half; ++i) {
        const double x = (static_cast<double>(i) - static_cast<double>(half)) * spacing;
        t.x[i] = x;
        t.value[i] = green_eval(kernel, x);
    }
    return t;
}

double simpson(const std::vector<double>& v, double h) {
    const std::size_t n = v.size();
    if (n < 3 || n % 2 == 0) throw InputError("simpson needs an odd number of nodes >= 3");
    double s = v.front() + v.back();
    for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * v[i];
    return s * h / 3.0;
}

// ------------------------------------------------------------- mollifier

Mollifier::Mollifier(double delta, MollifierShape shape) : delta_(delta), shape_(shape) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("mollifier delta must be positive");
    norm_ = shape == MollifierShape::SmoothBump ? 15.0 / (16.0 * delta) : 1.0 / (2.0 * delta);
}

double Mollifier::value(double x) const {
    const double u = x / delta_;
    if (std::abs(u) >= 1.0) return 0.0;
    if (shape_ == MollifierShape::IndicatorBall) return norm_;
    const double s = 1.0 - u * u;
    return norm_ * s * s;
}

double Mollifier::derivative(double x) const {
    if (shape_ == MollifierShape::IndicatorBall) return 0.0;
    const double u = x / delta_;
    if (std::abs(u) >= 1.0) return 0.0;
    return -4.0 * norm_ * u * (1.0 - u * u) / delta_;
}

double Mollifier::primitive(double x) const {
    const double u = x / delta_;
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return 1.0;
    if (shape_ == MollifierShape::IndicatorBall) return 0.5 * (u + 1.0);
    const double u2 = u * u;
    return delta_ * norm_ * (u * (1.0 - u2 * (2.0 / 3.0 - u2 / 5.0)) + 8.0 / 15.0);
}

double Mollifier::second_primitive(double x) const {
    const double u = x / delta_;
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return x;
    if (shape_ == MollifierShape::IndicatorBall) return 0.25 * delta_ * (u + 1.0) * (u + 1.0);
    const double u2 = u * u;
    return delta_ * delta_ * norm_ *
           (u2 * (0.5 - u2 * (1.0 / 6.0 - u2 / 30.0)) + 8.0 * u / 15.0 + 1.0 / 6.0);
}

GridField mollify(const GridField& density, const Mollifier& mollifier) {
    const std::size_t n = density.size();
    if (n == 0) throw InputError("mollify: empty field");
    const double h = density.dx;
    const auto K = static_cast<long>(std::ceil(mollifier.delta() / h)) + 1;
    std::vector<double> w(static_cast<std::size_t>(2 * K + 1));
    for (long k = -K; k <= K; ++k) {
        const double c = static_cast<double>(k) * h;
        w[static_cast<std::size_t>(k + K)] =
            (mollifier.second_primitive(c + h) - 2.0 * mollifier.second_primitive(c) +
             mollifier.second_primitive(c - h)) /
            h;
    }
    const bool reflect = density.bc == Boundary::NoFlux;
    const long N = static_cast<long>(n);
    GridField out = density.zeros_like();
    for (long i = 0; i < N; ++i) {
        double s = 0.0;
        for (long k = -K; k <= K; ++k) {
            long j = i - k;
            if (reflect) {
                // Repeated reflection handles kernels wider than the grid.
                while (j < 0 || j >= N) j = j < 0 ? -1 - j : 2 * N - 1 - j;
            } else if (j < 0 || j >= N) {
                continue;
            }
            s += w[static_cast<std::size_t>(k + K)] * density.values[static_cast<std::size_t>(j)];
        }
        out.values[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

GridField mollify(const ParticleEnsemble& ens, const Mollifier& mollifier, double x_left, double dx,
                  std::size_t cells) {
    if (ens.positions.empty()) throw InputError("mollify: empty ensemble");
    ens.validate();
    if (ens.dim != 1) throw InputError("mollify: particle input must be 1D");
    if (dx > mollifier.delta() / 4.0 * (1.0 + 1e-12))
        throw ConfigError("mollify: grid spacing must not exceed delta/4");
    GridField out = GridField::zeros(x_left, x_left + dx * static_cast<double>(cells), cells,
                                     Boundary::WholeLineTruncated);
    out.dx = dx;
    const double w = ens.weight();
    const double d = mollifier.delta();
    for (std::size_t p = 0; p < ens.count(); ++p) {
        const double xp = ens.coord(p);
        const double lo = std::floor((xp - d - x_left) / dx);
        const double hi = std::ceil((xp + d - x_left) / dx);
        const long i0 = std::max(0L, static_cast<long>(lo));
        const long i1 = std::min(static_cast<long>(cells) - 1, static_cast<long>(hi));
        for (long i = i0; i <= i1; ++i) {
            const double a = x_left + static_cast<double>(i) * dx;
            out.values[static_cast<std::size_t>(i)] +=
                w * (mollifier.primitive(a + dx - xp) - mollifier.primitive(a - xp)) / dx;
        }
    }
    return out;
}

GridField mollify(const ParticleEnsemble& ens, const Mollifier& mollifier) {
    if (ens.positions.empty()) throw InputError("mollify: empty ensemble");
    const auto [lo, hi] = std::minmax_element(ens.positions.begin(), ens.positions.end());
    const double dx = mollifier.delta() / 8.0;
    const double left = *lo - 2.0 * mollifier.delta();
    const auto cells = static_cast<std::size_t>(std::ceil((*hi + 2.0 * mollifier.delta() - left) / dx));
    return mollify(ens, mollifier, left, dx, cells);
}

// ------------------------------------------------------- regularized kernel

namespace {

// K * K at y, exact for polynomial mollifiers.
double self_convolution(const Mollifier& m, double y) {
    const double d = m.delta();
    const double a = std::max(-d, y - d);
    const double b = std::min(d, y + d);
    if (b <= a) return 0.0;
    return GL8::integrate([&](double z) { return m.value(z) * m.value(y - z); }, a, b);
}

// Integral of f over [a, b] split into panels no longer than len.
template <class F>
double panel_integrate(F&& f, double a, double b, double len) {
    if (b <= a) return 0.0;
    const auto panels = static_cast<int>(std::ceil((b - a) / len));
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) s += GL20::integrate(f, a + p * h, a + (p + 1) * h);
    return s;
}

}  // namespace

RegularizedKernel regularized_kernel(const InteractionKernel& kernel, const Mollifier& mollifier,
                                     double spacing) {
    kernel.validate();
    if (!kernel.free_space()) throw ConfigError("regularized_kernel needs a free-space kernel");
    const double d = mollifier.delta();
    if (spacing <= 0.0) spacing = d / 64.0;
    if (spacing > d / 8.0 * (1.0 + 1e-12)) throw ConfigError("regularized kernel table coarser than delta/8");

    RegularizedKernel rk;
    rk.kernel_ = kernel;
    rk.delta_ = d;
    // Even node count across [0, 2 delta] keeps 0, delta and 2 delta on nodes.
    auto cells = static_cast<std::size_t>(std::ceil(2.0 * d / spacing));
    if (cells % 2) ++cells;
    rk.h_ = 2.0 * d / static_cast<double>(cells);

    const double k = kernel.decay_rate();
    const double amp = kernel.amplitude();
    const double panel = std::min(0.5 * d, 1.0 / k);
    const double lap = panel_integrate([&](double y) { return mollifier.value(y) * std::exp(k * y); }, -d, d, panel);
    rk.far_ = lap * lap;

    const double diff = kernel.eta * kernel.scale_eps * kernel.scale_eps;
    rk.v_.resize(cells + 1);
    rk.d1_.resize(cells + 1);
    rk.d2_.resize(cells + 1);
    for (std::size_t n = 0; n <= cells; ++n) {
        const double x = static_cast<double>(n) * rk.h_;
        auto val = [&](double y) { return self_convolution(mollifier, y) * amp * std::exp(-k * std::abs(x - y)); };
        auto der = [&](double y) {
            const double z = x - y;
            const double g = amp * std::exp(-k * std::abs(z));
            return self_convolution(mollifier, y) * (z > 0 ? -k * g : k * g);
        };
        double v = 0.0, g1 = 0.0;
        const double cuts[4] = {-2.0 * d, 0.0, x, 2.0 * d};
        for (int p = 0; p < 3; ++p) {
            v += panel_integrate(val, cuts[p], cuts[p + 1], panel);
            g1 += panel_integrate(der, cuts[p], cuts[p + 1], panel);
        }
        rk.v_[n] = v;
        rk.d1_[n] = n == 0 ? 0.0 : g1;
        rk.d2_[n] = (kernel.sigma * v - self_convolution(mollifier, x)) / diff;
    }
    return rk;
}

namespace {

inline double hermite(double t, double h, double v0, double v1, double s0, double s1) {
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * h * s0 + (-2 * t3 + 3 * t2) * v1 +
           (t3 - t2) * h * s1;
}

}  // namespace

double RegularizedKernel::value(double x) const {
    const double a = std::abs(x);
    if (a >= 2.0 * delta_) return far_ * kernel_.amplitude() * std::exp(-kernel_.decay_rate() * a);
    const auto n = std::min(static_cast<std::size_t>(a / h_), v_.size() - 2);
    const double t = a / h_ - static_cast<double>(n);
    return hermite(t, h_, v_[n], v_[n + 1], d1_[n], d1_[n + 1]);
}

double RegularizedKernel::derivative(double x) const {
    const double a = std::abs(x);
    if (a == 0.0) return 0.0;
    double g;
    if (a >= 2.0 * delta_) {
        g = -kernel_.decay_rate() * far_ * kernel_.amplitude() * std::exp(-kernel_.decay_rate() * a);
    } else {
        const auto n = std::min(static_cast<std::size_t>(a / h_), v_.size() - 2);
        const double t = a / h_ - static_cast<double>(n);
        g = hermite(t, h_, d1_[n], d1_[n + 1], d2_[n], d2_[n + 1]);
    }
    return x > 0 ? g : -g;
}

std::vector<double> RegularizedKernel::gradient_sum(const std::vector<double>& x, double w) const {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = x[idx[i]];

    const double k = kernel_.decay_rate();
    const double fa = far_ * kernel_.amplitude();
    std::vector<double> left(n, 0.0), right(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) left[i] = std::exp(-k * (xs[i] - xs[i - 1])) * (left[i - 1] + w);
    for (std::size_t i = n - 1; i-- > 0;) right[i] = std::exp(-k * (xs[i + 1] - xs[i])) * (right[i + 1] + w);

    const double reach = 2.0 * delta_;
    std::vector<double> out(n);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = k * fa * (right[i] - left[i]);
        while (xs[i] - xs[lo] >= reach) ++lo;
        for (std::size_t j = lo; j < n && xs[j] - xs[i] < reach; ++j) {
            if (j == i) continue;
            const double dd = xs[i] - xs[j];
            const double e = fa * std::exp(-k * std::abs(dd));
            const double farpart = j < i ? -k * e : k * e;
            s += w * (derivative(dd) - farpart);
        }
        out[idx[i]] = s;
    }
    return out;
}

double RegularizedKernel::pair_sum(const std::vector<double>& x, double w) const {
    const std::size_t n = x.size();
    std::vector<double> xs = x;
    std::sort(xs.begin(), xs.end());
    const double k = kernel_.decay_rate();
    const double fa = far_ * kernel_.amplitude();
    std::vector<double> left(n, 0.0), right(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) left[i] = std::exp(-k * (xs[i] - xs[i - 1])) * (left[i - 1] + w);
    for (std::size_t i = n - 1; i-- > 0;) right[i] = std::exp(-k * (xs[i + 1] - xs[i])) * (right[i + 1] + w);
    const double reach = 2.0 * delta_;
    const double self = value(0.0);
    double total = 0.0;
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = fa * (left[i] + right[i]) + w * self;
        while (xs[i] - xs[lo] >= reach) ++lo;
        for (std::size_t j = lo; j < n && xs[j] - xs[i] < reach; ++j) {
            if (j == i) continue;
            const double dd = xs[i] - xs[j];
            s += w * (value(dd) - fa * std::exp(-k * std::abs(dd)));
        }
        total += w * s;
    }
    return total;
}

std::vector<double> RegularizedKernel::gradient_sum_direct(const std::vector<double>& x, double w) const {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) out[i] += w * derivative(x[i] - x[j]);
    return out;
}

double RegularizedKernel::pair_sum_direct(const std::vector<double>& x, double w) const {
    double s = 0.0;
    for (double xi : x)
        for (double xj : x) s += w * w * value(xi - xj);
    return s;
}

// ------------------------------------------------------ cell convolution

ExpConvolution::ExpConvolution(const InteractionKernel& kernel, double dx) {
    kernel.validate();
    if (!(dx > 0.0)) throw ConfigError("cell convolution needs dx > 0");
    sigma_ = kernel.sigma;
    k_ = kernel.decay_rate();
    c_ = kernel.amplitude();
    dx_ = dx;
    const double x = k_ * dx;
    q_ = std::exp(-x);
    omq_ = -std::expm1(-x);
    a0_ = 2.0 * c_ / (k_ * k_) * x_minus_one_minus_exp(x);
    coef_ = c_ * omq_ * omq_ / (k_ * k_);
}

double ExpConvolution::off_diagonal(std::size_t n) const {
    if (n == 0) return a0_;
    return coef_ * std::pow(q_, static_cast<double>(n - 1));
}

std::vector<double> ExpConvolution::apply(const std::vector<double>& rho) const {
    const std::size_t n = rho.size();
    std::vector<double> out(n);
    double L = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a0_ * rho[i] + coef_ * L;
        L = q_ * L + rho[i];
    }
    double R = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        out[i] += coef_ * R;
        R = q_ * R + rho[i];
    }
    return out;
}

std::vector<double> ExpConvolution::outside_mass(std::size_t cells) const {
    std::vector<double> t(cells);
    const double base = c_ * omq_ / (k_ * k_);
    double ql = 1.0;
    for (std::size_t i = 0; i < cells; ++i) {
        t[i] = base * ql;
        ql *= q_;
    }
    double qr = 1.0;
    for (std::size_t i = cells; i-- > 0;) {
        t[i] += base * qr;
        qr *= q_;
    }
    return t;
}

ExpConvolution::Profile ExpConvolution::profile(const std::vector<double>& rho) const {
    const std::size_t n = rho.size();
    Profile p;
    p.alpha.resize(n);
    p.beta.resize(n);
    const double face = c_ / k_ * omq_;
    const double half = c_ / k_;
    double L = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p.alpha[i] = face * L - rho[i] * half;
        L = q_ * L + rho[i];
    }
    double R = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        p.beta[i] = face * R - rho[i] * half;
        R = q_ * R + rho[i];
    }
    if (n > 0) {
        p.left_face = rho[0] / sigma_ + p.alpha[0] + p.beta[0] * q_;
        p.right_face = rho[n - 1] / sigma_ + p.alpha[n - 1] * q_ + p.beta[n - 1];
    }
    return p;
}

// ------------------------------------------------------------ Robin solves

void RobinBC::validate() const {
    if (a < 0.0 || b < 0.0 || !std::isfinite(a) || !std::isfinite(b))
        throw ConfigError("Robin coefficients must be finite and nonnegative");
    if (!(a + b > 0.0)) throw ConfigError("Robin condition with a = b = 0 is invalid");
}

void solve_tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                       std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

namespace {

struct RobinSystem {
    std::vector<double> lower, diag, upper, rhs;
};

// Rows scaled by 1/dx: sigma*u_i + (D/dx^2)(2u_i - u_{i-1} - u_{i+1}) = src_i,
// with boundary rows using a*u_b + eps*b*du/dn = a*g at the faces.
RobinSystem robin_system(const std::vector<double>& src, double dx, const InteractionKernel& kernel,
                         double eps, const RobinBC& bc, double g) {
    const std::size_t n = src.size();
    const double D = kernel.eta * eps * eps / (dx * dx);
    const double beta = 2.0 * eps * bc.b / dx;
    const double wb = 2.0 * bc.a / (bc.a + beta);
    RobinSystem s;
    s.lower.assign(n, -D);
    s.upper.assign(n, -D);
    s.diag.assign(n, kernel.sigma + 2.0 * D);
    s.rhs = src;
    s.lower[0] = 0.0;
    s.upper[n - 1] = 0.0;
    s.diag[0] += D * (wb - 1.0);
    s.diag[n - 1] += D * (wb - 1.0);
    s.rhs[0] += D * wb * g;
    s.rhs[n - 1] += D * wb * g;
    return s;
}

}  // namespace

GridField solve_potential(const GridField& rho, const InteractionKernel& kernel, double eps,
                          const RobinBC& bc) {
    kernel.validate();
    bc.validate();
    if (!(eps > 0.0)) throw ConfigError("solve_potential needs eps > 0");
    if (rho.size() == 0) throw InputError("solve_potential: empty field");
    for (double v : rho.values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("solve_potential: density must be nonnegative");
    auto s = robin_system(rho.values, rho.dx, kernel, eps, bc, 0.0);
    solve_tridiagonal(s.lower, s.diag, s.upper, s.rhs);
    GridField phi = rho;
    phi.values = std::move(s.rhs);
    return phi;
}

GridField tau_field(const InteractionKernel& kernel, double eps, const RobinBC& bc, double left,
                    double right, std::size_t cells) {
    kernel.validate();
    bc.validate();
    if (!(eps > 0.0)) throw ConfigError("tau_field needs eps > 0");
    GridField tau = GridField::zeros(left, right, cells);
    auto s = robin_system(tau.values, tau.dx, kernel, eps, bc, 1.0 / kernel.sigma);
    solve_tridiagonal(s.lower, s.diag, s.upper, s.rhs);
    tau.values = std::move(s.rhs);
    return tau;
}

double potential_residual(const GridField& rho, const GridField& phi, const InteractionKernel& kernel,
                          double eps, const RobinBC& bc, double boundary_value) {
    auto s = robin_system(rho.values, rho.dx, kernel, eps, bc, boundary_value);
    const std::size_t n = rho.size();
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double lhs = s.diag[i] * phi.values[i];
        if (i > 0) lhs += s.lower[i] * phi.values[i - 1];
        if (i + 1 < n) lhs += s.upper[i] * phi.values[i + 1];
        r = std::max(r, std::abs(lhs - s.rhs[i]));
    }
    return r;
}

}  // namespace aggdiff
