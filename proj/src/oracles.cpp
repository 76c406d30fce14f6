#include "aggdiff/oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <cmath>
#include <functional>

#include "aggdiff/errors.hpp"

namespace aggdiff {

namespace {

namespace bq = boost::math::quadrature;

double gk(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0.0;
    return bq::gauss_kronrod<double, 61>::integrate(f, a, b, 6, 1e-12);
}

// Integral over [a, b] with the listed breakpoints honoured.
double gk_split(const std::function<double(double)>& f, double a, double b, std::vector<double> cuts) {
    cuts.push_back(a);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += gk(f, std::max(a, cuts[i]), std::min(b, cuts[i + 1]));
    return s;
}

}  // namespace

std::vector<double> enumerate_projection(const ParticleEnsemble& ens, const std::vector<double>& v,
                                         const ContactGraph& g) {
    const auto lcp = contact_lcp(ens, v, g);
    const std::size_t n = lcp.size;
    if (n > 20) throw InputError("enumeration oracle is limited to 20 pairs");
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b(n);
    for (std::size_t c = 0; c < n; ++c) {
        b(c) = lcp.b[c];
        for (std::size_t d = 0; d < n; ++d) A(c, d) = lcp.A[c * n + d];
    }
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> act;
        for (std::size_t c = 0; c < n; ++c)
            if (mask & (1u << c)) act.push_back(static_cast<int>(c));
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        if (!act.empty()) {
            Eigen::MatrixXd S(act.size(), act.size());
            Eigen::VectorXd rhs(act.size());
            for (std::size_t a = 0; a < act.size(); ++a) {
                rhs(a) = -b(act[a]);
                for (std::size_t c = 0; c < act.size(); ++c) S(a, c) = A(act[a], act[c]);
            }
            const Eigen::VectorXd ps = S.completeOrthogonalDecomposition().solve(rhs);
            if ((S * ps - rhs).norm() > 1e-9) continue;
            for (std::size_t a = 0; a < act.size(); ++a) p(act[a]) = ps(a);
        }
        if (n > 0 && p.minCoeff() < -1e-12) continue;
        const Eigen::VectorXd w = A * p + b;
        if (n > 0 && w.minCoeff() < -1e-9) continue;
        std::vector<double> u = v;
        const int dim = ens.dim;
        for (std::size_t c = 0; c < n; ++c)
            for (int k = 0; k < dim; ++k) {
                u[g.pairs[c].i * dim + k] -= p(c) * g.pairs[c].e[k];
                u[g.pairs[c].j * dim + k] += p(c) * g.pairs[c].e[k];
            }
        return u;
    }
    throw NumericalError("no active set solves the projection LCP");
}

std::vector<double> nested_quadrature_velocity(const std::vector<double>& x, const BlobConfig& cfg) {
    const auto* pl = std::get_if<PowerLaw>(&cfg.law);
    if (!pl) throw InputError("nested quadrature oracle needs a power law");
    const auto& K = cfg.mollifier;
    const double d = K.delta();
    const double w = 1.0 / static_cast<double>(x.size());
    const double m = pl->m;
    auto gtilde_prime = [&](double r) {
        auto inner = [&](double y) {
            auto f = [&](double z) { return K.value(z) * green_derivative(cfg.kernel, r - y - z); };
            return gk_split(f, -d, d, {r - y});
        };
        return gk([&](double y) { return K.value(y) * inner(y); }, -d, d);
    };
    auto mu = [&](double y) {
        double s = 0.0;
        for (double xj : x) s += w * K.value(y - xj);
        return s;
    };
    std::vector<double> v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double att = 0.0;
        for (double xj : x) att += w * gtilde_prime(x[i] - xj);
        std::vector<double> cuts;
        for (double xj : x) {
            cuts.push_back(xj - d - x[i]);
            cuts.push_back(xj + d - x[i]);
        }
        cuts.push_back(0.0);
        const double rep = gk_split(
            [&](double t) { return K.derivative(t) * m / (m - 1) * std::pow(mu(x[i] + t), m - 1); }, -d, d, cuts);
        v[i] = cfg.interaction_weight * att + rep;
    }
    return v;
}

ParticleEnsemble random_contact_cluster(Rng& rng, double delta) {
    ParticleEnsemble e;
    e.delta = delta;
    if (boost::random::uniform_int_distribution<int>(0, 1)(rng) == 0) {
        const int n = boost::random::uniform_int_distribution<int>(2, 12)(rng);
        for (int i = 0; i < n; ++i) e.positions.push_back(2.0 * delta * i);
        return e;
    }
    e.dim = 2;
    std::vector<std::array<double, 2>> sites;
    for (int r = 0; r < 3; ++r)
        for (int q = 0; q < 3; ++q) sites.push_back({2.0 * delta * (q + 0.5 * r), 2.0 * delta * std::sqrt(3.0) / 2 * r});
    // Fisher-Yates with the portable integer distribution.
    for (std::size_t i = sites.size() - 1; i > 0; --i)
        std::swap(sites[i], sites[boost::random::uniform_int_distribution<std::size_t>(0, i)(rng)]);
    const int k = boost::random::uniform_int_distribution<int>(2, 6)(rng);
    for (int i = 0; i < k; ++i) {
        e.positions.push_back(sites[i][0]);
        e.positions.push_back(sites[i][1]);
    }
    return e;
}

std::vector<double> normal_draws(Rng& rng, std::size_t n) {
    boost::random::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> out(n);
    for (double& x : out) x = nd(rng);
    return out;
}

}  // namespace aggdiff
