#include "aggdiff/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aggdiff/errors.hpp"
#include "aggdiff/grid.hpp"

namespace aggdiff {

void ParticleEnsemble::validate() const {
    if (dim < 1 || dim > 3) throw InputError("ensemble dimension must be 1, 2 or 3");
    if (positions.empty() || positions.size() % static_cast<std::size_t>(dim) != 0)
        throw InputError("ensemble must hold at least one particle");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InputError("particle radius must be positive");
    for (double x : positions)
        if (!std::isfinite(x)) throw InputError("non-finite particle position");
}

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace {

// Inverse CDF through a fine piecewise-linear cumulative table.
class QuantileTable {
public:
    QuantileTable(const std::function<double(double)>& density, double left, double right) {
        const std::size_t cells = 20000;
        field_ = GridField::from_function(left, right, cells, density);
        for (double& v : field_.values) {
            if (!std::isfinite(v) || v < 0.0) throw InputError("sampling density must be finite and nonnegative");
        }
        cum_ = cumulative_mass(field_);
        if (!(cum_.back() > 0.0)) throw InputError("sampling density has zero mass");
    }

    double operator()(double u) const {
        const double target = u * cum_.back();
        auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
        std::size_t i = static_cast<std::size_t>(std::distance(cum_.begin(), it));
        if (i == 0) return field_.x_left;
        if (i > field_.size()) return field_.x_right();
        --i;
        const double cell_mass = cum_[i + 1] - cum_[i];
        const double frac = cell_mass > 0.0 ? (target - cum_[i]) / cell_mass : 0.5;
        return field_.x_left + (static_cast<double>(i) + frac) * field_.dx;
    }

private:
    GridField field_;
    std::vector<double> cum_;
};

}  // namespace

ParticleEnsemble sample_quantiles(const std::function<double(double)>& density, double left,
                                  double right, std::size_t n, double delta) {
    if (n == 0) throw InputError("cannot sample an empty ensemble");
    QuantileTable q(density, left, right);
    ParticleEnsemble ens;
    ens.delta = delta;
    ens.positions.resize(n);
    for (std::size_t i = 0; i < n; ++i) ens.positions[i] = q((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    return ens;
}

ParticleEnsemble sample_iid(const std::function<double(double)>& density, double left, double right,
                            std::size_t n, double delta, std::uint64_t seed) {
    if (n == 0) throw InputError("cannot sample an empty ensemble");
    QuantileTable q(density, left, right);
    Rng rng(seed);
    ParticleEnsemble ens;
    ens.delta = delta;
    ens.positions.resize(n);
    for (std::size_t i = 0; i < n; ++i) ens.positions[i] = q(uniform01(rng));
    return ens;
}

std::vector<std::size_t> sorted_order(const ParticleEnsemble& ens) {
    std::vector<std::size_t> idx(ens.count());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return ens.coord(a) < ens.coord(b); });
    return idx;
}

}  // namespace aggdiff
