#pragma once

#include <cstddef>
#include <vector>

#include "aggdiff/ensemble.hpp"
#include "aggdiff/kernels.hpp"
#include "aggdiff/metrics.hpp"
#include "aggdiff/pressure.hpp"

namespace aggdiff {

enum class Integrator { Euler, Heun };

struct BlobConfig {
    PressureLaw law = PowerLaw{3.0};
    InteractionKernel kernel;
    Mollifier mollifier{0.1};
    // 0 selects the stability rule 0.2 delta^2 / max(1, f''(rho_max) rho_max).
    double dt = 0.0;
    Integrator integrator = Integrator::Euler;
    // Spacing of the quadrature nodes for the pressure term; 0 means delta/8.
    double eval_spacing = 0.0;
    // Scales the attraction; 0 gives pure nonlinear diffusion.
    double interaction_weight = 1.0;

    void validate() const;
};

// Holds the regularized kernel table so repeated velocity evaluations do
// not rebuild it.
class BlobModel {
public:
    explicit BlobModel(const BlobConfig& cfg);

    const BlobConfig& config() const { return cfg_; }
    const RegularizedKernel& regularized() const { return rk_; }

    std::vector<double> velocity(const ParticleEnsemble& ens) const;
    // Attraction and pressure parts separately.
    std::vector<double> attraction(const ParticleEnsemble& ens) const;
    std::vector<double> repulsion(const ParticleEnsemble& ens) const;

    double max_mollified_density(const ParticleEnsemble& ens) const;
    double stable_dt(const ParticleEnsemble& ens) const;
    ParticleEnsemble step(const ParticleEnsemble& ens, double dt) const;

    // E_delta: entropy term by exact piecewise quadrature of f(K*rho_N),
    // interaction -1/2 sum_ij w^2 G~(x_i - x_j). With cross_check_spacing > 0
    // the grid route E_f[K*rho_N] is evaluated too.
    EnergyReport energy(const ParticleEnsemble& ens, double cross_check_spacing = 0.0) const;
    // Grid route alone.
    EnergyReport energy_on_grid(const ParticleEnsemble& ens, double spacing) const;

private:
    BlobConfig cfg_;
    RegularizedKernel rk_;
    std::vector<double> nodes_, node_weights_;
};

std::vector<double> blob_velocity(const ParticleEnsemble& ens, const BlobConfig& cfg);
ParticleEnsemble blob_step(const ParticleEnsemble& ens, const BlobConfig& cfg);
EnergyReport empirical_energy(const ParticleEnsemble& ens, const BlobConfig& cfg);
double second_moment(const ParticleEnsemble& ens);

struct BlobTrajectory {
    std::vector<double> times;
    std::vector<ParticleEnsemble> states;
    std::vector<EnergyReport> energies;
    std::vector<double> second_moments;
    // Per step: energy after the step and the dt used.
    std::vector<double> step_energy;
    std::vector<double> step_dt;
    std::size_t steps = 0;
};

// Samples at t = 0, the requested sample times, and T. With energy_every = k
// the step energy series is recorded every k steps (0 disables it).
BlobTrajectory blob_simulate(const BlobConfig& cfg, const ParticleEnsemble& initial, double T,
                             const std::vector<double>& sample_times = {}, std::size_t energy_every = 1);

// Least-squares rate lambda in d(t) <= d(0) exp(-lambda t) from a series.
double fitted_contraction_rate(const std::vector<double>& times, const std::vector<double>& distances);

}  // namespace aggdiff
