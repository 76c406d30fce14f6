#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "aggdiff/ensemble.hpp"
#include "aggdiff/kernels.hpp"
#include "aggdiff/metrics.hpp"

namespace aggdiff {

// Pair i < j with unit direction e from i to j. The velocity constraint is
// (u_j - u_i) . e >= min_rate; min_rate = 0 for touching pairs and
// -(gap)/dt for pairs that may close within the step.
struct Contact {
    std::size_t i = 0, j = 0;
    std::array<double, 3> e{};
    double distance = 0.0;
    double min_rate = 0.0;
};

struct ContactGraph {
    std::vector<Contact> pairs;
};

// All pairs with |x_i - x_j| <= 2 delta + gap_tol. feas_tol <= 0 selects
// 1e-9 delta; pairs closer than 2 delta - feas_tol raise InfeasibleError.
ContactGraph detect_contacts(const ParticleEnsemble& ens, double gap_tol, double feas_tol = 0.0);

struct ProjectionResult {
    std::vector<double> velocities;  // flattened like ParticleEnsemble::positions
    std::vector<double> pressures;   // one per graph pair
    double kkt_residual = 0.0;
    std::size_t sweeps = 0;
};

struct ProjectionOptions {
    double omega = 1.3;
    std::size_t max_sweeps = 100000;
    double tolerance = 1e-10;
};

// Euclidean projection of v onto {u : (u_j - u_i).e_ij >= min_rate_ij}
// by projected Gauss-Seidel on the contact pressures. warm_start, when
// sized like the graph, seeds the pressures.
ProjectionResult project_velocity(const ParticleEnsemble& ens, const std::vector<double>& v_desired,
                                  const ContactGraph& graph, const ProjectionOptions& opt = {},
                                  const std::vector<double>* warm_start = nullptr);

// Dense LCP data w = A p + b of a projection problem, for oracles and
// diagnostics. A is row-major, pairs x pairs.
struct ContactLcp {
    std::vector<double> A, b;
    std::size_t size = 0;
};
ContactLcp contact_lcp(const ParticleEnsemble& ens, const std::vector<double>& v_desired, const ContactGraph& graph);
// max_c |min(p_c, w_c)| with w = A p + b.
double lcp_natural_residual(const ContactLcp& lcp, const std::vector<double>& p);

struct FixedPotential {
    std::function<double(double)> phi;
    // Optional exact gradient; otherwise a central difference of phi.
    std::function<double(double)> grad;
};

struct SelfConsistent {
    InteractionKernel kernel;
    Mollifier mollifier{0.1};
    // Built on first use and shared between copies.
    const RegularizedKernel& table() const;

private:
    mutable std::shared_ptr<const RegularizedKernel> table_;
};

using DesiredVelocityMode = std::variant<FixedPotential, SelfConsistent>;

// FixedPotential: v_i = phi'(x_i). SelfConsistent: v_i = sum_j w G~'(x_i - x_j),
// the gradient of K * phi_delta with sigma phi_delta - eta phi_delta'' = K * rho_N.
std::vector<double> desired_velocity(const ParticleEnsemble& ens, const DesiredVelocityMode& mode);

struct HsConfig {
    double dt = 1e-3;
    double gap_tol = 0.0;   // 0 selects 1e-6 delta
    double feas_tol = 0.0;  // 0 selects 1e-9 delta
    std::size_t max_restore_sweeps = 100;
    ProjectionOptions projection;

    void validate(double delta) const;
    double resolved_gap_tol(double delta) const { return gap_tol > 0.0 ? gap_tol : 1e-6 * delta; }
    double resolved_feas_tol(double delta) const { return feas_tol > 0.0 ? feas_tol : 1e-9 * delta; }
};

struct HsStepResult {
    ParticleEnsemble ensemble;
    ContactGraph graph;
    ProjectionResult projection;
    std::vector<double> desired;
    double restoration_displacement = 0.0;
    std::size_t restoration_sweeps = 0;
};

// Pressures of the previous step keyed by pair (i, j), for warm starts.
using PressureCache = std::map<std::pair<std::size_t, std::size_t>, double>;

// One catch-up step: detect pairs that may touch within dt, project the
// desired velocity, advance, then push apart any residual overlap.
HsStepResult hs_step_detailed(const ParticleEnsemble& ens, const HsConfig& cfg, const DesiredVelocityMode& mode,
                              const PressureCache* warm_start = nullptr);
ParticleEnsemble hs_step(const ParticleEnsemble& ens, const HsConfig& cfg, const DesiredVelocityMode& mode);

double min_pair_distance(const ParticleEnsemble& ens);

// Regularized hard-sphere energy: 0 entropy while feasible and
// -1/2 sum_{i != j} w^2 G~(x_i - x_j). Infeasible states give +inf.
EnergyReport hs_energy(const ParticleEnsemble& ens, const InteractionKernel& kernel, const Mollifier& mollifier);

struct ContactRecord {
    double t;
    std::size_t i, j;
    double pressure;
};

struct HsTrajectory {
    std::vector<double> times;
    std::vector<ParticleEnsemble> states;
    std::vector<double> step_energy;  // after each step (empty when energies are off)
    std::vector<double> min_distance;  // after each step
    std::vector<ContactRecord> contacts;  // touching pairs with positive pressure, at sample times
    double max_restoration = 0.0;
    std::size_t steps = 0;
};

// energy_kernel, when given, turns on the per-step energy series.
HsTrajectory hs_simulate(const ParticleEnsemble& initial, const HsConfig& cfg, const DesiredVelocityMode& mode,
                         double T, const std::vector<double>& sample_times = {},
                         const std::optional<InteractionKernel>& energy_kernel = std::nullopt);

}  // namespace aggdiff
