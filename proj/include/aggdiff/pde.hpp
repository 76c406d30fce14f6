#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "aggdiff/grid.hpp"
#include "aggdiff/kernels.hpp"
#include "aggdiff/metrics.hpp"
#include "aggdiff/pressure.hpp"

namespace aggdiff {

enum class TimeScaling { Micro, Stefan, HeleShaw };

// phi = G_eps * rho with rho extended by zero outside the grid.
struct FreeConvolution {};
// sigma phi - eta eps^2 phi'' = rho on the grid interval with Robin ends.
struct RobinSolve {
    RobinBC bc;
};
// Same formula as FreeConvolution, meant for NoFlux fields on a bounded
// domain: interactions see the density extended by zero.
struct ObstacleExtendByZero {};
// Extend-by-zero potential plus eta_w * tau, tau = G_eps * indicator(outside).
struct EtaBoundaryDrift {
    double eta_w = 0.0;
};
using PotentialMode = std::variant<FreeConvolution, RobinSolve, ObstacleExtendByZero, EtaBoundaryDrift>;

enum class DiffusionScheme { Explicit, SemiImplicit };

// Face density of the drift flux. PressureConsistent uses dP/df' between
// the two cells (capped at twice the donor cell), which makes the discrete
// steady states exactly f'(rho) - phi = const on the support. Upwind is the
// donor cell.
enum class DriftScheme { PressureConsistent, Upwind };

struct PdeConfig {
    PressureLaw law = PowerLaw{2.0};
    InteractionKernel kernel;
    double eps = 1.0;  // multiplies kernel.scale_eps
    TimeScaling time_scaling = TimeScaling::Micro;
    PotentialMode potential = FreeConvolution{};
    double dt_safety = 0.25;
    DiffusionScheme diffusion = DiffusionScheme::SemiImplicit;
    DriftScheme drift = DriftScheme::PressureConsistent;
    // Cap on the unscaled step; 0 selects 0.1 dx.
    double dt_max = 0.0;
    double interaction_weight = 1.0;
    // WholeLineTruncated runs abort when an end cell holds more mass.
    double boundary_mass_tol = 1e-10;
    std::size_t max_halvings = 40;

    void validate() const;
    InteractionKernel effective_kernel() const { return kernel.rescaled(kernel.scale_eps * eps); }
    double effective_eps() const { return kernel.scale_eps * eps; }
    // Physical time per unit of solver time (eps for HeleShaw, else 1).
    double time_factor() const { return time_scaling == TimeScaling::HeleShaw ? eps : 1.0; }
};

// Drift potential: phi_eps, plus eta_w tau_eps for EtaBoundaryDrift.
GridField potential_field(const GridField& field, const PdeConfig& cfg);

struct PdeStepResult {
    GridField field;
    double dt = 0.0;  // physical time advanced
    std::size_t halvings = 0;
};

// One accepted step: explicit drift, diffusion as the Laplacian of P(rho)
// with secant face coefficients (explicit or linearly implicit). Steps that
// lose positivity, leave the law's domain or produce NaN are retried with
// half the step. dt_limit caps the physical step (0 = no cap).
PdeStepResult pde_step_detailed(const GridField& field, const PdeConfig& cfg, double dt_limit = 0.0);
GridField pde_step(const GridField& field, const PdeConfig& cfg);

// Stable physical step at this state (before any halving).
double pde_stable_dt(const GridField& field, const PdeConfig& cfg);

// Energy matching the stepper's gradient structure:
// int f(rho) - w/2 rho phi - eta_w rho tau, plus a*mass when the law has a
// double well (J_eps in the Stefan regime), divided by eps for HeleShaw.
EnergyReport pde_energy(const GridField& field, const PdeConfig& cfg);

struct PdeRun {
    std::vector<double> times;
    std::vector<GridField> states;
    FunctionalId energy_id = FunctionalId::E_f;
    std::vector<double> series_times;  // energy and entropy sample times
    std::vector<double> energies;
    std::vector<double> entropies;
    std::vector<double> dt_history;
    std::size_t steps = 0;
    std::size_t halvings = 0;
    double initial_mass = 0.0;
    double max_relative_mass_drift = 0.0;
    double min_value = 0.0;  // over all accepted steps
};

PdeRun pde_run(const PdeConfig& cfg, const GridField& initial, double T, const std::vector<double>& sample_times = {},
               std::size_t energy_every = 1);

// Rate r with int rho log rho (t) <= S(0) + r t along pde_run, from
// -rho Delta phi <= rho^2 / (eta eps^2) and rho^2 <= rho + (m-1) f(rho).
// Empty for Robin potentials and power laws with m < 2.
std::optional<double> entropy_growth_rate(const PdeConfig& cfg, const GridField& initial);

struct StefanOptions {
    double dt = 0.0;  // 0 selects 0.1 dx
    double prepared_tol = 1e-9;  // relative to theta
};

struct StefanRun {
    std::vector<double> times;
    std::vector<GridField> states;
    std::vector<double> support_left, support_right;  // per sample
    std::size_t steps = 0;
};

// d_t rho = (Q(rho))'' with Q' = rho h**'', Q = 0 for rho <= theta.
// Rejects data with cell values in (0, theta).
StefanRun stefan_solve(const GridField& initial, const DoubleWell& dw, double T,
                       const std::vector<double>& sample_times = {}, const StefanOptions& opt = {});

struct LargeM {
    std::vector<double> m;
};
struct SingularAlpha {
    enum class Kind { Reciprocal, Log };
    Kind kind = Kind::Reciprocal;
    std::vector<double> alpha;
};
using ContinuationSchedule = std::variant<LargeM, SingularAlpha>;

struct ContinuationReport {
    std::vector<double> parameters;
    std::vector<GridField> finals;
    std::vector<double> max_density;
    std::vector<double> overshoot;        // max density - 1
    std::vector<double> l1_successive;    // |rho_k - rho_{k+1}|, size n-1
    std::vector<double> cauchy_ratios;    // successive ratios of l1_successive
    std::vector<double> complementarity;  // int |f'(rho) (1 - rho)|
};

// Runs base with the law replaced along the schedule.
ContinuationReport incompressible_continuation(const PdeConfig& base, const GridField& initial, double T,
                                               const ContinuationSchedule& schedule);

// Self-similar solution of d_t rho = (rho^m)'' with the given mass.
double barenblatt_profile(double m, double mass, double x, double t);

}  // namespace aggdiff
