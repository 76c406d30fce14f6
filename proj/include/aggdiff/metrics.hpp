#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aggdiff/ensemble.hpp"
#include "aggdiff/grid.hpp"
#include "aggdiff/kernels.hpp"
#include "aggdiff/pressure.hpp"

namespace aggdiff {

enum class FunctionalId { E_f, E_delta, J_eps, G_eps, G_eta_eps };
std::string functional_name(FunctionalId id);

struct EnergyReport {
    FunctionalId id = FunctionalId::E_f;
    // Keys used: "entropy", "interaction", "double_well", "dirichlet_like", "bulk", "boundary".
    std::map<std::string, double> terms;
    double total = 0.0;
    // Second evaluation route when one was computed (value of the same total).
    std::optional<double> cross_check;
    // Extra diagnostics that are not part of the sum (route breakdowns, flags).
    std::map<std::string, double> details;
    // G_eps only: the bulk double-well part dominates, i.e. rho has no sharp
    // interface and the energy grows like 1/eps.
    bool divergent = false;

    double relative_route_gap() const;
    void sum_terms();
};

// Exact 1D W2 by the quantile coupling. Masses are normalized; inputs whose
// masses differ by more than 1e-8 are still compared after normalization.
double wasserstein1d(const GridField& mu, const GridField& nu);
double wasserstein1d(const ParticleEnsemble& mu, const ParticleEnsemble& nu);
double wasserstein1d(const ParticleEnsemble& mu, const GridField& nu);
double wasserstein1d(const GridField& mu, const ParticleEnsemble& nu);

// E_f = int f(rho) - 1/2 int rho G_eps*rho, rho extended by zero.
EnergyReport energy_E_f(const GridField& field, const PressureLaw& law, const InteractionKernel& kernel);

// J_eps = int h(rho) + 1/4 iint G_eps(x-y)(rho(x)-rho(y))^2, by the
// double-integral route with the potential-energy route as cross check.
EnergyReport energy_J_eps(const GridField& field, const DoubleWell& dw, const InteractionKernel& kernel,
                          double eps);
EnergyReport energy_G_eps(const GridField& field, const DoubleWell& dw, const InteractionKernel& kernel,
                          double eps);

// Bounded-domain energy with wall weight eta_w on the field's interval;
// terms "bulk" and "boundary".
EnergyReport energy_G_eta_eps(const GridField& field, const DoubleWell& dw, const InteractionKernel& kernel,
                              double eps, double eta_w);

double contact_angle(const RobinBC& bc, double sigma);
double contact_angle(double eta_w);

struct InterfaceDiagnostics {
    std::optional<double> width;
    std::vector<double> positions;
    std::optional<double> plateau_value;
    std::size_t perimeter_count = 0;
};
InterfaceDiagnostics interface_diagnostics(const GridField& field, const DoubleWell& dw);

struct DissipationResult {
    bool pass = true;
    double worst_increase = 0.0;
    std::size_t worst_index = 0;  // index k of the step k-1 -> k
};
DissipationResult dissipation_check(const std::vector<double>& series, double tolerance_per_step);
DissipationResult dissipation_check(const std::vector<double>& series, const std::vector<double>& tolerances);

// int rho log rho over the grid.
double entropy(const GridField& field);

}  // namespace aggdiff
