#pragma once

#include <vector>

#include "aggdiff/ensemble.hpp"
#include "aggdiff/hardsphere.hpp"
#include "aggdiff/particles.hpp"

namespace aggdiff {

// Brute-force references used by the tests and the acceptance suite.

// Exhaustive active-set solve of the projection LCP (at most 20 pairs).
// Returns the projected velocity, which is unique even when the pressures
// are not. Throws NumericalError when no active set solves the system.
std::vector<double> enumerate_projection(const ParticleEnsemble& ens, const std::vector<double>& v,
                                         const ContactGraph& graph);

// Blob velocity for a PowerLaw config: the attraction from G~' by nested
// adaptive quadrature of K * G' * K, and the pressure term by adaptive
// quadrature of K' against (m/(m-1)) (K * rho_N)^(m-1).
std::vector<double> nested_quadrature_velocity(const std::vector<double>& x, const BlobConfig& cfg);

// Random 1D chain (2..12 particles) or 2D hexagonal cluster (2..6) with
// touching neighbours.
ParticleEnsemble random_contact_cluster(Rng& rng, double delta);

// Standard normal draws.
std::vector<double> normal_draws(Rng& rng, std::size_t n);

}  // namespace aggdiff
