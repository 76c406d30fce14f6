#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace aggdiff {

// N equal-weight particles of radius delta. Positions are stored as
// d-vectors, flattened: particle i occupies positions[i*dim .. i*dim+dim).
struct ParticleEnsemble {
    std::vector<double> positions;
    int dim = 1;
    double delta = 0.1;

    std::size_t count() const { return dim > 0 ? positions.size() / static_cast<std::size_t>(dim) : 0; }
    double weight() const { return 1.0 / static_cast<double>(count()); }
    double coord(std::size_t i, int k = 0) const { return positions[i * static_cast<std::size_t>(dim) + k]; }

    // Throws InputError for empty ensembles, bad dim or non-finite positions.
    void validate() const;
};

// The generator used for every stochastic choice in the library:
// std::mt19937_64 (fully specified by the C++ standard), with doubles
// drawn as the top 53 bits scaled by 2^-53 so streams are portable.
using Rng = std::mt19937_64;
double uniform01(Rng& rng);

// Deterministic quantile sampling: x_i = F^{-1}((i + 1/2)/N) for the
// normalized density on [left, right].
ParticleEnsemble sample_quantiles(const std::function<double(double)>& density, double left,
                                  double right, std::size_t n, double delta);

// Independent draws from the same density via inverse CDF.
ParticleEnsemble sample_iid(const std::function<double(double)>& density, double left, double right,
                            std::size_t n, double delta, std::uint64_t seed);

// Indices that sort a 1D ensemble by position (stable).
std::vector<std::size_t> sorted_order(const ParticleEnsemble& ens);

}  // namespace aggdiff
