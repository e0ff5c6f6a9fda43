#pragma once

// Training-set synthesis: equispaced interior sampling of FEM multiscale
// solutions, Gaussian noise injection scaled by the RMS of the clean values,
// residual-point generation, and the dataset CSV format.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "glimit/errors.hpp"
#include "glimit/fem.hpp"

namespace glimit::data {

struct SampleSet {
    int dim = 1;
    std::vector<std::array<double, 2>> points; // second coordinate unused in 1D
    std::vector<double> values;                // u^eps at points, post-noise
    double noise_level = 0.0;
    uint64_t seed = 0;
    // provenance
    std::string run_id;
    double eps = 0.0;
    double mesh_h = 0.0;
};

struct CollocationSet {
    int dim = 1;
    std::vector<std::array<double, 2>> points;
};

enum class CollocationMode { grid, uniform_random };

// n interior points on a uniform grid (1D), or an m x m interior grid for
// n = m^2 (2D); values by P1 interpolation.
SampleSet sample_equispaced(const fem::FemSolution& u, int n);

// values + level * rms(values) * xi with iid standard normal xi.
SampleSet add_noise(const SampleSet& s, double level, uint64_t seed);

CollocationSet make_collocation(int dim, std::array<double, 2> lo, std::array<double, 2> hi,
                                int n, CollocationMode mode, uint64_t seed);

void save_csv(const SampleSet& s, std::array<double, 2> lo, std::array<double, 2> hi,
              const std::string& path);
SampleSet load_csv(const std::string& path);

} // namespace glimit::data
