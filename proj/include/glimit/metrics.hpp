#pragma once

// Relative L2 errors on predefined uniform evaluation grids (trapezoidal
// weights), and the per-run error report.

#include <array>
#include <cstdint>
#include <functional>
#include <string>

#include "glimit/errors.hpp"

namespace glimit::metrics {

struct GridSpec {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    std::array<int, 2> n{100000, 0}; // intervals per axis
};

using Field1 = std::function<double(double)>;
using Field2 = std::function<double(double, double)>;
using DiagField = std::function<std::array<double, 2>(double)>; // entries vs x2

// ||fhat - fref|| / ||fref|| with trapezoidal weights on the grid.
double relative_l2_1d(const Field1& fhat, const Field1& fref, const GridSpec& grid);
double relative_l2_2d(const Field2& fhat, const Field2& fref, const GridSpec& grid);
// matrix-valued 2D G-limits: Frobenius aggregation over the diagonal entries
double relative_l2_diag(const DiagField& fhat, const DiagField& fref, const GridSpec& grid);

struct ErrorReport {
    double e_astar = 0.0;
    double e_u0 = 0.0;
    GridSpec grid;
    std::string astar_reference; // provenance of the G-limit reference
    std::string u0_reference;    // provenance of the homogenized-solution reference
    // run metadata
    std::string benchmark;
    double eps = 0.0;
    double noise = 0.0;
    int n_data = 0;
    int n_res = 0;
    uint64_t seed = 0;
    std::string config_hash;

    std::string to_json() const;
    static ErrorReport from_json(const std::string& text);
    std::string csv_row() const; // for sweep aggregation
    static std::string csv_header();
};

} // namespace glimit::metrics
