#pragma once

// Reference G-limit oracles: the 1D harmonic-mean formula, periodic
// cell-problem assembly, Monte-Carlo ergodic averaging, and patch upscaling
// for non-periodic 2D media. Every produced field is checked against the
// ellipticity window of its source coefficient.

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glimit/errors.hpp"
#include "glimit/fem.hpp"

namespace glimit::hom {

enum class Structure { locally_periodic_1d, weak_limit_known_1d, nonperiodic_2d, ergodic_1d };

// Evaluable multiscale coefficient A^eps with ellipticity window [alpha, beta].
struct CoefficientField {
    int dim = 1;
    Structure structure = Structure::locally_periodic_1d;
    double eps = 0.0;
    double alpha = 0.0, beta = 0.0;
    std::function<double(double)> eval_1d;                  // A^eps(x)
    std::function<double(double, double)> eval_2d;          // A^eps(x1,x2), scalar
    std::function<double(double, double)> separated;        // A(x,y), Y-periodic in y (1D)

    // alpha <= A <= beta on a probe grid over [lo,hi] (1D) or the box (2D).
    void check_ellipticity(std::array<double, 2> lo, std::array<double, 2> hi,
                           int probe = 1000) const;
};

enum class Provenance { analytic, cell_problem, monte_carlo, patch_upscaling, learned };

// G-limit: scalar in 1D, diagonal pair in 2D (the slow variable of the 2D
// benchmark is x2 only). Tabulated fields interpolate linearly on `grid`.
struct GLimitField {
    int dim = 1;
    Provenance provenance = Provenance::analytic;
    std::function<double(double)> scalar;                       // 1D
    std::function<std::array<double, 2>(double)> diag;          // 2D entries vs x2
    std::vector<double> grid;            // tabulation grid (empty for closed forms)
    std::vector<double> values;          // 1D table
    std::vector<std::array<double, 2>> diag_values;             // 2D table
    std::vector<double> off_diag;        // 2D: A12 per slice (diagnostics)
    std::vector<double> standard_error;  // MC only: stderr of mean(1/A) per point

    void export_csv(const std::string& path) const;
};

GLimitField tabulated_1d(std::vector<double> grid, std::vector<double> values, Provenance prov);
GLimitField tabulated_diag_2d(std::vector<double> grid, std::vector<std::array<double, 2>> values,
                              Provenance prov);

// A*(x) = [ integral_0^1 dy / A(x,y) ]^{-1} by composite quadrature.
GLimitField glimit_harmonic_mean_1d(const std::function<double(double, double)>& A,
                                    std::span<const double> x_grid, int quad_points = 16384);

// 1D cell-problem route: solve the periodic corrector per grid point and
// assemble A*(x) = integral A (1 + chi') dy.
GLimitField glimit_cell_1d(const std::function<double(double, double)>& A,
                           std::span<const double> x_grid, int cell_resolution);

// 2D cell-problem assembly per slice of the slow variable s:
// A*_{ij}(s) = integral_Y A(s,y) (delta_ij + d chi^j / d y_i) dy.
GLimitField glimit_cell_2d(const std::function<double(double, double, double)>& A,
                           std::span<const double> slices, int cell_resolution);

// Ergodic Monte-Carlo: A*(x) = 1 / mean_omega(1/A(x,omega)), omega uniform on
// [0,1]^2, fixed-tree reduction, per-point standard error of the estimate.
GLimitField glimit_ergodic_mc(const std::function<double(double, double, double)>& A,
                              std::span<const double> x_grid, int n_samples, uint64_t seed);

// Patch upscaling for non-periodic 2D media: solve -div(A^eps grad v) = 0 on
// a delta-patch with Dirichlet data v = x_i and average the flux. Guards
// delta >= 8 eps and delta <= 1/4.
struct PatchConfig {
    double delta = 0.125;
    int patch_resolution = 256; // elements per axis within a patch
    double x1_center = 1.5;     // patches are centered at (x1_center, slice)
    std::array<double, 2> domain_lo{1.0, 1.0};
    std::array<double, 2> domain_hi{2.0, 2.0};
};

GLimitField glimit_patch_upscale_2d(const std::function<double(double, double)>& A_eps,
                                    double eps, std::span<const double> x2_slices,
                                    const PatchConfig& cfg);

// Closed-form weak-L2-limit coefficient of the heavily oscillatory 1D
// problem: A*(x) = (e^{1+sin x} - 1) / (1 + sin x).
GLimitField weak_limit_glimit_1d();

// alpha <= A* <= beta (small relative slack) on a probe grid; throws
// NumericError on violation.
void check_glimit_ellipticity(const GLimitField& g, double alpha, double beta, double lo,
                              double hi, int probe = 1000, double rel_slack = 1e-6);

// L_inf(u^eps - u_0,h) for a family of 1D problems across eps, with the
// fitted log-log slope (the O(eps) homogenization-rate check).
struct RateCheck {
    std::vector<double> eps;
    std::vector<double> linf;
    double slope = 0.0;
};

RateCheck linf_convergence_rate_1d(
    const std::function<std::function<double(double)>(double)>& A_eps_family,
    const GLimitField& astar, const std::function<double(double)>& f, double lo, double hi,
    std::span<const double> eps_values, int elements_per_period = 64, int min_elements = 4096);

} // namespace glimit::hom
