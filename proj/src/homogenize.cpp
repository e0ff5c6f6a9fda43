#include "glimit/homogenize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>

#include "glimit/numerics.hpp"

namespace glimit::hom {

namespace {

double lerp_table(const std::vector<double>& grid, const std::vector<double>& vals, double x) {
    if (x <= grid.front()) return vals.front();
    if (x >= grid.back()) return vals.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const size_t k = static_cast<size_t>(it - grid.begin());
    const double t = (x - grid[k - 1]) / (grid[k] - grid[k - 1]);
    return vals[k - 1] * (1.0 - t) + vals[k] * t;
}

} // namespace

void CoefficientField::check_ellipticity(std::array<double, 2> lo, std::array<double, 2> hi,
                                         int probe) const {
    const double slack = 1e-9 * std::max(1.0, beta);
    if (dim == 1) {
        for (int i = 0; i <= probe; ++i) {
            const double x = lo[0] + (hi[0] - lo[0]) * i / probe;
            const double a = eval_1d(x);
            if (!(a >= alpha - slack) || !(a <= beta + slack))
                throw NumericError("CoefficientField: ellipticity violated at x=" +
                                   std::to_string(x) + " (A=" + std::to_string(a) + ")");
        }
    } else {
        const int side = static_cast<int>(std::sqrt(static_cast<double>(probe))) + 1;
        for (int j = 0; j <= side; ++j)
            for (int i = 0; i <= side; ++i) {
                const double x = lo[0] + (hi[0] - lo[0]) * i / side;
                const double y = lo[1] + (hi[1] - lo[1]) * j / side;
                const double a = eval_2d(x, y);
                if (!(a >= alpha - slack) || !(a <= beta + slack))
                    throw NumericError("CoefficientField: ellipticity violated at (" +
                                       std::to_string(x) + "," + std::to_string(y) + ")");
            }
    }
}

GLimitField tabulated_1d(std::vector<double> grid, std::vector<double> values, Provenance prov) {
    GLimitField g;
    g.dim = 1;
    g.provenance = prov;
    g.grid = std::move(grid);
    g.values = std::move(values);
    auto gp = std::make_shared<std::vector<double>>(g.grid);
    auto vp = std::make_shared<std::vector<double>>(g.values);
    g.scalar = [gp, vp](double x) { return lerp_table(*gp, *vp, x); };
    return g;
}

GLimitField tabulated_diag_2d(std::vector<double> grid, std::vector<std::array<double, 2>> values,
                              Provenance prov) {
    GLimitField g;
    g.dim = 2;
    g.provenance = prov;
    g.grid = std::move(grid);
    g.diag_values = std::move(values);
    auto gp = std::make_shared<std::vector<double>>(g.grid);
    std::vector<double> a11(g.diag_values.size()), a22(g.diag_values.size());
    for (size_t i = 0; i < g.diag_values.size(); ++i) {
        a11[i] = g.diag_values[i][0];
        a22[i] = g.diag_values[i][1];
    }
    auto p11 = std::make_shared<std::vector<double>>(std::move(a11));
    auto p22 = std::make_shared<std::vector<double>>(std::move(a22));
    g.diag = [gp, p11, p22](double s) -> std::array<double, 2> {
        return {lerp_table(*gp, *p11, s), lerp_table(*gp, *p22, s)};
    };
    return g;
}

void GLimitField::export_csv(const std::string& path) const {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw ConfigError("GLimitField::export_csv: cannot open " + path);
    const char* prov = "analytic";
    switch (provenance) {
        case Provenance::analytic: prov = "analytic"; break;
        case Provenance::cell_problem: prov = "cell_problem"; break;
        case Provenance::monte_carlo: prov = "monte_carlo"; break;
        case Provenance::patch_upscaling: prov = "patch_upscaling"; break;
        case Provenance::learned: prov = "learned"; break;
    }
    if (dim == 1) {
        std::fprintf(fp, "x,astar,provenance%s\n", standard_error.empty() ? "" : ",stderr");
        for (size_t i = 0; i < grid.size(); ++i) {
            if (standard_error.empty())
                std::fprintf(fp, "%.17g,%.17g,%s\n", grid[i], values[i], prov);
            else
                std::fprintf(fp, "%.17g,%.17g,%s,%.17g\n", grid[i], values[i], prov,
                             standard_error[i]);
        }
    } else {
        std::fprintf(fp, "x2,astar11,astar22,provenance\n");
        for (size_t i = 0; i < grid.size(); ++i)
            std::fprintf(fp, "%.17g,%.17g,%.17g,%s\n", grid[i], diag_values[i][0],
                         diag_values[i][1], prov);
    }
    std::fclose(fp);
}

GLimitField glimit_harmonic_mean_1d(const std::function<double(double, double)>& A,
                                    std::span<const double> x_grid, int quad_points) {
    std::vector<double> vals(x_grid.size());
    std::atomic<bool> positive{true};
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(x_grid.size()); ++i) {
        const double x = x_grid[i];
        bool ok = true;
        const double integral = num::simpson(
            [&](double y) {
                const double a = A(x, y);
                if (!(a > 0.0)) ok = false;
                return 1.0 / a;
            },
            0.0, 1.0, quad_points);
        if (!ok) positive = false;
        vals[i] = 1.0 / integral;
    }
    if (!positive)
        throw NumericError("glimit_harmonic_mean_1d: non-positive integrand");
    return tabulated_1d({x_grid.begin(), x_grid.end()}, std::move(vals), Provenance::analytic);
}

GLimitField glimit_cell_1d(const std::function<double(double, double)>& A,
                           std::span<const double> x_grid, int cell_resolution) {
    std::vector<double> vals(x_grid.size());
    const int n = cell_resolution;
    const double h = 1.0 / n;
    for (size_t i = 0; i < x_grid.size(); ++i) {
        const double x = x_grid[i];
        auto frozen = [&](double y) { return A(x, y); };
        const fem::FemSolution chi = fem::solve_cell_problem_1d(n, frozen);
        // A* = integral A (1 + chi') with midpoint coefficients
        double acc = 0.0;
        for (int e = 0; e < n; ++e) {
            const double a = frozen((e + 0.5) * h);
            const double dchi = (chi.values[(e + 1) % n] - chi.values[e]) / h;
            acc += h * a * (1.0 + dchi);
        }
        vals[i] = acc;
    }
    return tabulated_1d({x_grid.begin(), x_grid.end()}, std::move(vals), Provenance::cell_problem);
}

GLimitField glimit_cell_2d(const std::function<double(double, double, double)>& A,
                           std::span<const double> slices, int cell_resolution) {
    const int n = cell_resolution;
    const double h = 1.0 / n;
    std::vector<std::array<double, 2>> diag(slices.size());
    std::vector<double> offd(slices.size());
    for (size_t s = 0; s < slices.size(); ++s) {
        const double slow = slices[s];
        auto frozen = [&](double y1, double y2) { return A(slow, y1, y2); };
        std::array<fem::FemSolution, 2> chi = {fem::solve_cell_problem_2d(n, frozen, 0),
                                               fem::solve_cell_problem_2d(n, frozen, 1)};
        // A*_{ij} = sum_T (area/3 sum_q A) (delta_ij + (grad chi^j)_i)
        double entry[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
        const double area3 = 0.5 * h * h / 3.0;
        static const int vi[2][3] = {{0, 1, 1}, {0, 1, 0}};
        static const int vj[2][3] = {{0, 0, 1}, {0, 1, 1}};
        auto pid = [&](int i, int j) { return static_cast<int64_t>(j % n) * n + (i % n); };
        for (int sj = 0; sj < n; ++sj)
            for (int si = 0; si < n; ++si)
                for (int t = 0; t < 2; ++t) {
                    const std::array<std::array<double, 2>, 3> grad =
                        (t == 0) ? std::array<std::array<double, 2>, 3>{{{-1.0 / h, 0.0},
                                                                         {1.0 / h, -1.0 / h},
                                                                         {0.0, 1.0 / h}}}
                                 : std::array<std::array<double, 2>, 3>{{{0.0, -1.0 / h},
                                                                         {1.0 / h, 0.0},
                                                                         {-1.0 / h, 1.0 / h}}};
                    const std::array<std::array<double, 2>, 3> mid =
                        (t == 0) ? std::array<std::array<double, 2>, 3>{{{0.5 * h, 0.0},
                                                                         {h, 0.5 * h},
                                                                         {0.5 * h, 0.5 * h}}}
                                 : std::array<std::array<double, 2>, 3>{{{0.5 * h, 0.5 * h},
                                                                         {0.5 * h, h},
                                                                         {0.0, 0.5 * h}}};
                    const double x0 = si * h, y0 = sj * h;
                    double qa = 0.0;
                    for (int q = 0; q < 3; ++q) {
                        double yy1 = x0 + mid[q][0], yy2 = y0 + mid[q][1];
                        yy1 -= std::floor(yy1);
                        yy2 -= std::floor(yy2);
                        qa += frozen(yy1, yy2);
                    }
                    for (int dj = 0; dj < 2; ++dj) {
                        double gx = 0.0, gy = 0.0;
                        for (int v = 0; v < 3; ++v) {
                            const double cv = chi[dj].values[pid(si + vi[t][v], sj + vj[t][v])];
                            gx += grad[v][0] * cv;
                            gy += grad[v][1] * cv;
                        }
                        entry[0][dj] += area3 * qa * (gx + (dj == 0 ? 1.0 : 0.0));
                        entry[1][dj] += area3 * qa * (gy + (dj == 1 ? 1.0 : 0.0));
                    }
                }
        diag[s] = {entry[0][0], entry[1][1]};
        offd[s] = 0.5 * (entry[0][1] + entry[1][0]);
        // SPD per slice
        const double det = entry[0][0] * entry[1][1] - entry[0][1] * entry[1][0];
        if (!(entry[0][0] > 0.0) || !(det > 0.0))
            throw NumericError("glimit_cell_2d: assembled G-limit not positive definite at slice " +
                               std::to_string(slow));
    }
    GLimitField g = tabulated_diag_2d({slices.begin(), slices.end()}, std::move(diag),
                                      Provenance::cell_problem);
    g.off_diag = std::move(offd);
    return g;
}

GLimitField glimit_ergodic_mc(const std::function<double(double, double, double)>& A,
                              std::span<const double> x_grid, int n_samples, uint64_t seed) {
    if (n_samples < 1) throw ConfigError("glimit_ergodic_mc: n_samples must be positive");
    std::vector<std::array<double, 2>> omega(n_samples);
    num::Rng rng(seed);
    for (int k = 0; k < n_samples; ++k) {
        omega[k][0] = rng.uniform01();
        omega[k][1] = rng.uniform01();
    }
    std::vector<double> vals(x_grid.size()), se(x_grid.size());
#pragma omp parallel
    {
        std::vector<double> buf(n_samples), buf2(n_samples);
#pragma omp for schedule(static)
        for (int64_t i = 0; i < static_cast<int64_t>(x_grid.size()); ++i) {
            const double x = x_grid[i];
            for (int k = 0; k < n_samples; ++k) {
                const double a = A(x, omega[k][0], omega[k][1]);
                buf[k] = 1.0 / a;
                buf2[k] = buf[k] * buf[k];
            }
            const double m = num::pairwise_sum(buf) / n_samples;
            const double m2 = num::pairwise_sum(buf2) / n_samples;
            const double var = std::max(0.0, m2 - m * m) * n_samples / std::max(1, n_samples - 1);
            vals[i] = 1.0 / m;
            // standard error of the averaged quantity mean(1/A)
            se[i] = std::sqrt(var / n_samples);
        }
    }
    GLimitField g = tabulated_1d({x_grid.begin(), x_grid.end()}, std::move(vals),
                                 Provenance::monte_carlo);
    g.standard_error = std::move(se);
    return g;
}

GLimitField glimit_patch_upscale_2d(const std::function<double(double, double)>& A_eps,
                                    double eps, std::span<const double> x2_slices,
                                    const PatchConfig& cfg) {
    if (cfg.delta < 8.0 * eps)
        throw ConfigError("glimit_patch_upscale_2d: delta must be >= 8 eps (delta=" +
                          std::to_string(cfg.delta) + ", eps=" + std::to_string(eps) + ")");
    if (cfg.delta > 0.25)
        throw ConfigError("glimit_patch_upscale_2d: delta must be <= 1/4");

    std::vector<std::array<double, 2>> diag(x2_slices.size());
    for (size_t s = 0; s < x2_slices.size(); ++s) {
        const double half = 0.5 * cfg.delta;
        const double cx = std::clamp(cfg.x1_center, cfg.domain_lo[0] + half, cfg.domain_hi[0] - half);
        const double cy = std::clamp(x2_slices[s], cfg.domain_lo[1] + half, cfg.domain_hi[1] - half);
        const fem::Mesh patch = fem::Mesh::box({cx - half, cy - half}, {cx + half, cy + half},
                                               cfg.patch_resolution, cfg.patch_resolution);
        auto diag_coeff = [&](double x, double y) -> std::array<double, 2> {
            const double a = A_eps(x, y);
            return {a, a};
        };
        auto zero = [](double, double) { return 0.0; };
        for (int d = 0; d < 2; ++d) {
            auto lin = [d](double x, double y) { return d == 0 ? x : y; };
            const fem::FemSolution v =
                fem::solve_dirichlet_2d(patch, diag_coeff, zero, lin, std::nullopt, 1e-10, 200000);
            diag[s][d] = fem::average_flux_2d(v, A_eps, d);
        }
    }
    return tabulated_diag_2d({x2_slices.begin(), x2_slices.end()}, std::move(diag),
                             Provenance::patch_upscaling);
}

GLimitField weak_limit_glimit_1d() {
    GLimitField g;
    g.dim = 1;
    g.provenance = Provenance::analytic;
    g.scalar = [](double x) {
        const double c = 1.0 + std::sin(x);
        return (std::exp(c) - 1.0) / c;
    };
    return g;
}

void check_glimit_ellipticity(const GLimitField& g, double alpha, double beta, double lo,
                              double hi, int probe, double rel_slack) {
    const double slack = rel_slack * std::max(1.0, beta);
    for (int i = 0; i <= probe; ++i) {
        const double x = lo + (hi - lo) * i / probe;
        if (g.dim == 1) {
            const double a = g.scalar(x);
            if (!(a >= alpha - slack) || !(a <= beta + slack))
                throw NumericError("check_glimit_ellipticity: A*=" + std::to_string(a) +
                                   " outside [" + std::to_string(alpha) + "," +
                                   std::to_string(beta) + "] at x=" + std::to_string(x));
        } else {
            const auto d = g.diag(x);
            for (double a : d)
                if (!(a >= alpha - slack) || !(a <= beta + slack))
                    throw NumericError("check_glimit_ellipticity: diagonal entry " +
                                       std::to_string(a) + " outside window at x2=" +
                                       std::to_string(x));
        }
    }
}

RateCheck linf_convergence_rate_1d(
    const std::function<std::function<double(double)>(double)>& A_eps_family,
    const GLimitField& astar, const std::function<double(double)>& f, double lo, double hi,
    std::span<const double> eps_values, int elements_per_period, int min_elements) {
    RateCheck rc;
    for (const double eps : eps_values) {
        int n = static_cast<int>(std::ceil((hi - lo) / eps * elements_per_period));
        n = std::max(n, min_elements);
        const fem::Mesh mesh = fem::Mesh::line(lo, hi, n);
        const auto A_eps = A_eps_family(eps);
        const fem::FemSolution u_eps = fem::solve_dirichlet_1d(mesh, A_eps, f, nullptr, eps);
        const fem::FemSolution u0 =
            fem::solve_dirichlet_1d(mesh, astar.scalar, f, nullptr, std::nullopt);
        double linf = 0.0;
        for (int i = 0; i <= n; ++i)
            linf = std::max(linf, std::abs(u_eps.values[i] - u0.values[i]));
        rc.eps.push_back(eps);
        rc.linf.push_back(linf);
    }
    std::vector<double> lx(rc.eps.size()), ly(rc.eps.size());
    for (size_t i = 0; i < rc.eps.size(); ++i) {
        lx[i] = std::log(rc.eps[i]);
        ly[i] = std::log(rc.linf[i]);
    }
    rc.slope = num::fit_slope(lx, ly);
    return rc;
}

} // namespace glimit::hom
