#pragma once

// P1 finite elements on structured meshes: 1D uniform intervals and 2D
// structured triangulations of an axis-aligned box (each square split along
// the (i,j)->(i+1,j+1) diagonal). Dirichlet problems for data synthesis and
// references, periodic zero-mean cell problems for homogenization.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glimit/errors.hpp"

namespace glimit::fem {

using ScalarField1 = std::function<double(double)>;
using ScalarField2 = std::function<double(double, double)>;
// diagonal tensor coefficient (A11, A22) for 2D problems
using DiagField2 = std::function<std::array<double, 2>(double, double)>;

struct Mesh {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    std::array<int, 2> n{1, 1}; // subdivisions per axis

    static Mesh line(double a, double b, int nx) {
        Mesh m;
        m.dim = 1;
        m.lo = {a, 0.0};
        m.hi = {b, 0.0};
        m.n = {nx, 0};
        return m;
    }

    static Mesh box(std::array<double, 2> a, std::array<double, 2> b, int nx, int ny) {
        Mesh m;
        m.dim = 2;
        m.lo = a;
        m.hi = b;
        m.n = {nx, ny};
        return m;
    }

    double h(int axis) const { return (hi[axis] - lo[axis]) / n[axis]; }

    int64_t node_count() const {
        return dim == 1 ? n[0] + 1 : static_cast<int64_t>(n[0] + 1) * (n[1] + 1);
    }
    int64_t element_count() const {
        return dim == 1 ? n[0] : 2 * static_cast<int64_t>(n[0]) * n[1];
    }

    int64_t node_id(int i, int j) const { return static_cast<int64_t>(j) * (n[0] + 1) + i; }
    double node_x(int i) const { return lo[0] + i * h(0); }
    std::array<double, 2> node_xy(int i, int j) const {
        return {lo[0] + i * h(0), lo[1] + j * h(1)};
    }
};

// Compressed-row symmetric positive-(semi)definite system.
struct SparseSystem {
    int64_t n = 0;
    std::vector<int64_t> row_ptr;
    std::vector<int32_t> col;
    std::vector<double> val;
    std::vector<double> rhs;

    static SparseSystem from_triplets(int64_t n,
                                      std::vector<std::array<double, 3>> ijv,
                                      std::vector<double> rhs);

    // y = A x, row-parallel (deterministic for any thread count).
    void spmv(std::span<const double> x, std::span<double> y) const;

    double max_asymmetry() const; // max |a_ij - a_ji| over stored entries
};

enum class Precond { none, jacobi, ssor };

struct CgStats {
    int iterations = 0;
    double rel_residual = 0.0;
};

// Preconditioned CG. x holds the initial guess and receives the solution.
// zero_mean projects iterates onto the zero-mean complement (for the
// constant-nullspace cell systems). Throws NumericError on iteration cap.
CgStats conjugate_gradient(const SparseSystem& sys, std::span<double> x, double tol,
                           int max_iters, Precond pre = Precond::ssor,
                           bool zero_mean = false);

std::vector<double> conjugate_gradient(const SparseSystem& sys, double tol, int max_iters,
                                       Precond pre = Precond::ssor);

// Direct tridiagonal solve (sub/diag/super), overwrites nothing, returns x.
std::vector<double> thomas_solve(std::span<const double> sub, std::span<const double> diag,
                                 std::span<const double> super, std::span<const double> rhs);

enum class BcKind { dirichlet, periodic };

struct FemSolution {
    Mesh mesh;
    std::vector<double> values; // nodal; periodic: n (1D) or n*n (2D) unique nodes
    BcKind bc = BcKind::dirichlet;

    double eval1(double x) const;
    double eval2(double x, double y) const;

    void export_csv(const std::string& path) const;
    void save_binary(const std::string& path) const;
    static FemSolution load_binary(const std::string& path);
};

// -div(A u')' = f on (lo,hi), u = g at the endpoints. Midpoint quadrature,
// tridiagonal direct solve. eps_hint triggers the resolution warning when
// fewer than 8 elements cover one fine-scale period.
FemSolution solve_dirichlet_1d(const Mesh& mesh, const ScalarField1& A, const ScalarField1& f,
                               const ScalarField1& g,
                               std::optional<double> eps_hint = std::nullopt);

// -div(A grad u) = f on the box, u = g on the boundary; A diagonal tensor,
// 3-point (edge midpoint) quadrature.
FemSolution solve_dirichlet_2d(const Mesh& mesh, const DiagField2& A, const ScalarField2& f,
                               const ScalarField2& g,
                               std::optional<double> eps_hint = std::nullopt,
                               double cg_tol = 1e-10, int cg_max_iters = 200000);

// Periodic cell problem on the unit cell: div(A grad chi) = -div(A e_d),
// zero-mean corrector. 1D has a single direction d = 0.
FemSolution solve_cell_problem_1d(int n_cells, const ScalarField1& A_frozen);
FemSolution solve_cell_problem_2d(int n_cells, const ScalarField2& A_frozen, int direction,
                                  double cg_tol = 1e-12, int cg_max_iters = 100000);

// Domain-averaged flux component (1/|Omega|) * integral of A d_dir(u) for a
// 2D Dirichlet solution and scalar A; used by patch upscaling.
double average_flux_2d(const FemSolution& u, const ScalarField2& A, int direction);

// Serial reference assembly of the 2D Dirichlet system (kept for testing the
// parallel row-wise assembly).
SparseSystem assemble_dirichlet_2d_serial(const Mesh& mesh, const DiagField2& A,
                                          const ScalarField2& f, const ScalarField2& g);
SparseSystem assemble_dirichlet_2d(const Mesh& mesh, const DiagField2& A, const ScalarField2& f,
                                   const ScalarField2& g);

} // namespace glimit::fem
