#include "glimit/fem.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>

#include "glimit/numerics.hpp"

namespace glimit::fem {

namespace {

// P1 shape-function gradients on the two triangle types of the structured
// split, scaled by (1/hx, 1/hy) at use sites. Type 0: (i,j),(i+1,j),(i+1,j+1);
// type 1: (i,j),(i+1,j+1),(i,j+1).
struct TriGeom {
    std::array<std::array<double, 2>, 3> grad; // per local vertex
    std::array<std::array<double, 2>, 3> mid;  // edge midpoints (01,12,20), local coords
};

TriGeom tri_geom(int type, double hx, double hy) {
    TriGeom t;
    if (type == 0) {
        t.grad = {{{-1.0 / hx, 0.0}, {1.0 / hx, -1.0 / hy}, {0.0, 1.0 / hy}}};
        t.mid = {{{0.5 * hx, 0.0}, {hx, 0.5 * hy}, {0.5 * hx, 0.5 * hy}}};
    } else {
        t.grad = {{{0.0, -1.0 / hy}, {1.0 / hx, 0.0}, {-1.0 / hx, 1.0 / hy}}};
        t.mid = {{{0.5 * hx, 0.5 * hy}, {0.5 * hx, hy}, {0.0, 0.5 * hy}}};
    }
    return t;
}

// local vertex (i,j) offsets per triangle type
constexpr int tri_vi[2][3] = {{0, 1, 1}, {0, 1, 0}};
constexpr int tri_vj[2][3] = {{0, 0, 1}, {0, 1, 1}};

// edges adjacent to each local vertex (for the load term): vertex v sits on
// edges edge_of[v][0..1] of (01,12,20)
constexpr int edge_of[3][2] = {{0, 2}, {0, 1}, {1, 2}};

double wrap01(double y) { return y - std::floor(y); }

} // namespace

// ---------------------------------------------------------------------------
// SparseSystem
// ---------------------------------------------------------------------------

SparseSystem SparseSystem::from_triplets(int64_t n, std::vector<std::array<double, 3>> ijv,
                                         std::vector<double> rhs) {
    std::stable_sort(ijv.begin(), ijv.end(), [](const auto& a, const auto& b) {
        return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
    });
    SparseSystem s;
    s.n = n;
    s.rhs = std::move(rhs);
    s.row_ptr.assign(n + 1, 0);
    for (size_t k = 0; k < ijv.size();) {
        size_t e = k + 1;
        double v = ijv[k][2];
        while (e < ijv.size() && ijv[e][0] == ijv[k][0] && ijv[e][1] == ijv[k][1])
            v += ijv[e++][2];
        s.col.push_back(static_cast<int32_t>(ijv[k][1]));
        s.val.push_back(v);
        ++s.row_ptr[static_cast<int64_t>(ijv[k][0]) + 1];
        k = e;
    }
    for (int64_t i = 0; i < n; ++i) s.row_ptr[i + 1] += s.row_ptr[i];
    return s;
}

void SparseSystem::spmv(std::span<const double> x, std::span<double> y) const {
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
        y[i] = s;
    }
}

double SparseSystem::max_asymmetry() const {
    double worst = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            const int64_t j = col[k];
            double vji = 0.0;
            const int64_t b = row_ptr[j], e = row_ptr[j + 1];
            auto it = std::lower_bound(col.begin() + b, col.begin() + e, static_cast<int32_t>(i));
            if (it != col.begin() + e && *it == static_cast<int32_t>(i))
                vji = val[it - col.begin()];
            worst = std::max(worst, std::abs(val[k] - vji));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

namespace {

double det_dot(std::span<const double> a, std::span<const double> b, std::vector<double>& buf) {
    const int64_t n = static_cast<int64_t>(a.size());
    buf.resize(n);
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) buf[i] = a[i] * b[i];
    return num::pairwise_sum(buf);
}

void project_zero_mean(std::span<double> v, std::vector<double>& buf) {
    buf.assign(v.begin(), v.end());
    const double mean = num::pairwise_sum(buf) / static_cast<double>(v.size());
    for (double& x : v) x -= mean;
}

struct Ssor {
    const SparseSystem& sys;
    std::vector<double> diag;
    double omega;

    Ssor(const SparseSystem& s, double w) : sys(s), omega(w) {
        diag.assign(s.n, 0.0);
        for (int64_t i = 0; i < s.n; ++i)
            for (int64_t k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k)
                if (s.col[k] == i) diag[i] = s.val[k];
    }

    // z = M^{-1} r with M = (D+wL) D^{-1} (D+wU) / (w(2-w))
    void apply(std::span<const double> r, std::span<double> z) const {
        const int64_t n = sys.n;
        for (int64_t i = 0; i < n; ++i) {
            double s = r[i];
            for (int64_t k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k) {
                const int64_t j = sys.col[k];
                if (j < i) s -= omega * sys.val[k] * z[j];
            }
            z[i] = s / diag[i];
        }
        for (int64_t i = 0; i < n; ++i) z[i] *= diag[i];
        for (int64_t i = n - 1; i >= 0; --i) {
            double s = z[i];
            for (int64_t k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k) {
                const int64_t j = sys.col[k];
                if (j > i) s -= omega * sys.val[k] * z[j];
            }
            z[i] = s / diag[i];
        }
        const double scale = omega * (2.0 - omega);
        for (int64_t i = 0; i < n; ++i) z[i] *= scale;
    }
};

} // namespace

CgStats conjugate_gradient(const SparseSystem& sys, std::span<double> x, double tol,
                           int max_iters, Precond pre, bool zero_mean) {
    const int64_t n = sys.n;
    std::vector<double> r(n), z(n), p(n), q(n), buf;
    std::vector<double> dinv;
    std::optional<Ssor> ssor;
    if (pre == Precond::jacobi) {
        dinv.assign(n, 1.0);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k)
                if (sys.col[k] == i) dinv[i] = 1.0 / sys.val[k];
    } else if (pre == Precond::ssor) {
        ssor.emplace(sys, 1.5);
    }
    auto precond = [&](std::span<const double> rr, std::span<double> zz) {
        if (pre == Precond::none) {
            std::copy(rr.begin(), rr.end(), zz.begin());
        } else if (pre == Precond::jacobi) {
            for (int64_t i = 0; i < n; ++i) zz[i] = rr[i] * dinv[i];
        } else {
            ssor->apply(rr, zz);
        }
        if (zero_mean) project_zero_mean(zz, buf);
    };

    const double bnorm = std::sqrt(det_dot(sys.rhs, sys.rhs, buf));
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return {0, 0.0};
    }
    if (zero_mean) project_zero_mean(x, buf);
    sys.spmv(x, q);
    for (int64_t i = 0; i < n; ++i) r[i] = sys.rhs[i] - q[i];
    if (zero_mean) project_zero_mean(r, buf);

    double rel = std::sqrt(det_dot(r, r, buf)) / bnorm;
    if (rel <= tol) return {0, rel};

    precond(r, z);
    std::copy(z.begin(), z.end(), p.begin());
    double rz = det_dot(r, z, buf);

    for (int it = 1; it <= max_iters; ++it) {
        sys.spmv(p, q);
        const double pq = det_dot(p, q, buf);
        const double alpha = rz / pq;
#pragma omp parallel for schedule(static) if (n > 16384)
        for (int64_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if (zero_mean) project_zero_mean(r, buf);
        rel = std::sqrt(det_dot(r, r, buf)) / bnorm;
        if (rel <= tol) return {it, rel};
        precond(r, z);
        const double rz_new = det_dot(r, z, buf);
        const double beta = rz_new / rz;
        rz = rz_new;
#pragma omp parallel for schedule(static) if (n > 16384)
        for (int64_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw NumericError("conjugate_gradient: iteration cap reached, rel residual " +
                       std::to_string(rel));
}

std::vector<double> conjugate_gradient(const SparseSystem& sys, double tol, int max_iters,
                                       Precond pre) {
    std::vector<double> x(sys.n, 0.0);
    conjugate_gradient(sys, x, tol, max_iters, pre, false);
    return x;
}

std::vector<double> thomas_solve(std::span<const double> sub, std::span<const double> diag,
                                 std::span<const double> super, std::span<const double> rhs) {
    const size_t n = diag.size();
    std::vector<double> c(n, 0.0), d(n, 0.0), x(n, 0.0);
    c[0] = super.empty() ? 0.0 : super[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for (size_t i = 1; i < n; ++i) {
        const double m = diag[i] - sub[i - 1] * c[i - 1];
        c[i] = (i < n - 1) ? super[i] / m : 0.0;
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / m;
    }
    x[n - 1] = d[n - 1];
    for (size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

// ---------------------------------------------------------------------------
// 1D Dirichlet
// ---------------------------------------------------------------------------

namespace {
void warn_resolution(double h, std::optional<double> eps_hint) {
    if (eps_hint && h > *eps_hint / 8.0)
        std::cerr << "[glimit::fem] warning: fewer than 8 elements per eps-period (h=" << h
                  << ", eps=" << *eps_hint << ")\n";
}
} // namespace

FemSolution solve_dirichlet_1d(const Mesh& mesh, const ScalarField1& A, const ScalarField1& f,
                               const ScalarField1& g, std::optional<double> eps_hint) {
    if (mesh.dim != 1) throw UsageError("solve_dirichlet_1d: 1D mesh required");
    const int n = mesh.n[0];
    const double h = mesh.h(0);
    warn_resolution(h, eps_hint);

    std::vector<double> a(n), fm(n);
#pragma omp parallel for schedule(static) if (n > 4096)
    for (int e = 0; e < n; ++e) {
        const double xm = mesh.lo[0] + (e + 0.5) * h;
        a[e] = A(xm);
        fm[e] = f(xm);
    }
    for (int e = 0; e < n; ++e)
        if (!(a[e] > 0.0))
            throw NumericError("solve_dirichlet_1d: non-positive coefficient at x=" +
                               std::to_string(mesh.lo[0] + (e + 0.5) * h));

    const double gl = g ? g(mesh.lo[0]) : 0.0;
    const double gr = g ? g(mesh.hi[0]) : 0.0;

    const int m = n - 1; // interior unknowns
    std::vector<double> diag(m), sub(m - 1), super(m - 1), rhs(m);
    for (int i = 1; i <= m; ++i) {
        diag[i - 1] = (a[i - 1] + a[i]) / h;
        rhs[i - 1] = 0.5 * h * (fm[i - 1] + fm[i]);
    }
    for (int i = 1; i < m; ++i) {
        sub[i - 1] = -a[i] / h;
        super[i - 1] = -a[i] / h;
    }
    rhs[0] += a[0] / h * gl;
    rhs[m - 1] += a[n - 1] / h * gr;

    FemSolution u;
    u.mesh = mesh;
    u.bc = BcKind::dirichlet;
    u.values.assign(n + 1, 0.0);
    const std::vector<double> xin = thomas_solve(sub, diag, super, rhs);
    u.values[0] = gl;
    u.values[n] = gr;
    for (int i = 1; i <= m; ++i) u.values[i] = xin[i - 1];
    return u;
}

// ---------------------------------------------------------------------------
// 2D Dirichlet
// ---------------------------------------------------------------------------

namespace {

struct RowEntry {
    int32_t col;
    double val;
};

// Builds the stiffness row of interior node (i,j): column/value pairs over
// interior neighbors plus the rhs contribution (load + Dirichlet lift).
// Returns number of entries. Columns come out sorted.
int build_row_2d(const Mesh& mesh, const DiagField2& A, const ScalarField2& f,
                 const ScalarField2& g, int i, int j, RowEntry out[16], double& rhs_out,
                 bool& elliptic_ok) {
    const int nx = mesh.n[0], ny = mesh.n[1];
    const double hx = mesh.h(0), hy = mesh.h(1);
    const double area3 = 0.5 * hx * hy / 3.0;

    int ncol = 0;
    RowEntry acc[16];
    double rhs = 0.0;

    auto add = [&](int32_t c, double v) {
        for (int k = 0; k < ncol; ++k)
            if (acc[k].col == c) {
                acc[k].val += v;
                return;
            }
        acc[ncol++] = {c, v};
    };

    for (int sj = j - 1; sj <= j; ++sj) {
        for (int si = i - 1; si <= i; ++si) {
            if (si < 0 || si >= nx || sj < 0 || sj >= ny) continue;
            const double x0 = mesh.lo[0] + si * hx, y0 = mesh.lo[1] + sj * hy;
            for (int t = 0; t < 2; ++t) {
                int self = -1;
                for (int v = 0; v < 3; ++v)
                    if (si + tri_vi[t][v] == i && sj + tri_vj[t][v] == j) self = v;
                if (self < 0) continue;
                const TriGeom geom = tri_geom(t, hx, hy);
                double qa11 = 0.0, qa22 = 0.0, fq[3];
                for (int q = 0; q < 3; ++q) {
                    const double qx = x0 + geom.mid[q][0], qy = y0 + geom.mid[q][1];
                    const auto aq = A(qx, qy);
                    if (!(aq[0] > 0.0) || !(aq[1] > 0.0)) elliptic_ok = false;
                    qa11 += aq[0];
                    qa22 += aq[1];
                    fq[q] = f(qx, qy);
                }
                // load: phi_self = 1/2 on its two adjacent edge midpoints
                rhs += area3 * 0.5 * (fq[edge_of[self][0]] + fq[edge_of[self][1]]);
                for (int v = 0; v < 3; ++v) {
                    const double k =
                        area3 * (qa11 * geom.grad[self][0] * geom.grad[v][0] +
                                 qa22 * geom.grad[self][1] * geom.grad[v][1]);
                    const int vi = si + tri_vi[t][v], vj = sj + tri_vj[t][v];
                    const bool interior = vi > 0 && vi < nx && vj > 0 && vj < ny;
                    if (interior) {
                        add(static_cast<int32_t>((vj - 1) * (nx - 1) + (vi - 1)), k);
                    } else if (g) {
                        rhs -= k * g(mesh.lo[0] + vi * hx, mesh.lo[1] + vj * hy);
                    }
                }
            }
        }
    }
    std::sort(acc, acc + ncol, [](const RowEntry& a, const RowEntry& b) { return a.col < b.col; });
    for (int k = 0; k < ncol; ++k) out[k] = acc[k];
    rhs_out = rhs;
    return ncol;
}

} // namespace

SparseSystem assemble_dirichlet_2d(const Mesh& mesh, const DiagField2& A, const ScalarField2& f,
                                   const ScalarField2& g) {
    const int nx = mesh.n[0], ny = mesh.n[1];
    const int64_t m = static_cast<int64_t>(nx - 1) * (ny - 1);
    SparseSystem s;
    s.n = m;
    s.row_ptr.assign(m + 1, 0);
    s.rhs.assign(m, 0.0);
    std::atomic<bool> elliptic{true};

    // pass 1: row sizes
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < m; ++r) {
        const int i = static_cast<int>(r % (nx - 1)) + 1;
        const int j = static_cast<int>(r / (nx - 1)) + 1;
        RowEntry row[16];
        double rv;
        bool ok = true;
        s.row_ptr[r + 1] = build_row_2d(mesh, A, f, g, i, j, row, rv, ok);
        if (!ok) elliptic = false;
    }
    if (!elliptic)
        throw NumericError("assemble_dirichlet_2d: non-positive coefficient at a quadrature point");
    for (int64_t r = 0; r < m; ++r) s.row_ptr[r + 1] += s.row_ptr[r];
    s.col.assign(s.row_ptr[m], 0);
    s.val.assign(s.row_ptr[m], 0.0);

    // pass 2: fill
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < m; ++r) {
        const int i = static_cast<int>(r % (nx - 1)) + 1;
        const int j = static_cast<int>(r / (nx - 1)) + 1;
        RowEntry row[16];
        double rv;
        bool ok = true;
        const int nc = build_row_2d(mesh, A, f, g, i, j, row, rv, ok);
        for (int k = 0; k < nc; ++k) {
            s.col[s.row_ptr[r] + k] = row[k].col;
            s.val[s.row_ptr[r] + k] = row[k].val;
        }
        s.rhs[r] = rv;
    }
    return s;
}

SparseSystem assemble_dirichlet_2d_serial(const Mesh& mesh, const DiagField2& A,
                                          const ScalarField2& f, const ScalarField2& g) {
    const int nx = mesh.n[0], ny = mesh.n[1];
    const double hx = mesh.h(0), hy = mesh.h(1);
    const double area3 = 0.5 * hx * hy / 3.0;
    const int64_t m = static_cast<int64_t>(nx - 1) * (ny - 1);
    std::vector<std::array<double, 3>> trip;
    std::vector<double> rhs(m, 0.0);
    auto interior_idx = [&](int vi, int vj) -> int64_t {
        return static_cast<int64_t>(vj - 1) * (nx - 1) + (vi - 1);
    };
    for (int sj = 0; sj < ny; ++sj) {
        for (int si = 0; si < nx; ++si) {
            const double x0 = mesh.lo[0] + si * hx, y0 = mesh.lo[1] + sj * hy;
            for (int t = 0; t < 2; ++t) {
                const TriGeom geom = tri_geom(t, hx, hy);
                double qa11 = 0.0, qa22 = 0.0, fq[3];
                for (int q = 0; q < 3; ++q) {
                    const double qx = x0 + geom.mid[q][0], qy = y0 + geom.mid[q][1];
                    const auto aq = A(qx, qy);
                    if (!(aq[0] > 0.0) || !(aq[1] > 0.0))
                        throw NumericError("assemble_dirichlet_2d_serial: ellipticity violation");
                    qa11 += aq[0];
                    qa22 += aq[1];
                    fq[q] = f(qx, qy);
                }
                for (int u = 0; u < 3; ++u) {
                    const int ui = si + tri_vi[t][u], uj = sj + tri_vj[t][u];
                    const bool u_int = ui > 0 && ui < nx && uj > 0 && uj < ny;
                    if (!u_int) continue;
                    const int64_t ru = interior_idx(ui, uj);
                    rhs[ru] += area3 * 0.5 * (fq[edge_of[u][0]] + fq[edge_of[u][1]]);
                    for (int v = 0; v < 3; ++v) {
                        const double k =
                            area3 * (qa11 * geom.grad[u][0] * geom.grad[v][0] +
                                     qa22 * geom.grad[u][1] * geom.grad[v][1]);
                        const int vi = si + tri_vi[t][v], vj = sj + tri_vj[t][v];
                        const bool v_int = vi > 0 && vi < nx && vj > 0 && vj < ny;
                        if (v_int)
                            trip.push_back({static_cast<double>(ru),
                                            static_cast<double>(interior_idx(vi, vj)), k});
                        else if (g)
                            rhs[ru] -= k * g(mesh.lo[0] + vi * hx, mesh.lo[1] + vj * hy);
                    }
                }
            }
        }
    }
    return SparseSystem::from_triplets(m, std::move(trip), std::move(rhs));
}

FemSolution solve_dirichlet_2d(const Mesh& mesh, const DiagField2& A, const ScalarField2& f,
                               const ScalarField2& g, std::optional<double> eps_hint,
                               double cg_tol, int cg_max_iters) {
    if (mesh.dim != 2) throw UsageError("solve_dirichlet_2d: 2D mesh required");
    warn_resolution(std::max(mesh.h(0), mesh.h(1)), eps_hint);
    SparseSystem sys = assemble_dirichlet_2d(mesh, A, f, g);
    std::vector<double> x(sys.n, 0.0);
    conjugate_gradient(sys, x, cg_tol, cg_max_iters, Precond::ssor, false);

    const int nx = mesh.n[0], ny = mesh.n[1];
    FemSolution u;
    u.mesh = mesh;
    u.bc = BcKind::dirichlet;
    u.values.assign(mesh.node_count(), 0.0);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            const bool interior = i > 0 && i < nx && j > 0 && j < ny;
            if (interior)
                u.values[mesh.node_id(i, j)] = x[static_cast<int64_t>(j - 1) * (nx - 1) + (i - 1)];
            else if (g)
                u.values[mesh.node_id(i, j)] = g(mesh.lo[0] + i * mesh.h(0), mesh.lo[1] + j * mesh.h(1));
        }
    return u;
}

// ---------------------------------------------------------------------------
// Cell problems
// ---------------------------------------------------------------------------

FemSolution solve_cell_problem_1d(int n_cells, const ScalarField1& A_frozen) {
    const int n = n_cells;
    if (n < 3) throw ConfigError("solve_cell_problem_1d: need at least 3 cells");
    const double h = 1.0 / n;
    std::vector<double> a(n);
    for (int e = 0; e < n; ++e) {
        a[e] = A_frozen(wrap01((e + 0.5) * h));
        if (!(a[e] > 0.0)) throw NumericError("solve_cell_problem_1d: non-positive coefficient");
    }
    // periodic tridiagonal-with-wrap system over n unique nodes
    std::vector<std::array<double, 3>> trip;
    std::vector<double> rhs(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const int em = (i + n - 1) % n; // element left of node i
        const int ep = i;               // element right of node i
        trip.push_back({double(i), double(i), (a[em] + a[ep]) / h});
        trip.push_back({double(i), double((i + 1) % n), -a[ep] / h});
        trip.push_back({double(i), double((i + n - 1) % n), -a[em] / h});
        rhs[i] = a[ep] - a[em];
    }
    SparseSystem sys = SparseSystem::from_triplets(n, std::move(trip), std::move(rhs));
    std::vector<double> chi(n, 0.0);
    conjugate_gradient(sys, chi, 1e-12, 100000, Precond::jacobi, true);

    std::vector<double> tmp(chi);
    const double mean = num::pairwise_sum(tmp) / n;
    for (double& v : chi) v -= mean;

    FemSolution sol;
    sol.mesh = Mesh::line(0.0, 1.0, n);
    sol.bc = BcKind::periodic;
    sol.values = std::move(chi);
    return sol;
}

FemSolution solve_cell_problem_2d(int n_cells, const ScalarField2& A_frozen, int direction,
                                  double cg_tol, int cg_max_iters) {
    const int n = n_cells;
    if (n < 3) throw ConfigError("solve_cell_problem_2d: need at least 3 cells");
    if (direction < 0 || direction > 1) throw UsageError("solve_cell_problem_2d: direction 0 or 1");
    const double h = 1.0 / n;
    const double area3 = 0.5 * h * h / 3.0;
    const int64_t m = static_cast<int64_t>(n) * n;
    auto pid = [&](int i, int j) -> int64_t {
        return static_cast<int64_t>((j % n + n) % n) * n + ((i % n + n) % n);
    };

    SparseSystem s;
    s.n = m;
    s.row_ptr.assign(m + 1, 0);
    s.rhs.assign(m, 0.0);
    std::atomic<bool> elliptic{true};

    auto build_row = [&](int64_t r, RowEntry out[16], double& rhs_out, bool& ok) -> int {
        const int i = static_cast<int>(r % n);
        const int j = static_cast<int>(r / n);
        int ncol = 0;
        RowEntry acc[16];
        double rhs = 0.0;
        auto add = [&](int32_t c, double v) {
            for (int k = 0; k < ncol; ++k)
                if (acc[k].col == c) {
                    acc[k].val += v;
                    return;
                }
            acc[ncol++] = {c, v};
        };
        for (int sj = j - 1; sj <= j; ++sj) {
            for (int si = i - 1; si <= i; ++si) {
                const double x0 = si * h, y0 = sj * h;
                for (int t = 0; t < 2; ++t) {
                    int self = -1;
                    for (int v = 0; v < 3; ++v)
                        if (pid(si + tri_vi[t][v], sj + tri_vj[t][v]) == r) self = v;
                    if (self < 0) continue;
                    const TriGeom geom = tri_geom(t, h, h);
                    double qa = 0.0;
                    for (int q = 0; q < 3; ++q) {
                        const double aq =
                            A_frozen(wrap01(x0 + geom.mid[q][0]), wrap01(y0 + geom.mid[q][1]));
                        if (!(aq > 0.0)) ok = false;
                        qa += aq;
                    }
                    rhs -= area3 * qa * geom.grad[self][direction];
                    for (int v = 0; v < 3; ++v) {
                        const double k = area3 * qa *
                                         (geom.grad[self][0] * geom.grad[v][0] +
                                          geom.grad[self][1] * geom.grad[v][1]);
                        add(static_cast<int32_t>(pid(si + tri_vi[t][v], sj + tri_vj[t][v])), k);
                    }
                }
            }
        }
        std::sort(acc, acc + ncol,
                  [](const RowEntry& a, const RowEntry& b) { return a.col < b.col; });
        for (int k = 0; k < ncol; ++k) out[k] = acc[k];
        rhs_out = rhs;
        return ncol;
    };

#pragma omp parallel for schedule(static) if (m > 4096)
    for (int64_t r = 0; r < m; ++r) {
        RowEntry row[16];
        double rv;
        bool ok = true;
        s.row_ptr[r + 1] = build_row(r, row, rv, ok);
        if (!ok) elliptic = false;
    }
    if (!elliptic) throw NumericError("solve_cell_problem_2d: non-positive coefficient");
    for (int64_t r = 0; r < m; ++r) s.row_ptr[r + 1] += s.row_ptr[r];
    s.col.assign(s.row_ptr[m], 0);
    s.val.assign(s.row_ptr[m], 0.0);
#pragma omp parallel for schedule(static) if (m > 4096)
    for (int64_t r = 0; r < m; ++r) {
        RowEntry row[16];
        double rv;
        bool ok = true;
        const int nc = build_row(r, row, rv, ok);
        for (int k = 0; k < nc; ++k) {
            s.col[s.row_ptr[r] + k] = row[k].col;
            s.val[s.row_ptr[r] + k] = row[k].val;
        }
        s.rhs[r] = rv;
    }

    std::vector<double> chi(m, 0.0);
    conjugate_gradient(s, chi, cg_tol, cg_max_iters, Precond::jacobi, true);
    std::vector<double> tmp(chi);
    const double mean = num::pairwise_sum(tmp) / static_cast<double>(m);
    for (double& v : chi) v -= mean;

    FemSolution sol;
    sol.mesh = Mesh::box({0.0, 0.0}, {1.0, 1.0}, n, n);
    sol.bc = BcKind::periodic;
    sol.values = std::move(chi);
    return sol;
}

// ---------------------------------------------------------------------------
// Evaluation / IO
// ---------------------------------------------------------------------------

double FemSolution::eval1(double x) const {
    const int n = mesh.n[0];
    const double h = mesh.h(0);
    if (bc == BcKind::periodic) {
        double s = (x - mesh.lo[0]) / (mesh.hi[0] - mesh.lo[0]);
        s -= std::floor(s);
        const double xi = s * n;
        const int e = std::min(static_cast<int>(xi), n - 1);
        const double t = xi - e;
        return values[e] * (1.0 - t) + values[(e + 1) % n] * t;
    }
    double xi = (x - mesh.lo[0]) / h;
    const int e = std::clamp(static_cast<int>(xi), 0, n - 1);
    const double t = xi - e;
    return values[e] * (1.0 - t) + values[e + 1] * t;
}

double FemSolution::eval2(double x, double y) const {
    const int nx = mesh.n[0], ny = mesh.n[1];
    const double hx = mesh.h(0), hy = mesh.h(1);
    auto node_val = [&](int i, int j) -> double {
        if (bc == BcKind::periodic) return values[static_cast<int64_t>(j % ny) * nx + (i % nx)];
        return values[mesh.node_id(i, j)];
    };
    double sx = (x - mesh.lo[0]) / hx, sy = (y - mesh.lo[1]) / hy;
    if (bc == BcKind::periodic) {
        sx -= std::floor(sx / nx) * nx;
        sy -= std::floor(sy / ny) * ny;
    }
    const int i = std::clamp(static_cast<int>(sx), 0, nx - 1);
    const int j = std::clamp(static_cast<int>(sy), 0, ny - 1);
    const double xi = sx - i, eta = sy - j;
    const double u00 = node_val(i, j), u10 = node_val(i + 1, j);
    const double u11 = node_val(i + 1, j + 1), u01 = node_val(i, j + 1);
    if (xi >= eta) return u00 + xi * (u10 - u00) + eta * (u11 - u10);
    return u00 + xi * (u11 - u01) + eta * (u01 - u00);
}

void FemSolution::export_csv(const std::string& path) const {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw ConfigError("FemSolution::export_csv: cannot open " + path);
    if (mesh.dim == 1) {
        std::fprintf(fp, "x,value\n");
        const int count = (bc == BcKind::periodic) ? mesh.n[0] : mesh.n[0] + 1;
        for (int i = 0; i < count; ++i)
            std::fprintf(fp, "%.17g,%.17g\n", mesh.node_x(i), values[i]);
    } else {
        std::fprintf(fp, "x,y,value\n");
        const int cx = (bc == BcKind::periodic) ? mesh.n[0] : mesh.n[0] + 1;
        const int cy = (bc == BcKind::periodic) ? mesh.n[1] : mesh.n[1] + 1;
        for (int j = 0; j < cy; ++j)
            for (int i = 0; i < cx; ++i) {
                const auto xy = mesh.node_xy(i, j);
                const double v = (bc == BcKind::periodic)
                                     ? values[static_cast<int64_t>(j) * mesh.n[0] + i]
                                     : values[mesh.node_id(i, j)];
                std::fprintf(fp, "%.17g,%.17g,%.17g\n", xy[0], xy[1], v);
            }
    }
    std::fclose(fp);
}

void FemSolution::save_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("FemSolution::save_binary: cannot open " + path);
    const char magic[8] = {'G', 'L', 'F', 'E', 'M', '0', '0', '1'};
    out.write(magic, 8);
    const int32_t dim = mesh.dim, bck = static_cast<int32_t>(bc);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&bck), 4);
    out.write(reinterpret_cast<const char*>(mesh.lo.data()), 16);
    out.write(reinterpret_cast<const char*>(mesh.hi.data()), 16);
    out.write(reinterpret_cast<const char*>(mesh.n.data()), 8);
    const int64_t count = static_cast<int64_t>(values.size());
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(values.data()), count * 8);
}

FemSolution FemSolution::load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("FemSolution::load_binary: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "GLFEM001", 8) != 0)
        throw ConfigError("FemSolution::load_binary: bad header in " + path);
    FemSolution s;
    int32_t dim = 0, bck = 0;
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&bck), 4);
    s.mesh.dim = dim;
    s.bc = static_cast<BcKind>(bck);
    in.read(reinterpret_cast<char*>(s.mesh.lo.data()), 16);
    in.read(reinterpret_cast<char*>(s.mesh.hi.data()), 16);
    in.read(reinterpret_cast<char*>(s.mesh.n.data()), 8);
    int64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    s.values.assign(count, 0.0);
    in.read(reinterpret_cast<char*>(s.values.data()), count * 8);
    if (!in) throw ConfigError("FemSolution::load_binary: truncated file " + path);
    return s;
}

double average_flux_2d(const FemSolution& u, const ScalarField2& A, int direction) {
    const Mesh& mesh = u.mesh;
    const int nx = mesh.n[0], ny = mesh.n[1];
    const double hx = mesh.h(0), hy = mesh.h(1);
    const double area3 = 0.5 * hx * hy / 3.0;
    double total = 0.0;
    for (int sj = 0; sj < ny; ++sj)
        for (int si = 0; si < nx; ++si) {
            const double x0 = mesh.lo[0] + si * hx, y0 = mesh.lo[1] + sj * hy;
            for (int t = 0; t < 2; ++t) {
                const TriGeom geom = tri_geom(t, hx, hy);
                double grad_d = 0.0;
                for (int v = 0; v < 3; ++v)
                    grad_d += geom.grad[v][direction] *
                              u.values[mesh.node_id(si + tri_vi[t][v], sj + tri_vj[t][v])];
                double qa = 0.0;
                for (int q = 0; q < 3; ++q)
                    qa += A(x0 + geom.mid[q][0], y0 + geom.mid[q][1]);
                total += area3 * qa * grad_d;
            }
        }
    const double domain = (mesh.hi[0] - mesh.lo[0]) * (mesh.hi[1] - mesh.lo[1]);
    return total / domain;
}

} // namespace glimit::fem
