// Timing comparison of the OpenMP kernels against their serial references:
// loss/gradient evaluation, 2D FEM assembly, sparse matvec, and Monte-Carlo
// coefficient averaging.

#include <chrono>
#include <cstdio>
#include <vector>
#include <omp.h>

#include "glimit/bench.hpp"
#include "glimit/fem.hpp"
#include "glimit/homogenize.hpp"
#include "glimit/training.hpp"

using namespace glimit;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

void row(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s %10.4f s %10.4f s %8.2fx\n", name, serial_s, parallel_s,
                serial_s / parallel_s);
}

} // namespace

int main() {
    const int threads = omp_get_max_threads();
    std::printf("kernel benchmark, %d threads\n", threads);
    std::printf("%-28s %12s %12s %9s\n", "kernel", "serial", "parallel", "speedup");

    // --- PINN loss + gradient (locper1d shape) ---
    {
        bench::RunConfig cfg;
        cfg.benchmark = "locper1d";
        cfg = bench::resolve(cfg);
        train::PinnModel model = bench::make_model(cfg);
        const auto& b = bench::benchmark(cfg.benchmark);
        data::CollocationSet tr = data::make_collocation(1, b.lo, b.hi, 190,
                                                         data::CollocationMode::grid, 1);
        data::SampleSet td;
        td.dim = 1;
        for (int i = 1; i <= 160; ++i) {
            const double x = i / 161.0;
            td.points.push_back({x, 0.0});
            td.values.push_back(x * (1.0 - x));
        }
        train::LossState state;
        auto run_parallel = [&] {
            (void)train::loss(model, b.f, td.points, td.values, tr.points, state, true);
        };
        auto run_serial = [&] {
            (void)train::loss_serial_reference(model, b.f, td.points, td.values, tr.points, state,
                                               true);
        };
        row("loss+grad (1D, full batch)", time_best_of(3, run_serial),
            time_best_of(3, run_parallel));
    }

    // --- 2D FEM assembly ---
    {
        const fem::Mesh mesh = fem::Mesh::box({1.0, 1.0}, {2.0, 2.0}, 512, 512);
        auto A = [](double x, double y) -> std::array<double, 2> {
            const double a = 1.0 + 0.9 * std::sin(32.0 * x) * std::sin(32.0 * y * y);
            return {a, a};
        };
        auto f = [](double, double) { return 1.0; };
        const double ts = time_best_of(3, [&] {
            (void)fem::assemble_dirichlet_2d_serial(mesh, A, f, nullptr);
        });
        const double tp = time_best_of(3, [&] {
            (void)fem::assemble_dirichlet_2d(mesh, A, f, nullptr);
        });
        row("fem assembly (512^2)", ts, tp);
    }

    // --- sparse matvec ---
    {
        const fem::Mesh mesh = fem::Mesh::box({0.0, 0.0}, {1.0, 1.0}, 1024, 1024);
        auto A = [](double, double) -> std::array<double, 2> { return {1.0, 1.0}; };
        auto f = [](double, double) { return 1.0; };
        const fem::SparseSystem sys = fem::assemble_dirichlet_2d(mesh, A, f, nullptr);
        std::vector<double> x(sys.n, 1.0), y(sys.n, 0.0);
        const double tp = time_best_of(5, [&] {
            for (int k = 0; k < 20; ++k) sys.spmv(x, y);
        });
        const double ts = time_best_of(5, [&] {
            for (int k = 0; k < 20; ++k)
                for (int64_t i = 0; i < sys.n; ++i) {
                    double s = 0.0;
                    for (int64_t kk = sys.row_ptr[i]; kk < sys.row_ptr[i + 1]; ++kk)
                        s += sys.val[kk] * x[sys.col[kk]];
                    y[i] = s;
                }
        });
        row("spmv x20 (1023^2 dofs)", ts, tp);
    }

    // --- Monte-Carlo coefficient averaging ---
    {
        auto A = [](double x, double w1, double w2) {
            return 3.1 + (x + 1.0) * std::sin(2.0 * M_PI * w1) + std::sin(2.0 * M_PI * w2);
        };
        std::vector<double> grid(257);
        for (int i = 0; i <= 256; ++i) grid[i] = i / 256.0;
        const double tp = time_best_of(3, [&] {
            (void)hom::glimit_ergodic_mc(A, grid, 100000, 7);
        });
        const double ts = time_best_of(3, [&] {
            const int prev = omp_get_max_threads();
            omp_set_num_threads(1);
            (void)hom::glimit_ergodic_mc(A, grid, 100000, 7);
            omp_set_num_threads(prev);
        });
        row("ergodic MC (1e5 x 257)", ts, tp);
    }

    return 0;
}
