#pragma once

// PINN training: residual + data loss with adaptive weights, ADAM with
// plateau learning-rate decay, full-batch L-BFGS with strong Wolfe line
// search, and the multi-restart driver. Loss evaluation shards points into
// fixed-size chunks merged in chunk order, so results are bit-identical for
// any thread count; a plain serial accumulation is kept as a test reference.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glimit/autodiff.hpp"
#include "glimit/dataset.hpp"
#include "glimit/errors.hpp"
#include "glimit/network.hpp"

namespace glimit::train {

// Two networks plus the hard boundary constraint. The coefficient network
// takes x (1D) or x2 only (2D, two outputs for the diagonal entries).
struct PinnModel {
    int dim = 1;
    net::MlpSpec u_spec, a_spec;
    net::Params u_params, a_params;
    net::BoundaryWrapper wrapper;
    bool positivity = true;
    double positivity_floor = 1e-3;

    int param_count() const { return u_spec.param_count() + a_spec.param_count(); }
    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> p);

    double u0_1d(double x) const;
    double u0_2d(double x1, double x2) const;
    double astar_1d(double x) const;
    std::array<double, 2> astar_2d(double x2) const;
};

// residual of the homogenized equation with the divergence expanded:
// div(A grad u) + f = dA.grad u + A lap u + f (diagonal 2D case)
template <class T>
T residual_1d(const T& a, const T& da, const T& du, const T& d2u, const T& f) {
    return da * du + a * d2u + f;
}

template <class T>
T residual_2d(const std::array<T, 2>& a, const std::array<T, 2>& da_i, const std::array<T, 2>& du,
              const std::array<T, 2>& d2u_diag, const T& f) {
    return da_i[0] * du[0] + a[0] * d2u_diag[0] + da_i[1] * du[1] + a[1] * d2u_diag[1] + f;
}

struct LossState {
    double lambda_r = 1.0; // fixed by convention
    double lambda_d = 1.0; // adaptive
    double alpha_w = 0.1;
    int update_period = 10; // epochs between weight updates

    struct HistEntry {
        int64_t epoch;
        double l_r, l_d, lambda_d;
    };
    std::vector<HistEntry> history;
};

struct LossValue {
    double total = 0.0;
    double l_r = 0.0;
    double l_d = 0.0;
    std::vector<double> grad_total; // d total / d theta (u params then a params)
    std::vector<double> grad_lr;    // d L_r / d theta (unweighted)
    std::vector<double> grad_ld;    // d L_d / d theta (unweighted)
};

using SourceFn = std::function<double(std::array<double, 2>)>;

// Chunked, deterministic loss + gradients. Point sets are spans so minibatch
// evaluation reuses the same path.
LossValue loss(const PinnModel& model, const SourceFn& f,
               std::span<const std::array<double, 2>> data_pts, std::span<const double> data_vals,
               std::span<const std::array<double, 2>> res_pts, const LossState& state,
               bool want_grads = true);

// Serial reference: plain left-to-right accumulation over points, no chunking.
LossValue loss_serial_reference(const PinnModel& model, const SourceFn& f,
                                std::span<const std::array<double, 2>> data_pts,
                                std::span<const double> data_vals,
                                std::span<const std::array<double, 2>> res_pts,
                                const LossState& state, bool want_grads = true);

// lambda_hat = max|grad_Lr| / mean|grad_Ld|, then a moving average on
// lambda_d; a vanishing data gradient keeps the previous weight.
void update_adaptive_weights(LossState& state, std::span<const double> grad_lr,
                             std::span<const double> grad_ld);

struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double lr = 1e-3;

    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }
};

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state);

struct LbfgsOptions {
    int history = 50;
    double c1 = 1e-4, c2 = 0.9;  // strong Wolfe
    double grad_tol = 1e-8;      // ||g||_inf
    double rel_tol = 1e-12;      // relative loss decrease
    double curvature_min = 1e-12; // s.y acceptance
    int max_line_trials = 50;
};

struct LbfgsReport {
    int iterations = 0;
    bool line_search_failed = false;
    double final_loss = 0.0;
    double grad_inf = 0.0;
};

// loss closure: fills grad and returns the loss (deterministic, full batch)
using LossClosure = std::function<double(std::span<const double>, std::span<double>)>;

LbfgsReport lbfgs_run(std::vector<double>& params, const LossClosure& f, int max_iters,
                      const LbfgsOptions& opt = {});

struct TrainConfig {
    int adam_epochs = 10000; // one minibatch gradient step per epoch
    int batch_data = 64;     // data points per minibatch; T_r shares the fraction
    double lr0 = 1e-3;
    int lbfgs_iters = 500;
    int restarts = 5;
    int cycles = 1; // ADAM->L-BFGS rounds
    uint64_t init_seed = 1;
    bool positivity = true;
    int weight_update_period = 10;
    double weight_alpha = 0.1;
    // plateau decay: halve lr when the best minibatch total fails to improve
    // by plateau_min_rel over plateau_window epochs; floor at lr0 * lr_floor
    int plateau_window = 2000;
    double plateau_min_rel = 1e-3;
    double lr_floor = 0.01;
    int log_every = 1;
};

struct LogRow {
    int64_t epoch;
    double l_r, l_d, lambda_d, lr, wall_ms;
};

struct TrainResult {
    PinnModel best;
    int best_restart = 0;
    double best_final_loss = 0.0;
    std::vector<double> final_losses; // per restart (inf for diverged)
    std::vector<LogRow> log;          // best restart
    bool any_line_search_warning = false;
};

// Multi-restart driver: per restart an ADAM phase then full-batch L-BFGS
// (cycled if configured); picks the restart with the lowest final full-batch
// total loss. Restarts run in parallel; results are restart-order stable.
TrainResult train(const PinnModel& prototype, const SourceFn& f, const data::SampleSet& td,
                  const data::CollocationSet& tr, const TrainConfig& cfg);

void write_log_csv(std::span<const LogRow> log, const std::string& path);

} // namespace glimit::train
