#include "glimit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <omp.h>

#include "glimit/numerics.hpp"

namespace glimit::train {

using ad::Rev;
using ad::Tape;
using ad::TapeScope;

// ---------------------------------------------------------------------------
// PinnModel
// ---------------------------------------------------------------------------

std::vector<double> PinnModel::flat_params() const {
    std::vector<double> p;
    p.reserve(param_count());
    p.insert(p.end(), u_params.flat.begin(), u_params.flat.end());
    p.insert(p.end(), a_params.flat.begin(), a_params.flat.end());
    return p;
}

void PinnModel::set_flat_params(std::span<const double> p) {
    if (static_cast<int>(p.size()) != param_count())
        throw UsageError("PinnModel::set_flat_params: size mismatch");
    std::copy(p.begin(), p.begin() + u_params.flat.size(), u_params.flat.begin());
    std::copy(p.begin() + u_params.flat.size(), p.end(), a_params.flat.begin());
}

double PinnModel::u0_1d(double x) const {
    const double in[1] = {x};
    const double raw = net::mlp_eval1<double, double>(
        u_spec, u_params.flat, std::span<const double>(in, 1));
    return wrapper.solution(std::span<const double>(in, 1), raw);
}

double PinnModel::u0_2d(double x1, double x2) const {
    const double in[2] = {x1, x2};
    const double raw = net::mlp_eval1<double, double>(
        u_spec, u_params.flat, std::span<const double>(in, 2));
    return wrapper.solution(std::span<const double>(in, 2), raw);
}

double PinnModel::astar_1d(double x) const {
    const double in[1] = {x};
    const double raw = net::mlp_eval1<double, double>(
        a_spec, a_params.flat, std::span<const double>(in, 1));
    return positivity ? positivity_floor + ad::softplus_val(raw) : raw;
}

std::array<double, 2> PinnModel::astar_2d(double x2) const {
    const double in[1] = {x2};
    std::array<double, 2> out{};
    net::mlp_eval<double, double>(a_spec, a_params.flat, std::span<const double>(in, 1), out);
    if (positivity)
        for (double& a : out) a = positivity_floor + ad::softplus_val(a);
    return out;
}

// ---------------------------------------------------------------------------
// Recorded point terms
// ---------------------------------------------------------------------------

namespace {

std::vector<Rev> register_params(std::span<const double> flat) {
    std::vector<Rev> w(flat.size());
    for (size_t i = 0; i < flat.size(); ++i) w[i] = Rev::param(flat[i]);
    return w;
}

// |residual|^2 at one collocation point, recorded on the active tape
Rev residual_sq_rev(const PinnModel& m, std::span<const Rev> wu, std::span<const Rev> wa,
                    const std::array<double, 2>& p, double fval) {
    if (m.dim == 1) {
        using DU = ad::Dual2<Rev, 1>;
        using DA = ad::Dual1<Rev, 1>;
        const std::array<DU, 1> xin{DU::input(Rev(p[0]), 0)};
        const DU raw = net::mlp_eval1<DU, Rev>(m.u_spec, wu, std::span<const DU>(xin));
        const DU u = net::wrap_solution<Rev, 1>(m.wrapper, std::span<const DU>(xin), raw);
        const std::array<DA, 1> ain{DA::input(Rev(p[0]), 0)};
        DA a = net::mlp_eval1<DA, Rev>(m.a_spec, wa, std::span<const DA>(ain));
        if (m.positivity) a = softplus(a) + m.positivity_floor;
        const Rev r = residual_1d<Rev>(a.v, a.g[0], u.g[0], u.h[0], Rev(fval));
        return r * r;
    }
    using DU = ad::Dual2<Rev, 2>;
    using DA = ad::Dual1<Rev, 2>;
    const std::array<DU, 2> xin{DU::input(Rev(p[0]), 0), DU::input(Rev(p[1]), 1)};
    const DU raw = net::mlp_eval1<DU, Rev>(m.u_spec, wu, std::span<const DU>(xin));
    const DU u = net::wrap_solution<Rev, 2>(m.wrapper, std::span<const DU>(xin), raw);
    // coefficient network sees x2 only; its two outputs are the diagonal entries
    const std::array<DA, 1> ain{DA::input(Rev(p[1]), 1)};
    std::array<DA, 2> aout;
    net::mlp_eval<DA, Rev>(m.a_spec, wa, std::span<const DA>(ain), aout);
    if (m.positivity)
        for (DA& a : aout) a = softplus(a) + m.positivity_floor;
    const Rev r = residual_2d<Rev>({aout[0].v, aout[1].v}, {aout[0].g[0], aout[1].g[1]},
                                   {u.g[0], u.g[1]}, {u.hess(0, 0), u.hess(1, 1)}, Rev(fval));
    return r * r;
}

// |u(x) - u_data|^2; only the solution value is needed, so this runs on plain
// tape scalars (no spatial dual blocks)
Rev data_sq_rev(const PinnModel& m, std::span<const Rev> wu, const std::array<double, 2>& p,
                double value) {
    Rev raw;
    if (m.dim == 1) {
        const std::array<Rev, 1> xin{Rev(p[0])};
        raw = net::mlp_eval1<Rev, Rev>(m.u_spec, wu, std::span<const Rev>(xin));
    } else {
        const std::array<Rev, 2> xin{Rev(p[0]), Rev(p[1])};
        raw = net::mlp_eval1<Rev, Rev>(m.u_spec, wu, std::span<const Rev>(xin));
    }
    const double bubble = m.wrapper.bubble(std::span<const double>(p.data(), m.dim));
    const Rev diff = raw * Rev(bubble) - Rev(value);
    return diff * diff;
}

constexpr int kResidualChunk = 8;
constexpr int kDataChunk = 64;

Tape& thread_tape() {
    static thread_local Tape tape;
    return tape;
}

// cold path: locate and report the first point with a non-finite term
[[noreturn]] void report_bad_point(const PinnModel& model, const SourceFn& f,
                                   std::span<const std::array<double, 2>> data_pts,
                                   std::span<const double> data_vals,
                                   std::span<const std::array<double, 2>> res_pts) {
    const std::vector<double> flat = model.flat_params();
    Tape& tape = thread_tape();
    for (size_t i = 0; i < res_pts.size(); ++i) {
        tape.clear();
        TapeScope scope(tape);
        const auto w = register_params(flat);
        const auto wu = std::span<const Rev>(w.data(), model.u_spec.param_count());
        const auto wa = std::span<const Rev>(w.data() + model.u_spec.param_count(),
                                             model.a_spec.param_count());
        const Rev t = residual_sq_rev(model, wu, wa, res_pts[i], f(res_pts[i]));
        if (!std::isfinite(t.v))
            throw NumericError("loss: non-finite residual term at collocation point " +
                               std::to_string(i));
    }
    for (size_t i = 0; i < data_pts.size(); ++i) {
        tape.clear();
        TapeScope scope(tape);
        const auto w = register_params(flat);
        const auto wu = std::span<const Rev>(w.data(), model.u_spec.param_count());
        const Rev t = data_sq_rev(model, wu, data_pts[i], data_vals[i]);
        if (!std::isfinite(t.v))
            throw NumericError("loss: non-finite data term at sample point " + std::to_string(i));
    }
    throw NumericError("loss: non-finite value");
}

} // namespace

LossValue loss(const PinnModel& model, const SourceFn& f,
               std::span<const std::array<double, 2>> data_pts, std::span<const double> data_vals,
               std::span<const std::array<double, 2>> res_pts, const LossState& state,
               bool want_grads) {
    const int P = model.param_count();
    const int pu = model.u_spec.param_count();
    const std::vector<double> flat = model.flat_params();

    const int64_t n_res = static_cast<int64_t>(res_pts.size());
    const int64_t n_dat = static_cast<int64_t>(data_pts.size());
    const int64_t n_rch = (n_res + kResidualChunk - 1) / kResidualChunk;
    const int64_t n_dch = (n_dat + kDataChunk - 1) / kDataChunk;

    std::vector<double> chunk_val(n_rch + n_dch, 0.0);
    std::vector<std::vector<double>> chunk_grad;
    if (want_grads) chunk_grad.assign(n_rch + n_dch, std::vector<double>());

// fixed chunk boundaries and fixed merge order make the result independent
// of the thread count
#pragma omp parallel for schedule(dynamic, 1) if (!omp_in_parallel())
    for (int64_t c = 0; c < n_rch + n_dch; ++c) {
        Tape& tape = thread_tape();
        tape.clear();
        TapeScope scope(tape);
        const auto w = register_params(flat);
        const auto wu = std::span<const Rev>(w.data(), pu);
        const auto wa = std::span<const Rev>(w.data() + pu, P - pu);
        Rev sum(0.0);
        if (c < n_rch) {
            const int64_t b = c * kResidualChunk;
            const int64_t e = std::min(n_res, b + kResidualChunk);
            for (int64_t i = b; i < e; ++i)
                sum += residual_sq_rev(model, wu, wa, res_pts[i], f(res_pts[i]));
        } else {
            const int64_t b = (c - n_rch) * kDataChunk;
            const int64_t e = std::min(n_dat, b + kDataChunk);
            for (int64_t i = b; i < e; ++i)
                sum += data_sq_rev(model, wu, data_pts[i], data_vals[i]);
        }
        chunk_val[c] = sum.v;
        if (want_grads) {
            chunk_grad[c].assign(P, 0.0);
            if (sum.i >= 0) tape.reverse_into(sum.i, chunk_grad[c]);
        }
    }

    LossValue lv;
    const double sum_r =
        num::pairwise_sum(std::span<const double>(chunk_val.data(), n_rch));
    const double sum_d =
        num::pairwise_sum(std::span<const double>(chunk_val.data() + n_rch, n_dch));
    lv.l_r = n_res > 0 ? sum_r / static_cast<double>(n_res) : 0.0;
    lv.l_d = n_dat > 0 ? sum_d / static_cast<double>(n_dat) : 0.0;
    lv.total = state.lambda_r * lv.l_r + state.lambda_d * lv.l_d;
    if (!std::isfinite(lv.total)) report_bad_point(model, f, data_pts, data_vals, res_pts);

    if (want_grads) {
        lv.grad_lr.assign(P, 0.0);
        lv.grad_ld.assign(P, 0.0);
        for (int64_t c = 0; c < n_rch; ++c)
            for (int j = 0; j < P; ++j) lv.grad_lr[j] += chunk_grad[c][j];
        for (int64_t c = n_rch; c < n_rch + n_dch; ++c)
            for (int j = 0; j < P; ++j) lv.grad_ld[j] += chunk_grad[c][j];
        if (n_res > 0)
            for (double& gj : lv.grad_lr) gj /= static_cast<double>(n_res);
        if (n_dat > 0)
            for (double& gj : lv.grad_ld) gj /= static_cast<double>(n_dat);
        lv.grad_total.assign(P, 0.0);
        for (int j = 0; j < P; ++j)
            lv.grad_total[j] = state.lambda_r * lv.grad_lr[j] + state.lambda_d * lv.grad_ld[j];
        for (int j = 0; j < P; ++j)
            if (!std::isfinite(lv.grad_total[j]))
                report_bad_point(model, f, data_pts, data_vals, res_pts);
    }
    return lv;
}

LossValue loss_serial_reference(const PinnModel& model, const SourceFn& f,
                                std::span<const std::array<double, 2>> data_pts,
                                std::span<const double> data_vals,
                                std::span<const std::array<double, 2>> res_pts,
                                const LossState& state, bool want_grads) {
    const int P = model.param_count();
    const int pu = model.u_spec.param_count();
    const std::vector<double> flat = model.flat_params();
    Tape tape;
    TapeScope scope(tape);
    const auto w = register_params(flat);
    const auto wu = std::span<const Rev>(w.data(), pu);
    const auto wa = std::span<const Rev>(w.data() + pu, P - pu);

    Rev sum_r(0.0), sum_d(0.0);
    for (size_t i = 0; i < res_pts.size(); ++i)
        sum_r += residual_sq_rev(model, wu, wa, res_pts[i], f(res_pts[i]));
    for (size_t i = 0; i < data_pts.size(); ++i)
        sum_d += data_sq_rev(model, wu, data_pts[i], data_vals[i]);

    LossValue lv;
    lv.l_r = res_pts.empty() ? 0.0 : sum_r.v / static_cast<double>(res_pts.size());
    lv.l_d = data_pts.empty() ? 0.0 : sum_d.v / static_cast<double>(data_pts.size());
    lv.total = state.lambda_r * lv.l_r + state.lambda_d * lv.l_d;
    if (want_grads) {
        lv.grad_lr.assign(P, 0.0);
        lv.grad_ld.assign(P, 0.0);
        if (sum_r.i >= 0) tape.reverse_into(sum_r.i, lv.grad_lr);
        if (sum_d.i >= 0) tape.reverse_into(sum_d.i, lv.grad_ld);
        if (!res_pts.empty())
            for (double& gj : lv.grad_lr) gj /= static_cast<double>(res_pts.size());
        if (!data_pts.empty())
            for (double& gj : lv.grad_ld) gj /= static_cast<double>(data_pts.size());
        lv.grad_total.assign(P, 0.0);
        for (int j = 0; j < P; ++j)
            lv.grad_total[j] = state.lambda_r * lv.grad_lr[j] + state.lambda_d * lv.grad_ld[j];
    }
    return lv;
}

void update_adaptive_weights(LossState& state, std::span<const double> grad_lr,
                             std::span<const double> grad_ld) {
    double max_r = 0.0, mean_d = 0.0;
    for (double g : grad_lr) {
        if (!std::isfinite(g)) throw NumericError("update_adaptive_weights: non-finite gradient");
        max_r = std::max(max_r, std::abs(g));
    }
    for (double g : grad_ld) {
        if (!std::isfinite(g)) throw NumericError("update_adaptive_weights: non-finite gradient");
        mean_d += std::abs(g);
    }
    mean_d /= std::max<size_t>(1, grad_ld.size());
    if (mean_d == 0.0) return; // keep previous weight
    const double lambda_hat = max_r / mean_d;
    state.lambda_d = (1.0 - state.alpha_w) * state.lambda_d + state.alpha_w * lambda_hat;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& st) {
    if (params.size() != grad.size() || params.size() != st.m.size())
        throw UsageError("adam_step: shape mismatch");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (size_t j = 0; j < params.size(); ++j) {
        st.m[j] = st.beta1 * st.m[j] + (1.0 - st.beta1) * grad[j];
        st.v[j] = st.beta2 * st.v[j] + (1.0 - st.beta2) * grad[j] * grad[j];
        const double mhat = st.m[j] / bc1;
        const double vhat = st.v[j] / bc2;
        params[j] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

// ---------------------------------------------------------------------------
// L-BFGS with strong Wolfe line search
// ---------------------------------------------------------------------------

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct LinePoint {
    double alpha = 0.0, phi = 0.0, dphi = 0.0;
};

} // namespace

LbfgsReport lbfgs_run(std::vector<double>& x, const LossClosure& f, int max_iters,
                      const LbfgsOptions& opt) {
    const size_t n = x.size();
    std::vector<double> g(n), x_trial(n), g_trial(n);
    double fx = f(x, g);
    if (!std::isfinite(fx)) throw NumericError("lbfgs_run: non-finite initial loss");

    LbfgsReport rep;
    rep.final_loss = fx;
    rep.grad_inf = inf_norm(g);
    if (rep.grad_inf < opt.grad_tol) return rep;

    std::vector<std::vector<double>> S, Y;
    std::vector<double> rho;
    std::vector<double> p(n), q(n);

    auto two_loop = [&](std::span<const double> grad) {
        q.assign(grad.begin(), grad.end());
        const int m = static_cast<int>(S.size());
        std::vector<double> a(m);
        for (int i = m - 1; i >= 0; --i) {
            a[i] = rho[i] * dot(S[i], q);
            for (size_t j = 0; j < n; ++j) q[j] -= a[i] * Y[i][j];
        }
        double gamma = 1.0;
        if (m > 0) gamma = dot(S[m - 1], Y[m - 1]) / dot(Y[m - 1], Y[m - 1]);
        for (size_t j = 0; j < n; ++j) q[j] *= gamma;
        for (int i = 0; i < m; ++i) {
            const double b = rho[i] * dot(Y[i], q);
            for (size_t j = 0; j < n; ++j) q[j] += S[i][j] * (a[i] - b);
        }
        for (size_t j = 0; j < n; ++j) p[j] = -q[j];
    };

    // phi(alpha) evaluation along p from x
    auto eval_phi = [&](double alpha) -> LinePoint {
        for (size_t j = 0; j < n; ++j) x_trial[j] = x[j] + alpha * p[j];
        const double phi = f(x_trial, g_trial);
        return {alpha, phi, dot(g_trial, p)};
    };

    for (int iter = 1; iter <= max_iters; ++iter) {
        two_loop(g);
        double dphi0 = dot(g, p);
        if (!(dphi0 < 0.0)) { // not a descent direction: steepest-descent fallback
            for (size_t j = 0; j < n; ++j) p[j] = -g[j];
            dphi0 = -dot(g, g);
            if (!(dphi0 < 0.0)) break; // zero gradient
        }
        const double phi0 = fx;

        int trials = 0;
        bool accepted = false;
        LinePoint acc;
        auto zoom = [&](LinePoint lo, LinePoint hi) {
            while (trials < opt.max_line_trials) {
                const double alpha = 0.5 * (lo.alpha + hi.alpha);
                ++trials;
                LinePoint mid = eval_phi(alpha);
                if (mid.phi > phi0 + opt.c1 * alpha * dphi0 || mid.phi >= lo.phi) {
                    hi = mid;
                } else {
                    if (std::abs(mid.dphi) <= -opt.c2 * dphi0) {
                        acc = mid;
                        accepted = true;
                        return;
                    }
                    if (mid.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                    lo = mid;
                }
                if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) {
                    // interval collapsed; take lo if it at least decreases
                    if (lo.phi < phi0) {
                        ++trials;
                        acc = eval_phi(lo.alpha);
                        accepted = true;
                    }
                    return;
                }
            }
        };

        double alpha = (iter == 1) ? std::min(1.0, 1.0 / std::max(1e-12, inf_norm(g))) : 1.0;
        LinePoint prev{0.0, phi0, dphi0};
        while (trials < opt.max_line_trials && !accepted) {
            ++trials;
            LinePoint cur = eval_phi(alpha);
            if (cur.phi > phi0 + opt.c1 * alpha * dphi0 || (trials > 1 && cur.phi >= prev.phi)) {
                zoom(prev, cur);
                break;
            }
            if (std::abs(cur.dphi) <= -opt.c2 * dphi0) {
                acc = cur;
                accepted = true;
                break;
            }
            if (cur.dphi >= 0.0) {
                zoom(cur, prev);
                break;
            }
            prev = cur;
            alpha = std::min(2.0 * alpha, 1e12);
        }

        if (!accepted) {
            rep.line_search_failed = true;
            break; // current x is the best iterate (steps are monotone)
        }
        // every acceptance path ends with eval_phi at acc.alpha, so
        // x_trial/g_trial already hold the accepted point
        const double f_new = acc.phi;

        std::vector<double> s(n), y(n);
        for (size_t j = 0; j < n; ++j) {
            s[j] = x_trial[j] - x[j];
            y[j] = g_trial[j] - g[j];
        }
        const double sy = dot(s, y);
        if (sy > opt.curvature_min) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opt.history) {
                S.erase(S.begin());
                Y.erase(Y.begin());
                rho.erase(rho.begin());
            }
        }

        const double f_prev = fx;
        x = x_trial;
        std::swap(g, g_trial);
        fx = f_new;
        rep.iterations = iter;
        rep.grad_inf = inf_norm(g);
        rep.final_loss = fx;
        if (rep.grad_inf < opt.grad_tol) break;
        // stagnation relative to the current loss scale
        if (std::abs(f_prev - fx) < opt.rel_tol * std::abs(f_prev)) break;
        if (f_prev == 0.0) break;
    }
    rep.final_loss = fx;
    rep.grad_inf = inf_norm(g);
    return rep;
}

// ---------------------------------------------------------------------------
// Training driver
// ---------------------------------------------------------------------------

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct RestartOutcome {
    PinnModel model;
    double final_loss = std::numeric_limits<double>::infinity();
    std::vector<LogRow> log;
    bool line_search_warning = false;
    bool diverged = false;
};

RestartOutcome run_restart(int r, const PinnModel& prototype, const SourceFn& f,
                           const data::SampleSet& td, const data::CollocationSet& tr,
                           const TrainConfig& cfg) {
    RestartOutcome out;
    PinnModel model = prototype;
    model.positivity = cfg.positivity;
    model.u_params = net::init_glorot(model.u_spec, mix_seed(cfg.init_seed, 2 * r));
    model.a_params = net::init_glorot(model.a_spec, mix_seed(cfg.init_seed, 2 * r + 1));

    const int n_d = static_cast<int>(td.points.size());
    const int n_r = static_cast<int>(tr.points.size());
    const int batch_d = std::clamp(cfg.batch_data, 1, n_d);
    const int batch_r = std::clamp(
        static_cast<int>(std::lround(static_cast<double>(n_r) * batch_d / n_d)), 1, n_r);
    const bool full_batch = batch_d == n_d && batch_r == n_r;

    LossState state;
    state.alpha_w = cfg.weight_alpha;
    state.update_period = cfg.weight_update_period;

    AdamState adam;
    adam.init(model.param_count());
    adam.lr = cfg.lr0;

    std::vector<double> flat = model.flat_params();
    num::Rng batch_rng(mix_seed(cfg.init_seed, 7777 + r));
    std::vector<int> idx_d(n_d), idx_r(n_r);
    for (int i = 0; i < n_d; ++i) idx_d[i] = i;
    for (int i = 0; i < n_r; ++i) idx_r[i] = i;
    std::vector<std::array<double, 2>> mb_dp(batch_d), mb_rp(batch_r);
    std::vector<double> mb_dv(batch_d);

    auto shuffle_take = [&](std::vector<int>& idx, int take) {
        const int n = static_cast<int>(idx.size());
        for (int i = 0; i < take; ++i) {
            const int j = i + static_cast<int>(batch_rng.raw() % static_cast<uint64_t>(n - i));
            std::swap(idx[i], idx[j]);
        }
    };

    double best_total = std::numeric_limits<double>::infinity();
    int64_t last_improve = 0;
    int64_t epoch_counter = 0;

    for (int cycle = 0; cycle < cfg.cycles; ++cycle) {
        for (int e = 1; e <= cfg.adam_epochs; ++e) {
            const auto t0 = std::chrono::steady_clock::now();
            ++epoch_counter;
            model.set_flat_params(flat);

            LossValue lv;
            if (full_batch) {
                lv = loss(model, f, td.points, td.values, tr.points, state, true);
            } else {
                shuffle_take(idx_d, batch_d);
                shuffle_take(idx_r, batch_r);
                for (int i = 0; i < batch_d; ++i) {
                    mb_dp[i] = td.points[idx_d[i]];
                    mb_dv[i] = td.values[idx_d[i]];
                }
                for (int i = 0; i < batch_r; ++i) mb_rp[i] = tr.points[idx_r[i]];
                lv = loss(model, f, mb_dp, mb_dv, mb_rp, state, true);
            }

            if (epoch_counter % state.update_period == 0) {
                update_adaptive_weights(state, lv.grad_lr, lv.grad_ld);
                // recombine with the fresh weight so the step uses it
                for (size_t j = 0; j < lv.grad_total.size(); ++j)
                    lv.grad_total[j] =
                        state.lambda_r * lv.grad_lr[j] + state.lambda_d * lv.grad_ld[j];
                lv.total = state.lambda_r * lv.l_r + state.lambda_d * lv.l_d;
            }

            adam_step(flat, lv.grad_total, adam);

            if (lv.total < best_total * (1.0 - cfg.plateau_min_rel)) {
                best_total = lv.total;
                last_improve = epoch_counter;
            } else if (epoch_counter - last_improve >= cfg.plateau_window) {
                adam.lr = std::max(adam.lr * 0.5, cfg.lr0 * cfg.lr_floor);
                last_improve = epoch_counter;
            }

            if (epoch_counter % cfg.log_every == 0) {
                const double ms = std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count();
                out.log.push_back({epoch_counter, lv.l_r, lv.l_d, state.lambda_d, adam.lr, ms});
            }
            state.history.push_back({epoch_counter, lv.l_r, lv.l_d, state.lambda_d});
        }

        if (cfg.lbfgs_iters > 0) {
            auto closure = [&](std::span<const double> params,
                               std::span<double> grad) -> double {
                model.set_flat_params(params);
                const LossValue lv = loss(model, f, td.points, td.values, tr.points, state, true);
                std::copy(lv.grad_total.begin(), lv.grad_total.end(), grad.begin());
                return lv.total;
            };
            const LbfgsReport rep = lbfgs_run(flat, closure, cfg.lbfgs_iters);
            out.line_search_warning = out.line_search_warning || rep.line_search_failed;
        }
    }

    model.set_flat_params(flat);
    model.u_params.training_step = epoch_counter;
    model.a_params.training_step = epoch_counter;
    const LossValue final_lv = loss(model, f, td.points, td.values, tr.points, state, false);
    out.model = std::move(model);
    out.final_loss = final_lv.total;
    return out;
}

} // namespace

TrainResult train(const PinnModel& prototype, const SourceFn& f, const data::SampleSet& td,
                  const data::CollocationSet& tr, const TrainConfig& cfg) {
    if (td.points.empty() || tr.points.empty())
        throw ConfigError("train: empty data or collocation set");
    if (td.dim != prototype.dim || tr.dim != prototype.dim)
        throw ConfigError("train: dimension mismatch between model and point sets");

    const int R = std::max(1, cfg.restarts);
    std::vector<RestartOutcome> outcomes(R);

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::min(R, omp_get_max_threads())) \
    if (R > 1)
    for (int r = 0; r < R; ++r) {
        try {
            outcomes[r] = run_restart(r, prototype, f, td, tr, cfg);
        } catch (const NumericError&) {
            outcomes[r].diverged = true;
        }
    }

    TrainResult result;
    result.final_losses.resize(R);
    int best = -1;
    for (int r = 0; r < R; ++r) {
        result.final_losses[r] =
            outcomes[r].diverged ? std::numeric_limits<double>::infinity() : outcomes[r].final_loss;
        result.any_line_search_warning =
            result.any_line_search_warning || outcomes[r].line_search_warning;
        if (std::isfinite(result.final_losses[r]) &&
            (best < 0 || result.final_losses[r] < result.final_losses[best]))
            best = r;
    }
    if (best < 0) throw NumericError("train: all restarts diverged");
    result.best = std::move(outcomes[best].model);
    result.best_restart = best;
    result.best_final_loss = result.final_losses[best];
    result.log = std::move(outcomes[best].log);
    return result;
}

void write_log_csv(std::span<const LogRow> log, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw ConfigError("write_log_csv: cannot open " + path);
    std::fprintf(fp, "epoch,L_r,L_d,lambda_d,lr,wall_ms\n");
    for (const LogRow& row : log)
        std::fprintf(fp, "%lld,%.17g,%.17g,%.17g,%.17g,%.6g\n",
                     static_cast<long long>(row.epoch), row.l_r, row.l_d, row.lambda_d, row.lr,
                     row.wall_ms);
    std::fclose(fp);
}

} // namespace glimit::train
