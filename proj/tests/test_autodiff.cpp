#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "glimit/autodiff.hpp"
#include "glimit/network.hpp"
#include "glimit/numerics.hpp"

using namespace glimit;
using ad::Dual1;
using ad::Dual2;
using ad::Rev;
using ad::Tape;
using ad::TapeScope;

namespace {

// central finite differences
double fd_d1(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}
double fd_d2(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

std::vector<double> fd_gradient(const std::function<double(std::vector<double>)>& f,
                                std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace

TEST_CASE("forward_hessian on x^2 and tanh") {
    auto sq = [](const std::array<Dual2<double, 1>, 1>& x) { return x[0] * x[0]; };
    const auto r = ad::forward_hessian<1>(sq, {3.0});
    CHECK(r.value == doctest::Approx(9.0));
    CHECK(r.grad[0] == doctest::Approx(6.0));
    CHECK(r.hess[0][0] == doctest::Approx(2.0));

    auto th = [](const std::array<Dual2<double, 1>, 1>& x) { return tanh(x[0]); };
    const auto t = ad::forward_hessian<1>(th, {0.0});
    CHECK(t.value == doctest::Approx(0.0));
    CHECK(t.grad[0] == doctest::Approx(1.0));
    CHECK(t.hess[0][0] == doctest::Approx(0.0));
}

TEST_CASE("forward_hessian on sin(x1) x2^2 matches closed form and finite differences") {
    auto f = [](const std::array<Dual2<double, 2>, 2>& x) {
        return sin(x[0]) * (x[1] * x[1]);
    };
    const auto r = ad::forward_hessian<2>(f, {M_PI / 2.0, 2.0});
    CHECK(r.value == doctest::Approx(4.0));
    CHECK(r.grad[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.grad[1] == doctest::Approx(4.0));
    CHECK(r.hess[0][0] == doctest::Approx(-4.0));
    CHECK(r.hess[0][1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.hess[1][1] == doctest::Approx(2.0));

    auto fs = [](double x1, double x2) { return std::sin(x1) * x2 * x2; };
    const double h = 1e-4;
    CHECK(r.grad[1] ==
          doctest::Approx(fd_d1([&](double t) { return fs(M_PI / 2, t); }, 2.0, h)).epsilon(1e-7));
    CHECK(r.hess[0][0] ==
          doctest::Approx(fd_d2([&](double t) { return fs(t, 2.0); }, M_PI / 2, h)).epsilon(1e-5));
}

TEST_CASE("primitive dual propagation matches central differences on random inputs") {
    num::Rng rng(42);
    struct Prim {
        const char* name;
        std::function<Dual2<double, 1>(Dual2<double, 1>)> dual;
        std::function<double(double)> plain;
        bool positive_only = false;
    };
    const std::vector<Prim> prims = {
        {"tanh", [](auto x) { return tanh(x); }, [](double x) { return std::tanh(x); }},
        {"sin", [](auto x) { return sin(x); }, [](double x) { return std::sin(x); }},
        {"cos", [](auto x) { return cos(x); }, [](double x) { return std::cos(x); }},
        {"exp", [](auto x) { return exp(x); }, [](double x) { return std::exp(x); }},
        {"log", [](auto x) { return log(x); }, [](double x) { return std::log(x); }, true},
        {"softplus", [](auto x) { return softplus(x); },
         [](double x) { return ad::softplus_val(x); }},
        {"pow2.5", [](auto x) { return pow(x, 2.5); },
         [](double x) { return std::pow(x, 2.5); }, true},
        {"recip", [](auto x) { return inv(x); }, [](double x) { return 1.0 / x; }, true},
        {"mul", [](auto x) { return x * x + x * 3.0; },
         [](double x) { return x * x + 3.0 * x; }},
        {"div", [](auto x) { return (x + 4.0) / (x * x + 1.0); },
         [](double x) { return (x + 4.0) / (x * x + 1.0); }},
    };
    for (const auto& p : prims) {
        for (int k = 0; k < 40; ++k) {
            double x = rng.uniform(-2.0, 2.0);
            if (p.positive_only) x = rng.uniform(0.3, 2.0);
            const auto d = p.dual(Dual2<double, 1>::input(x, 0));
            const double h = 1e-5;
            const double g_ref = fd_d1(p.plain, x, h);
            const double h_ref = fd_d2(p.plain, x, h);
            INFO(p.name << " at x=" << x);
            CHECK(d.v == doctest::Approx(p.plain(x)).epsilon(1e-12));
            CHECK(d.g[0] == doctest::Approx(g_ref).epsilon(1e-6));
            CHECK(d.h[0] == doctest::Approx(h_ref).epsilon(2e-4));
        }
    }
}

TEST_CASE("packed Hessian storage is symmetric by construction") {
    auto f = [](const std::array<Dual2<double, 2>, 2>& x) {
        return exp(x[0] * x[1]) + sin(x[0]) * cos(x[1]);
    };
    std::array<Dual2<double, 2>, 2> in{Dual2<double, 2>::input(0.7, 0),
                                       Dual2<double, 2>::input(-0.3, 1)};
    const auto out = f(in);
    CHECK(out.hess(0, 1) == out.hess(1, 0));
}

TEST_CASE("parameter_gradient on theta^2") {
    Tape tape;
    TapeScope scope(tape);
    Rev theta = Rev::param(1.5);
    Rev loss = theta * theta;
    const auto g = ad::parameter_gradient(loss, tape);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == doctest::Approx(3.0));
}

TEST_CASE("parameter_gradient flows through spatial derivatives") {
    // loss = (d/dx[theta tanh x])^2 at x = 0.3 -> dloss/dtheta = 2 theta sech^4(0.3)
    const double theta0 = 0.7, x0 = 0.3;
    Tape tape;
    TapeScope scope(tape);
    Rev theta = Rev::param(theta0);
    auto x = Dual1<Rev, 1>::input(Rev(x0), 0);
    auto u = tanh(x) * theta;
    Rev loss = u.g[0] * u.g[0];
    const auto g = ad::parameter_gradient(loss, tape);
    const double sech2 = 1.0 - std::tanh(x0) * std::tanh(x0);
    CHECK(g[0] == doctest::Approx(2.0 * theta0 * sech2 * sech2).epsilon(1e-12));

    // finite-difference cross-check
    auto scalar = [&](double th) {
        const double s = 1.0 - std::tanh(x0) * std::tanh(x0);
        return th * s * th * s;
    };
    CHECK(g[0] == doctest::Approx(fd_d1(scalar, theta0, 1e-6)).epsilon(1e-6));
}

TEST_CASE("network Hessian-norm loss gradient matches finite differences") {
    const net::MlpSpec spec{2, 1, 1, 16};
    const net::Params params = net::init_glorot(spec, 99);
    num::Rng rng(7);
    std::vector<std::array<double, 2>> pts(5);
    for (auto& p : pts) p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

    // double path: loss(params) = sum over points of ||hess u||_F^2
    auto loss_plain = [&](std::vector<double> flat) {
        double total = 0.0;
        for (const auto& p : pts) {
            std::array<Dual2<double, 2>, 2> in{Dual2<double, 2>::input(p[0], 0),
                                               Dual2<double, 2>::input(p[1], 1)};
            const auto u = net::mlp_eval1<Dual2<double, 2>, double>(
                spec, flat, std::span<const Dual2<double, 2>>(in));
            total += u.hess(0, 0) * u.hess(0, 0) + 2.0 * u.hess(0, 1) * u.hess(0, 1) +
                     u.hess(1, 1) * u.hess(1, 1);
        }
        return total;
    };

    // taped path
    Tape tape;
    TapeScope scope(tape);
    std::vector<Rev> w(params.flat.size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = Rev::param(params.flat[i]);
    Rev total(0.0);
    for (const auto& p : pts) {
        std::array<Dual2<Rev, 2>, 2> in{Dual2<Rev, 2>::input(Rev(p[0]), 0),
                                        Dual2<Rev, 2>::input(Rev(p[1]), 1)};
        const auto u = net::mlp_eval1<Dual2<Rev, 2>, Rev>(spec, w,
                                                          std::span<const Dual2<Rev, 2>>(in));
        total += u.hess(0, 0) * u.hess(0, 0) + Rev(2.0) * u.hess(0, 1) * u.hess(0, 1) +
                 u.hess(1, 1) * u.hess(1, 1);
    }
    const auto g = ad::parameter_gradient(total, tape);
    const auto g_fd = fd_gradient(loss_plain, params.flat, 1e-5);
    double scale = 0.0;
    for (double v : g_fd) scale = std::max(scale, std::abs(v));
    for (size_t i = 0; i < g.size(); ++i) {
        INFO("param " << i);
        CHECK(std::abs(g[i] - g_fd[i]) <= 1e-5 * std::max(scale, 1.0));
    }
}

TEST_CASE("parameter_gradient linearity") {
    const double a = 2.25, b = -0.75;
    std::vector<double> g1, g2, gc;
    for (int mode = 0; mode < 3; ++mode) {
        Tape tape;
        TapeScope scope(tape);
        Rev t1 = Rev::param(0.4), t2 = Rev::param(-1.1);
        Rev l1 = sin(t1) * t2 + exp(t2 * Rev(0.5));
        Rev l2 = t1 * t1 * t2 - cos(t2);
        Rev target = (mode == 0) ? l1 : (mode == 1) ? l2 : Rev(a) * l1 + Rev(b) * l2;
        std::vector<double> g(2);
        tape.reverse_into(target.i, g);
        (mode == 0 ? g1 : mode == 1 ? g2 : gc) = g;
    }
    for (int j = 0; j < 2; ++j)
        CHECK(gc[j] == doctest::Approx(a * g1[j] + b * g2[j]).epsilon(1e-12));
}

TEST_CASE("tape reuse is guarded") {
    Tape tape;
    TapeScope scope(tape);
    Rev t = Rev::param(2.0);
    Rev loss = t * t;
    (void)ad::parameter_gradient(loss, tape);
    CHECK_THROWS_AS((void)ad::parameter_gradient(loss, tape), UsageError);
    tape.clear();
    CHECK_THROWS_AS((void)ad::parameter_gradient(Rev(1.0), tape), UsageError);
}

TEST_CASE("non-finite results are reported") {
    auto bad = [](const std::array<Dual2<double, 1>, 1>& x) { return log(x[0]); };
    CHECK_THROWS_AS((void)ad::forward_hessian<1>(bad, {-1.0}), NumericError);
}
