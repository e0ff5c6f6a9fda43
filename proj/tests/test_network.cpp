#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "glimit/network.hpp"
#include "glimit/numerics.hpp"

using namespace glimit;
using ad::Dual2;

TEST_CASE("glorot init is deterministic in the seed") {
    const net::MlpSpec spec{1, 1, 2, 30};
    const net::Params a = net::init_glorot(spec, 1234);
    const net::Params b = net::init_glorot(spec, 1234);
    const net::Params c = net::init_glorot(spec, 1235);
    CHECK(a.flat == b.flat);
    CHECK(a.flat != c.flat);
}

TEST_CASE("glorot first-layer variance tracks 2/(fan_in+fan_out)") {
    const net::MlpSpec spec{1, 1, 2, 50};
    double sq = 0.0;
    int count = 0;
    for (int s = 0; s < 12; ++s) {
        const net::Params p = net::init_glorot(spec, 1000 + s);
        for (int j = 0; j < 50; ++j) { // first-layer weights are the leading block
            sq += p.flat[j] * p.flat[j];
            ++count;
        }
    }
    const double var = sq / count;
    const double target = 2.0 / (1 + 50);
    CHECK(var > 0.8 * target);
    CHECK(var < 1.2 * target);
}

TEST_CASE("biases start at exactly zero") {
    const net::MlpSpec spec{2, 1, 1, 40};
    const net::Params p = net::init_glorot(spec, 5);
    // layout: W1 (40x2), b1 (40), W2 (1x40), b2 (1)
    for (int j = 80; j < 120; ++j) CHECK(p.flat[j] == 0.0);
    CHECK(p.flat.back() == 0.0);
}

TEST_CASE("zero parameters give identically zero output and derivatives") {
    const net::MlpSpec spec{1, 1, 2, 10};
    std::vector<double> zeros(spec.param_count(), 0.0);
    const std::array<Dual2<double, 1>, 1> in{Dual2<double, 1>::input(0.37, 0)};
    const auto u = net::mlp_eval1<Dual2<double, 1>, double>(
        spec, zeros, std::span<const Dual2<double, 1>>(in));
    CHECK(u.v == 0.0);
    CHECK(u.g[0] == 0.0);
    CHECK(u.h[0] == 0.0);
}

TEST_CASE("minimal tanh unit has unit slope at the origin") {
    const net::MlpSpec spec{1, 1, 1, 1};
    std::vector<double> p = {1.0, 0.0, 1.0, 0.0}; // W1=1,b1=0,W2=1,b2=0
    const std::array<Dual2<double, 1>, 1> in{Dual2<double, 1>::input(0.0, 0)};
    const auto u = net::mlp_eval1<Dual2<double, 1>, double>(
        spec, p, std::span<const Dual2<double, 1>>(in));
    CHECK(u.v == doctest::Approx(0.0));
    CHECK(u.g[0] == doctest::Approx(1.0));
}

TEST_CASE("network spatial derivatives match finite differences") {
    const net::MlpSpec spec{1, 1, 1, 30};
    const net::Params p = net::init_glorot(spec, 77);
    auto eval = [&](double x) {
        const double in[1] = {x};
        return net::mlp_eval1<double, double>(spec, p.flat, std::span<const double>(in, 1));
    };
    num::Rng rng(3);
    for (int k = 0; k < 20; ++k) {
        const double x = rng.uniform(-1.0, 1.0);
        const std::array<Dual2<double, 1>, 1> in{Dual2<double, 1>::input(x, 0)};
        const auto u = net::mlp_eval1<Dual2<double, 1>, double>(
            spec, p.flat, std::span<const Dual2<double, 1>>(in));
        const double h = 1e-5;
        const double g_fd = (eval(x + h) - eval(x - h)) / (2.0 * h);
        const double h_fd = (eval(x + h) - 2.0 * eval(x) + eval(x - h)) / (h * h);
        CHECK(u.g[0] == doctest::Approx(g_fd).epsilon(1e-6));
        CHECK(u.h[0] == doctest::Approx(h_fd).epsilon(1e-4));
    }
}

TEST_CASE("dimension mismatch is rejected") {
    const net::MlpSpec spec{2, 1, 1, 4};
    std::vector<double> p(spec.param_count(), 0.1);
    const double in[1] = {0.5};
    auto call = [&] {
        (void)net::mlp_eval1<double, double>(spec, p, std::span<const double>(in, 1));
    };
    CHECK_THROWS_AS(call(), UsageError);
}

TEST_CASE("bubble wrapper values") {
    net::BoundaryWrapper w1{1, 0.0, 1.0, nullptr};
    const double x0[1] = {0.0}, x1[1] = {1.0}, xm[1] = {0.5};
    CHECK(w1.solution(std::span<const double>(x0, 1), 123.0) == 0.0);
    CHECK(w1.solution(std::span<const double>(x1, 1), -7.0) == 0.0);
    CHECK(w1.solution(std::span<const double>(xm, 1), 1.0) == doctest::Approx(0.25));

    net::BoundaryWrapper w2{2, 1.0, 2.0, nullptr};
    const double c[2] = {1.5, 1.5};
    CHECK(w2.solution(std::span<const double>(c, 2), 1.0) == doctest::Approx(0.0625));

    const double out[1] = {1.5};
    CHECK_THROWS_AS((void)w1.solution(std::span<const double>(out, 1), 1.0), UsageError);
}

TEST_CASE("boundary exactness at 1000 random boundary points") {
    net::BoundaryWrapper w{2, 1.0, 2.0, nullptr};
    num::Rng rng(11);
    for (int k = 0; k < 1000; ++k) {
        double p[2] = {rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0)};
        const int face = static_cast<int>(rng.raw() % 4);
        p[face / 2] = (face % 2 == 0) ? 1.0 : 2.0;
        const double raw = rng.uniform(-10.0, 10.0);
        CHECK(std::abs(w.solution(std::span<const double>(p, 2), raw)) < 1e-14);
    }
}

TEST_CASE("wrapped solution derivatives match finite differences") {
    const net::MlpSpec spec{1, 1, 2, 12};
    const net::Params p = net::init_glorot(spec, 21);
    net::BoundaryWrapper w{1, 0.0, 1.0, nullptr};
    auto eval = [&](double x) {
        const double in[1] = {x};
        const double raw =
            net::mlp_eval1<double, double>(spec, p.flat, std::span<const double>(in, 1));
        return w.solution(std::span<const double>(in, 1), raw);
    };
    for (const double x : {0.12, 0.4, 0.77, 0.93}) {
        const std::array<Dual2<double, 1>, 1> in{Dual2<double, 1>::input(x, 0)};
        const auto raw = net::mlp_eval1<Dual2<double, 1>, double>(
            spec, p.flat, std::span<const Dual2<double, 1>>(in));
        const auto u = net::wrap_solution<double, 1>(w, std::span<const Dual2<double, 1>>(in), raw);
        const double h = 1e-5;
        const double g_fd = (eval(x + h) - eval(x - h)) / (2.0 * h);
        const double h_fd = (eval(x + h) - 2.0 * eval(x) + eval(x - h)) / (h * h);
        CHECK(u.v == doctest::Approx(eval(x)).epsilon(1e-12));
        CHECK(u.g[0] == doctest::Approx(g_fd).epsilon(1e-6));
        CHECK(u.h[0] == doctest::Approx(h_fd).epsilon(1e-4));
    }
}

TEST_CASE("params serialize and reload bit-identically") {
    const net::MlpSpec spec{2, 2, 3, 9};
    net::Params p = net::init_glorot(spec, 4242);
    p.training_step = 1234;
    const std::string path =
        (std::filesystem::temp_directory_path() / "glimit_params_test.json").string();
    net::save_params(p, path);
    const net::Params q = net::load_params(path);
    CHECK(q.spec == p.spec);
    CHECK(q.seed == p.seed);
    CHECK(q.training_step == p.training_step);
    REQUIRE(q.flat.size() == p.flat.size());
    for (size_t i = 0; i < p.flat.size(); ++i) CHECK(q.flat[i] == p.flat[i]);
    std::filesystem::remove(path);
}
