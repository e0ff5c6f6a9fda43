#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "glimit/dataset.hpp"
#include "glimit/fem.hpp"

using namespace glimit;

namespace {
fem::FemSolution toy_solution_1d(int n) {
    auto A = [](double) { return 1.0; };
    auto f = [](double) { return 2.0; };
    return fem::solve_dirichlet_1d(fem::Mesh::line(0, 1, n), A, f, nullptr);
}
} // namespace

TEST_CASE("equispaced 1D sampling uses the interior uniform grid") {
    const fem::FemSolution u = toy_solution_1d(64);
    const data::SampleSet s = data::sample_equispaced(u, 3);
    REQUIRE(s.points.size() == 3);
    CHECK(s.points[0][0] == doctest::Approx(0.25));
    CHECK(s.points[1][0] == doctest::Approx(0.5));
    CHECK(s.points[2][0] == doctest::Approx(0.75));
}

TEST_CASE("equispaced 2D sampling lays out an interior square grid") {
    auto A = [](double, double) -> std::array<double, 2> { return {1.0, 1.0}; };
    auto f = [](double, double) { return 1.0; };
    const fem::FemSolution u = fem::solve_dirichlet_2d(fem::Mesh::box({1, 1}, {2, 2}, 48, 48), A,
                                                       f, nullptr, std::nullopt, 1e-10, 20000);
    const data::SampleSet s = data::sample_equispaced(u, 1600);
    REQUIRE(s.points.size() == 1600);
    CHECK(s.points[0][0] == doctest::Approx(1.0 + 1.0 / 41.0));
    CHECK(s.points[0][1] == doctest::Approx(1.0 + 1.0 / 41.0));
    CHECK(s.points.back()[0] == doctest::Approx(1.0 + 40.0 / 41.0));
    for (const auto& p : s.points) {
        CHECK(p[0] > 1.0);
        CHECK(p[0] < 2.0);
        CHECK(p[1] > 1.0);
        CHECK(p[1] < 2.0);
    }
    CHECK_THROWS_AS((void)data::sample_equispaced(u, 1601), ConfigError);
}

TEST_CASE("interpolation reproduces nodal values exactly") {
    const fem::FemSolution u = toy_solution_1d(32);
    for (int i = 0; i <= 32; ++i)
        CHECK(u.eval1(u.mesh.node_x(i)) == u.values[i]);
}

TEST_CASE("zero noise level leaves values untouched") {
    const fem::FemSolution u = toy_solution_1d(64);
    const data::SampleSet clean = data::sample_equispaced(u, 20);
    const data::SampleSet noisy = data::add_noise(clean, 0.0, 7);
    CHECK(noisy.values == clean.values);
}

TEST_CASE("noise scales with the RMS of the clean values") {
    const fem::FemSolution u = toy_solution_1d(64);
    data::SampleSet clean = data::sample_equispaced(u, 10000);
    double sq = 0.0;
    for (double v : clean.values) sq += v * v;
    const double rms = std::sqrt(sq / clean.values.size());
    const data::SampleSet noisy = data::add_noise(clean, 0.05, 42);
    double dq = 0.0, mean = 0.0;
    for (size_t i = 0; i < clean.values.size(); ++i) {
        const double d = noisy.values[i] - clean.values[i];
        dq += d * d;
        mean += d;
    }
    const double std_meas = std::sqrt(dq / clean.values.size());
    CHECK(std_meas > 0.95 * 0.05 * rms);
    CHECK(std_meas < 1.05 * 0.05 * rms);
    // centered: |mean| below 3 sigma/sqrt(n)
    CHECK(std::abs(mean / clean.values.size()) <
          3.0 * 0.05 * rms / std::sqrt(static_cast<double>(clean.values.size())));
}

TEST_CASE("noise is reproducible for equal seeds and bounded in level") {
    const fem::FemSolution u = toy_solution_1d(64);
    const data::SampleSet clean = data::sample_equispaced(u, 50);
    const data::SampleSet a = data::add_noise(clean, 0.03, 9);
    const data::SampleSet b = data::add_noise(clean, 0.03, 9);
    const data::SampleSet c = data::add_noise(clean, 0.03, 10);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    CHECK_THROWS_AS((void)data::add_noise(clean, 0.5, 1), ConfigError);
}

TEST_CASE("collocation grids and random interiors") {
    const data::CollocationSet g1 =
        data::make_collocation(1, {0, 0}, {1, 0}, 190, data::CollocationMode::grid, 0);
    REQUIRE(g1.points.size() == 190);
    CHECK(g1.points[0][0] == doctest::Approx(1.0 / 191.0));

    const data::CollocationSet g2 =
        data::make_collocation(2, {1, 1}, {2, 2}, 1600, data::CollocationMode::grid, 0);
    REQUIRE(g2.points.size() == 1600);

    const data::CollocationSet r =
        data::make_collocation(2, {1, 1}, {2, 2}, 333, data::CollocationMode::uniform_random, 5);
    REQUIRE(r.points.size() == 333);
    for (const auto& p : r.points) {
        CHECK(p[0] > 1.0);
        CHECK(p[0] < 2.0);
        CHECK(p[1] > 1.0);
        CHECK(p[1] < 2.0);
    }
}

TEST_CASE("dataset CSV round trip is bit-identical") {
    const fem::FemSolution u = toy_solution_1d(256);
    data::SampleSet s = data::sample_equispaced(u, 40);
    s.eps = 1.0 / 128.0;
    s.run_id = "deadbeefdeadbeef";
    s = data::add_noise(s, 0.05, 1234);
    const std::string path =
        (std::filesystem::temp_directory_path() / "glimit_dataset_test.csv").string();
    data::save_csv(s, {0.0, 0.0}, {1.0, 0.0}, path);
    const data::SampleSet t = data::load_csv(path);
    CHECK(t.dim == s.dim);
    CHECK(t.eps == s.eps);
    CHECK(t.mesh_h == s.mesh_h);
    CHECK(t.noise_level == s.noise_level);
    CHECK(t.seed == s.seed);
    CHECK(t.run_id == s.run_id);
    REQUIRE(t.points.size() == s.points.size());
    for (size_t i = 0; i < s.points.size(); ++i) {
        CHECK(t.points[i][0] == s.points[i][0]);
        CHECK(t.values[i] == s.values[i]);
    }
    std::filesystem::remove(path);
}
