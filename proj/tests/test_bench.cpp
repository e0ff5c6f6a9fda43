#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "glimit/bench.hpp"
#include "glimit/numerics.hpp"

using namespace glimit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() / ("glimit_bench_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
};

} // namespace

TEST_CASE("benchmark coefficients match their formulas at spot points") {
    const auto& b = bench::benchmark("locper1d");
    const auto c = b.coefficient(0.25, {0.5, 0.5});
    // (1 + 0.25) / (2 + sin(4 pi)) = 1.25 / 2
    CHECK(c.eval_1d(0.5) == doctest::Approx(1.25 / 2.0).epsilon(1e-12));

    const auto& n2 = bench::benchmark("nonper2d");
    const auto c2 = n2.coefficient(0.5, {0.5, 0.5});
    // sin(2 pi * 1.25/0.5) = sin(5 pi) = 0 kills the oscillation
    CHECK(c2.eval_2d(1.25, 1.5) == doctest::Approx(1.0 + 0.9 * std::sin(5.0 * M_PI) *
                                                             std::sin(2.0 * M_PI * 4.5))
                                       .epsilon(1e-12));

    const auto& er = bench::benchmark("ergodic1d");
    const auto c3 = er.coefficient(std::pow(2.0, -10), {0.5, 0.5});
    const double x = 0.25;
    const double expect = 3.1 +
                          (x + 1.0) * std::sin(2.0 * M_PI * (0.5 + x * 1024.0)) +
                          std::sin(2.0 * M_PI * (0.5 + std::sqrt(2.0) * x * 1024.0));
    CHECK(c3.eval_1d(x) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("registry defaults carry the published hyperparameters") {
    const auto& lp = bench::benchmark("locper1d");
    CHECK(lp.hyper.a_depth == 3);
    CHECK(lp.hyper.a_width == 30);
    CHECK(lp.hyper.u_depth == 3);
    CHECK(lp.hyper.u_width == 30);
    CHECK(lp.hyper.lr == 1e-3);
    CHECK(lp.hyper.epochs == 40000);
    CHECK(lp.hyper.batch == 64);

    const auto& os = bench::benchmark("oscil1d");
    CHECK(os.hyper.a_width == 50);
    CHECK(os.hyper.lr == 1e-4);
    CHECK(os.hyper.epochs == 80000);

    const auto& n2 = bench::benchmark("nonper2d");
    CHECK(n2.hyper.a_depth == 2);
    CHECK(n2.hyper.a_width == 40);
    CHECK(n2.hyper.u_depth == 4);
    CHECK(n2.hyper.u_width == 45);
    CHECK(n2.hyper.epochs == 100000);
    CHECK(n2.hyper.batch == 200);
    CHECK(n2.default_n_data == 1600);

    const auto& er = bench::benchmark("ergodic1d");
    CHECK(er.hyper.a_depth == 2);
    CHECK(er.hyper.a_width == 10);
    CHECK(er.hyper.u_depth == 3);
    CHECK(er.hyper.u_width == 30);
    CHECK(er.hyper.epochs == 60000);
    CHECK(er.default_n_res == 180);

    CHECK_THROWS_AS((void)bench::benchmark("nope"), ConfigError);
}

TEST_CASE("config JSON round trip and science-only hash") {
    bench::RunConfig c;
    c.benchmark = "oscil1d";
    c.eps = 0.03125;
    c.noise = 0.01;
    c.n_data = 80;
    c.out_dir = "somewhere";
    const bench::RunConfig d = bench::RunConfig::from_json(c.to_json());
    CHECK(d.benchmark == c.benchmark);
    CHECK(d.eps == c.eps);
    CHECK(d.noise == c.noise);
    CHECK(d.n_data == c.n_data);
    CHECK(d.out_dir == c.out_dir);
    CHECK(d.hash() == c.hash());

    bench::RunConfig e = c;
    e.out_dir = "elsewhere";
    CHECK(e.hash() == c.hash()); // output location is not part of provenance
    e.noise = 0.05;
    CHECK(e.hash() != c.hash());
}

TEST_CASE("resolve applies benchmark defaults and offset rules") {
    bench::RunConfig c;
    c.benchmark = "ergodic1d";
    c.eps = -1.0;
    const bench::RunConfig r = bench::resolve(c);
    CHECK(r.eps == std::pow(2.0, -10));
    CHECK(r.n_data == 160);
    CHECK(r.n_res == 180);
    CHECK(r.mesh_n == 32768);

    bench::RunConfig c2;
    c2.benchmark = "locper1d";
    c2.n_data = 80;
    CHECK(bench::resolve(c2).n_res == 110); // |T_r| = |T_d| + 30

    bench::RunConfig c3;
    c3.benchmark = "nonper2d";
    c3.eps = std::pow(2.0, -6);
    CHECK_THROWS_AS((void)bench::resolve(c3), ConfigError); // desk guard without --full-scale
}

TEST_CASE("generate writes a reproducible dataset near the homogenized solution") {
    TempDir tmp;
    bench::RunConfig cfg;
    cfg.benchmark = "locper1d";
    cfg.eps = std::pow(2.0, -7);
    cfg.noise = 0.0;
    cfg.out_dir = (tmp.dir / "runA").string();
    bench::cmd_generate(cfg);

    const data::SampleSet set = data::load_csv(cfg.out_dir + "/dataset.csv");
    REQUIRE(set.points.size() == 160);

    // Remark-2.6-style band: samples of u^eps stay within O(eps) of u_0
    bench::cmd_reference(cfg);
    const fem::FemSolution u0 =
        fem::FemSolution::load_binary(cfg.out_dir + "/reference_u0.bin");
    double worst = 0.0;
    for (size_t i = 0; i < set.points.size(); ++i)
        worst = std::max(worst, std::abs(set.values[i] - u0.eval1(set.points[i][0])));
    CHECK(worst < 1.0 * cfg.eps);
    CHECK(worst > 0.0);

    // reproducible bytes for a fixed config
    bench::RunConfig cfg2 = cfg;
    cfg2.out_dir = (tmp.dir / "runB").string();
    bench::cmd_generate(cfg2);
    CHECK(slurp(cfg.out_dir + "/dataset.csv") == slurp(cfg2.out_dir + "/dataset.csv"));

    // noisy datasets reproduce as well
    bench::RunConfig cfg3 = cfg;
    cfg3.noise = 0.05;
    cfg3.out_dir = (tmp.dir / "runC").string();
    bench::cmd_generate(cfg3);
    bench::RunConfig cfg4 = cfg3;
    cfg4.out_dir = (tmp.dir / "runD").string();
    bench::cmd_generate(cfg4);
    CHECK(slurp(cfg3.out_dir + "/dataset.csv") == slurp(cfg4.out_dir + "/dataset.csv"));
    CHECK(slurp(cfg3.out_dir + "/dataset.csv") != slurp(cfg.out_dir + "/dataset.csv"));
}

TEST_CASE("reference values hit the published closed forms") {
    TempDir tmp;
    bench::RunConfig cfg;
    cfg.benchmark = "locper1d";
    cfg.out_dir = (tmp.dir / "ref1").string();
    const hom::GLimitField g1 = bench::compute_reference_glimit(cfg);
    CHECK(g1.scalar(0.0) == doctest::Approx(0.5).epsilon(1e-8));

    bench::RunConfig cfg2;
    cfg2.benchmark = "oscil1d";
    const hom::GLimitField g2 = bench::compute_reference_glimit(cfg2);
    CHECK(g2.scalar(0.0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));

    bench::RunConfig cfg3;
    cfg3.benchmark = "ergodic1d";
    cfg3.mc_samples = 50000;
    const hom::GLimitField a = bench::compute_reference_glimit(cfg3);
    const hom::GLimitField b = bench::compute_reference_glimit(cfg3);
    CHECK(a.values == b.values); // bit-for-bit for the stated seed
}

TEST_CASE("train smoke mode evaluates the raw initialization deterministically") {
    TempDir tmp;
    bench::RunConfig cfg;
    cfg.benchmark = "locper1d";
    cfg.eps = std::pow(2.0, -7);
    cfg.mesh_n = 8192;
    cfg.restarts = 1;
    cfg.adam_epochs = 0;
    cfg.lbfgs_iters = 0;
    cfg.eval_grid_n = 4000;
    cfg.out_dir = (tmp.dir / "smoke").string();
    bench::cmd_generate(cfg);
    const metrics::ErrorReport r1 = bench::cmd_train(cfg);
    const std::string report_bytes = slurp(cfg.out_dir + "/error_report.json");
    const metrics::ErrorReport r2 = bench::cmd_train(cfg);
    CHECK(r1.e_astar == r2.e_astar);
    CHECK(r1.e_u0 == r2.e_u0);
    CHECK(slurp(cfg.out_dir + "/error_report.json") == report_bytes);
    CHECK(r1.e_astar > 0.0);

    // evaluate reuses the saved checkpoint and reproduces the report
    const metrics::ErrorReport r3 = bench::cmd_evaluate(cfg);
    CHECK(r3.e_astar == r1.e_astar);
    CHECK(r3.e_u0 == r1.e_u0);

    // manifest links artifacts to the config hash
    const nlohmann::json m = nlohmann::json::parse(slurp(cfg.out_dir + "/manifest.json"));
    CHECK(m["config_hash"] == cfg.hash());
    const std::string ds_hash = m["artifacts"]["dataset.csv"];
    CHECK(ds_hash == num::fnv1a_hex(slurp(cfg.out_dir + "/dataset.csv")));

    // plot exports exist and are non-trivial
    bench::cmd_export_plots(cfg);
    CHECK(slurp(cfg.out_dir + "/astar_curve.csv").size() > 1000);
    CHECK(slurp(cfg.out_dir + "/solution_curve.csv").size() > 1000);
}

TEST_CASE("missing dataset is a config error") {
    TempDir tmp;
    bench::RunConfig cfg;
    cfg.benchmark = "locper1d";
    cfg.out_dir = (tmp.dir / "nodata").string();
    CHECK_THROWS_AS((void)bench::cmd_train(cfg), ConfigError);
}

TEST_CASE("sweep with an empty value list writes only the header") {
    TempDir tmp;
    bench::RunConfig cfg;
    cfg.benchmark = "locper1d";
    cfg.out_dir = (tmp.dir / "sweep").string();
    const int failures = bench::cmd_sweep("noise", {}, cfg);
    CHECK(failures == 0);
    const std::string text = slurp(cfg.out_dir + "/sweep_noise.csv");
    CHECK(text == "axis,value,e_astar,e_u0,wall_s,status\n");
}
