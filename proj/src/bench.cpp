#include "glimit/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "glimit/numerics.hpp"

namespace fs = std::filesystem;

namespace glimit::bench {

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

namespace {

BenchmarkDef make_locper1d() {
    BenchmarkDef b;
    b.id = "locper1d";
    b.dim = 1;
    b.lo = {0.0, 0.0};
    b.hi = {1.0, 0.0};
    b.structure = hom::Structure::locally_periodic_1d;
    b.f = [](std::array<double, 2> x) { return std::cos(M_PI * x[0]); };
    b.coefficient = [](double eps, std::array<double, 2>) {
        hom::CoefficientField c;
        c.dim = 1;
        c.structure = hom::Structure::locally_periodic_1d;
        c.eps = eps;
        c.alpha = 1.0 / 3.0;
        c.beta = 2.0;
        c.eval_1d = [eps](double x) {
            return (1.0 + x * x) / (2.0 + std::sin(2.0 * M_PI * x / eps));
        };
        c.separated = [](double x, double y) {
            return (1.0 + x * x) / (2.0 + std::sin(2.0 * M_PI * y));
        };
        return c;
    };
    b.finest_period = [](double eps) { return eps; };
    b.hyper = {3, 30, 3, 30, 1e-3, 40000, 64};
    b.default_n_data = 160;
    b.default_n_res = 190;
    b.default_eps = std::pow(2.0, -7);
    b.desk_mesh_n = 32768;
    b.paper_mesh_n = 100000;
    b.eval_grid_n = 100000;
    return b;
}

BenchmarkDef make_oscil1d() {
    BenchmarkDef b;
    b.id = "oscil1d";
    b.dim = 1;
    b.lo = {0.0, 0.0};
    b.hi = {1.0, 0.0};
    b.structure = hom::Structure::weak_limit_known_1d;
    b.f = [](std::array<double, 2> x) { return 3.0 + std::sin(x[0]); };
    b.coefficient = [](double eps, std::array<double, 2>) {
        hom::CoefficientField c;
        c.dim = 1;
        c.structure = hom::Structure::weak_limit_known_1d;
        c.eps = eps;
        c.alpha = 0.8;
        c.beta = 4.5;
        // inner integral over the unit cell, 256-point composite quadrature
        c.eval_1d = [eps](double x) {
            const double shift = std::sin(M_PI * std::sqrt(2.0 / eps) * x) / (2.0 * eps);
            const double growth = 1.0 + std::sin(x);
            return num::simpson(
                [&](double y) {
                    const double t = y + shift;
                    return (1.0 + 0.5 * std::sin(t * t)) * std::exp(y * growth);
                },
                0.0, 1.0, 256);
        };
        return c;
    };
    b.finest_period = [](double eps) { return 2.8 * std::pow(eps, 1.5); };
    b.hyper = {3, 50, 3, 50, 1e-4, 80000, 64};
    b.default_n_data = 160;
    b.default_n_res = 190;
    b.default_eps = std::pow(2.0, -7);
    b.desk_mesh_n = 32768;
    b.paper_mesh_n = 100000;
    b.eval_grid_n = 100000;
    return b;
}

BenchmarkDef make_nonper2d() {
    BenchmarkDef b;
    b.id = "nonper2d";
    b.dim = 2;
    b.lo = {1.0, 1.0};
    b.hi = {2.0, 2.0};
    b.structure = hom::Structure::nonperiodic_2d;
    b.f = [](std::array<double, 2>) { return 1.0; };
    b.coefficient = [](double eps, std::array<double, 2>) {
        hom::CoefficientField c;
        c.dim = 2;
        c.structure = hom::Structure::nonperiodic_2d;
        c.eps = eps;
        c.alpha = 0.1;
        c.beta = 1.9;
        c.eval_2d = [eps](double x1, double x2) {
            return 1.0 + 0.9 * std::sin(2.0 * M_PI * x1 / eps) *
                             std::sin(2.0 * M_PI * x2 * x2 / eps);
        };
        return c;
    };
    // the x2 oscillation runs at local period eps/(2 x2), fastest at x2 = 2
    b.finest_period = [](double eps) { return eps / 4.0; };
    b.hyper = {2, 40, 4, 45, 1e-3, 100000, 200};
    b.default_n_data = 1600;
    b.default_n_res = 1600;
    b.default_eps = std::pow(2.0, -4);
    b.desk_mesh_n = 1024;
    b.paper_mesh_n = 8000;
    b.eval_grid_n = 128;
    return b;
}

BenchmarkDef make_ergodic1d() {
    BenchmarkDef b;
    b.id = "ergodic1d";
    b.dim = 1;
    b.lo = {0.0, 0.0};
    b.hi = {1.0, 0.0};
    b.structure = hom::Structure::ergodic_1d;
    b.f = [](std::array<double, 2>) { return 1.0; };
    b.coefficient = [](double eps, std::array<double, 2> omega) {
        hom::CoefficientField c;
        c.dim = 1;
        c.structure = hom::Structure::ergodic_1d;
        c.eps = eps;
        c.alpha = 0.1;
        c.beta = 6.1;
        const double w1 = omega[0], w2 = omega[1];
        c.eval_1d = [eps, w1, w2](double x) {
            return 3.1 + (x + 1.0) * std::sin(2.0 * M_PI * (w1 + x / eps)) +
                   std::sin(2.0 * M_PI * (w2 + std::sqrt(2.0) * x / eps));
        };
        return c;
    };
    b.finest_period = [](double eps) { return eps / std::sqrt(2.0); };
    b.hyper = {2, 10, 3, 30, 1e-3, 60000, 64};
    b.default_n_data = 160;
    b.default_n_res = 180;
    b.default_eps = std::pow(2.0, -10);
    b.desk_mesh_n = 32768;
    b.paper_mesh_n = 100000;
    b.eval_grid_n = 2000;
    return b;
}

// stationary ergodic field at shift zero, averaged by the MC reference
double ergodic_stationary(double x, double w1, double w2) {
    return 3.1 + (x + 1.0) * std::sin(2.0 * M_PI * w1) + std::sin(2.0 * M_PI * w2);
}

} // namespace

const std::map<std::string, BenchmarkDef>& registry() {
    static const std::map<std::string, BenchmarkDef> reg = [] {
        std::map<std::string, BenchmarkDef> m;
        for (BenchmarkDef b : {make_locper1d(), make_oscil1d(), make_nonper2d(), make_ergodic1d()})
            m.emplace(b.id, std::move(b));
        return m;
    }();
    return reg;
}

const BenchmarkDef& benchmark(const std::string& id) {
    const auto it = registry().find(id);
    if (it == registry().end()) throw ConfigError("unknown benchmark '" + id + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

namespace {
nlohmann::json config_json(const RunConfig& c, bool with_out_dir) {
    nlohmann::json j;
    j["benchmark"] = c.benchmark;
    j["eps"] = c.eps;
    j["noise"] = c.noise;
    j["n_data"] = c.n_data;
    j["n_res"] = c.n_res;
    j["seed_data"] = c.seed_data;
    j["seed_init"] = c.seed_init;
    j["seed_noise"] = c.seed_noise;
    j["mesh_n"] = c.mesh_n;
    j["full_scale"] = c.full_scale;
    j["restarts"] = c.restarts;
    j["adam_epochs"] = c.adam_epochs;
    j["batch"] = c.batch;
    j["lr"] = c.lr;
    j["lbfgs_iters"] = c.lbfgs_iters;
    j["cycles"] = c.cycles;
    j["positivity"] = c.positivity;
    j["collocation"] = c.collocation == data::CollocationMode::grid ? "grid" : "uniform_random";
    j["omega"] = {c.omega[0], c.omega[1]};
    j["mc_samples"] = c.mc_samples;
    j["patch_delta"] = c.patch_delta;
    j["patch_resolution"] = c.patch_resolution;
    j["patch_eps"] = c.patch_eps;
    j["ref_slices"] = c.ref_slices;
    j["eval_grid_n"] = c.eval_grid_n;
    if (with_out_dir) j["out_dir"] = c.out_dir;
    return j;
}
} // namespace

std::string RunConfig::to_json() const { return config_json(*this, true).dump(1); }

RunConfig RunConfig::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RunConfig c;
    c.benchmark = j.value("benchmark", c.benchmark);
    c.eps = j.value("eps", c.eps);
    c.noise = j.value("noise", c.noise);
    c.n_data = j.value("n_data", c.n_data);
    c.n_res = j.value("n_res", c.n_res);
    c.seed_data = j.value("seed_data", c.seed_data);
    c.seed_init = j.value("seed_init", c.seed_init);
    c.seed_noise = j.value("seed_noise", c.seed_noise);
    c.mesh_n = j.value("mesh_n", c.mesh_n);
    c.full_scale = j.value("full_scale", c.full_scale);
    c.restarts = j.value("restarts", c.restarts);
    c.adam_epochs = j.value("adam_epochs", c.adam_epochs);
    c.batch = j.value("batch", c.batch);
    c.lr = j.value("lr", c.lr);
    c.lbfgs_iters = j.value("lbfgs_iters", c.lbfgs_iters);
    c.cycles = j.value("cycles", c.cycles);
    c.positivity = j.value("positivity", c.positivity);
    if (j.value("collocation", "grid") == std::string("uniform_random"))
        c.collocation = data::CollocationMode::uniform_random;
    if (j.contains("omega")) c.omega = {j["omega"][0], j["omega"][1]};
    c.mc_samples = j.value("mc_samples", c.mc_samples);
    c.patch_delta = j.value("patch_delta", c.patch_delta);
    c.patch_resolution = j.value("patch_resolution", c.patch_resolution);
    c.patch_eps = j.value("patch_eps", c.patch_eps);
    c.ref_slices = j.value("ref_slices", c.ref_slices);
    c.eval_grid_n = j.value("eval_grid_n", c.eval_grid_n);
    c.out_dir = j.value("out_dir", c.out_dir);
    return c;
}

std::string RunConfig::hash() const {
    // provenance covers the materialized run parameters, not placeholders
    return num::fnv1a_hex(config_json(resolve(*this), false).dump());
}

RunConfig resolve(RunConfig cfg) {
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    if (cfg.eps <= 0.0) cfg.eps = b.default_eps;
    if (cfg.n_data < 0) cfg.n_data = b.default_n_data;
    if (cfg.n_res < 0) {
        const int offset = b.default_n_res - b.default_n_data;
        cfg.n_res = cfg.n_data + offset;
    }
    if (cfg.mesh_n < 0) cfg.mesh_n = cfg.full_scale ? b.paper_mesh_n : b.desk_mesh_n;
    if (cfg.adam_epochs < 0) cfg.adam_epochs = b.hyper.epochs;
    if (cfg.batch < 0) cfg.batch = b.hyper.batch;
    if (cfg.lr < 0.0) cfg.lr = b.hyper.lr;
    if (cfg.patch_eps < 0.0) cfg.patch_eps = cfg.patch_delta / 8.0;
    if (cfg.eval_grid_n < 0) cfg.eval_grid_n = b.eval_grid_n;
    if (b.dim == 2 && cfg.eps < std::pow(2.0, -4) && !cfg.full_scale)
        throw ConfigError("nonper2d with eps < 2^-4 needs --full-scale");
    return cfg;
}

RunPaths run_paths(const RunConfig& cfg) {
    RunPaths p;
    p.dir = cfg.out_dir;
    p.dataset = p.dir + "/dataset.csv";
    p.manifest = p.dir + "/manifest.json";
    p.ref_astar = p.dir + "/reference_astar.csv";
    p.ref_u0_bin = p.dir + "/reference_u0.bin";
    p.ref_u0_csv = p.dir + "/reference_u0.csv";
    p.model_u = p.dir + "/model_u0.json";
    p.model_a = p.dir + "/model_astar.json";
    p.log = p.dir + "/training_log.csv";
    p.report_json = p.dir + "/error_report.json";
    p.report_csv = p.dir + "/error_report.csv";
    return p;
}

// ---------------------------------------------------------------------------
// Pipeline pieces
// ---------------------------------------------------------------------------

hom::CoefficientField make_coefficient(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    return b.coefficient(cfg.eps, cfg.omega);
}

fem::FemSolution synthesize_multiscale(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    const hom::CoefficientField coeff = b.coefficient(cfg.eps, cfg.omega);
    coeff.check_ellipticity(b.lo, b.hi);
    const double hint = b.finest_period(cfg.eps);
    auto f1 = [&](double x) { return b.f({x, 0.0}); };
    if (b.dim == 1) {
        const fem::Mesh mesh = fem::Mesh::line(b.lo[0], b.hi[0], cfg.mesh_n);
        return fem::solve_dirichlet_1d(mesh, coeff.eval_1d, f1, nullptr, hint);
    }
    const fem::Mesh mesh = fem::Mesh::box(b.lo, b.hi, cfg.mesh_n, cfg.mesh_n);
    auto diag = [&](double x, double y) -> std::array<double, 2> {
        const double a = coeff.eval_2d(x, y);
        return {a, a};
    };
    auto f2 = [&](double x, double y) { return b.f({x, y}); };
    return fem::solve_dirichlet_2d(mesh, diag, f2, nullptr, hint, 1e-10, 400000);
}

hom::GLimitField compute_reference_glimit(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    const hom::CoefficientField coeff = b.coefficient(cfg.eps, cfg.omega);
    hom::GLimitField g;
    switch (b.structure) {
        case hom::Structure::locally_periodic_1d: {
            const int n = 4096;
            std::vector<double> grid(n + 1);
            for (int i = 0; i <= n; ++i) grid[i] = b.lo[0] + (b.hi[0] - b.lo[0]) * i / n;
            g = hom::glimit_harmonic_mean_1d(coeff.separated, grid);
            break;
        }
        case hom::Structure::weak_limit_known_1d:
            g = hom::weak_limit_glimit_1d();
            break;
        case hom::Structure::ergodic_1d: {
            std::vector<double> grid(2001);
            for (int i = 0; i <= 2000; ++i) grid[i] = i / 2000.0;
            g = hom::glimit_ergodic_mc(ergodic_stationary, grid, cfg.mc_samples, cfg.seed_data);
            break;
        }
        case hom::Structure::nonperiodic_2d: {
            std::vector<double> slices(cfg.ref_slices);
            for (int i = 0; i < cfg.ref_slices; ++i)
                slices[i] = b.lo[1] + (b.hi[1] - b.lo[1]) * i / (cfg.ref_slices - 1);
            const auto oracle_coeff = b.coefficient(cfg.patch_eps, cfg.omega);
            hom::PatchConfig pc;
            pc.delta = cfg.patch_delta;
            pc.patch_resolution = cfg.patch_resolution;
            pc.x1_center = 0.5 * (b.lo[0] + b.hi[0]);
            pc.domain_lo = b.lo;
            pc.domain_hi = b.hi;
            g = hom::glimit_patch_upscale_2d(oracle_coeff.eval_2d, cfg.patch_eps, slices, pc);
            break;
        }
    }
    if (b.dim == 1)
        hom::check_glimit_ellipticity(g, coeff.alpha, coeff.beta, b.lo[0], b.hi[0]);
    else
        hom::check_glimit_ellipticity(g, coeff.alpha, coeff.beta, b.lo[1], b.hi[1]);
    return g;
}

namespace {

fem::FemSolution reference_homogenized(const RunConfig& cfg, const hom::GLimitField& astar) {
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    auto f1 = [&](double x) { return b.f({x, 0.0}); };
    if (b.dim == 1) {
        const fem::Mesh mesh = fem::Mesh::line(b.lo[0], b.hi[0], cfg.eval_grid_n);
        return fem::solve_dirichlet_1d(mesh, astar.scalar, f1, nullptr);
    }
    const fem::Mesh mesh = fem::Mesh::box(b.lo, b.hi, cfg.eval_grid_n, cfg.eval_grid_n);
    auto diag = [&](double, double y) { return astar.diag(y); };
    auto f2 = [&](double x, double y) { return b.f({x, y}); };
    return fem::solve_dirichlet_2d(mesh, diag, f2, nullptr, std::nullopt, 1e-10, 400000);
}

const char* provenance_name(hom::Provenance p) {
    switch (p) {
        case hom::Provenance::analytic: return "analytic";
        case hom::Provenance::cell_problem: return "cell_problem";
        case hom::Provenance::monte_carlo: return "monte_carlo";
        case hom::Provenance::patch_upscaling: return "patch_upscaling";
        case hom::Provenance::learned: return "learned";
    }
    return "unknown";
}

void update_manifest(const RunConfig& cfg, const std::vector<std::string>& files) {
    const RunPaths p = run_paths(cfg);
    nlohmann::json m;
    if (fs::exists(p.manifest)) {
        std::ifstream in(p.manifest);
        in >> m;
    }
    m["config"] = nlohmann::json::parse(cfg.to_json());
    m["config_hash"] = cfg.hash();
    for (const std::string& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        m["artifacts"][fs::path(f).filename().string()] = num::fnv1a_hex(ss.str());
    }
    std::ofstream out(p.manifest);
    out << m.dump(1) << "\n";
}

hom::GLimitField load_glimit_csv(const std::string& path, int dim) {
    std::FILE* fp = std::fopen(path.c_str(), "r");
    if (!fp) throw ConfigError("load_glimit_csv: cannot open " + path);
    char line[512];
    if (!std::fgets(line, sizeof line, fp)) {
        std::fclose(fp);
        throw ConfigError("load_glimit_csv: empty file");
    }
    std::vector<double> grid, vals;
    std::vector<std::array<double, 2>> dvals;
    hom::Provenance prov = hom::Provenance::analytic;
    char pbuf[64];
    while (std::fgets(line, sizeof line, fp)) {
        double x, a, a2;
        if (dim == 1) {
            if (std::sscanf(line, "%lg,%lg,%63[^,\n]", &x, &a, pbuf) >= 2) {
                grid.push_back(x);
                vals.push_back(a);
            }
        } else {
            if (std::sscanf(line, "%lg,%lg,%lg,%63[^,\n]", &x, &a, &a2, pbuf) >= 3) {
                grid.push_back(x);
                dvals.push_back({a, a2});
            }
        }
    }
    std::fclose(fp);
    const std::string pstr(pbuf);
    if (pstr == "cell_problem") prov = hom::Provenance::cell_problem;
    else if (pstr == "monte_carlo") prov = hom::Provenance::monte_carlo;
    else if (pstr == "patch_upscaling") prov = hom::Provenance::patch_upscaling;
    else if (pstr == "learned") prov = hom::Provenance::learned;
    if (dim == 1) return hom::tabulated_1d(std::move(grid), std::move(vals), prov);
    return hom::tabulated_diag_2d(std::move(grid), std::move(dvals), prov);
}

} // namespace

train::PinnModel make_model(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    train::PinnModel m;
    m.dim = b.dim;
    m.u_spec = {b.dim, 1, b.hyper.u_depth, b.hyper.u_width};
    m.a_spec = {1, b.dim == 2 ? 2 : 1, b.hyper.a_depth, b.hyper.a_width};
    m.wrapper.dim = b.dim;
    m.wrapper.lo = b.lo[0];
    m.wrapper.hi = b.hi[0];
    m.positivity = cfg.positivity;
    m.u_params = net::init_glorot(m.u_spec, cfg.seed_init);
    m.a_params = net::init_glorot(m.a_spec, cfg.seed_init + 1);
    return m;
}

metrics::ErrorReport evaluate_model(const RunConfig& cfg0, const train::PinnModel& model,
                                    const hom::GLimitField& astar_ref,
                                    const fem::FemSolution& u0_ref) {
    const RunConfig cfg = resolve(cfg0);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    metrics::GridSpec grid;
    grid.dim = b.dim;
    grid.lo = b.lo;
    grid.hi = b.hi;
    grid.n = {cfg.eval_grid_n, b.dim == 2 ? cfg.eval_grid_n : 0};

    metrics::ErrorReport rep;
    rep.grid = grid;
    rep.astar_reference = provenance_name(astar_ref.provenance);
    rep.u0_reference = "fem";
    rep.benchmark = cfg.benchmark;
    rep.eps = cfg.eps;
    rep.noise = cfg.noise;
    rep.n_data = cfg.n_data;
    rep.n_res = cfg.n_res;
    rep.seed = cfg.seed_init;
    rep.config_hash = cfg.hash();

    if (b.dim == 1) {
        rep.e_astar = metrics::relative_l2_1d([&](double x) { return model.astar_1d(x); },
                                              astar_ref.scalar, grid);
        rep.e_u0 = metrics::relative_l2_1d([&](double x) { return model.u0_1d(x); },
                                           [&](double x) { return u0_ref.eval1(x); }, grid);
    } else {
        rep.e_astar = metrics::relative_l2_diag([&](double x2) { return model.astar_2d(x2); },
                                                astar_ref.diag, grid);
        rep.e_u0 = metrics::relative_l2_2d([&](double x, double y) { return model.u0_2d(x, y); },
                                           [&](double x, double y) { return u0_ref.eval2(x, y); },
                                           grid);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_generate(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const RunPaths paths = run_paths(cfg);
    fs::create_directories(paths.dir);

    const fem::FemSolution u_eps = synthesize_multiscale(cfg);
    data::SampleSet set = data::sample_equispaced(u_eps, cfg.n_data);
    set.eps = cfg.eps;
    set.run_id = cfg.hash();
    set = data::add_noise(set, cfg.noise, cfg.seed_noise);

    const BenchmarkDef& b = benchmark(cfg.benchmark);
    data::save_csv(set, b.lo, b.hi, paths.dataset);
    u_eps.save_binary(paths.dir + "/multiscale_u.bin");
    update_manifest(cfg, {paths.dataset, paths.dir + "/multiscale_u.bin"});
    std::cout << "generate: wrote " << paths.dataset << " (" << set.points.size() << " samples)\n";
}

void cmd_reference(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const RunPaths paths = run_paths(cfg);
    fs::create_directories(paths.dir);

    hom::GLimitField astar = compute_reference_glimit(cfg);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    if (astar.grid.empty()) {
        // closed form: tabulate on the evaluation grid for the artifact
        const int n = std::min(cfg.eval_grid_n, 8192);
        std::vector<double> grid(n + 1), vals(n + 1);
        for (int i = 0; i <= n; ++i) {
            grid[i] = b.lo[0] + (b.hi[0] - b.lo[0]) * i / n;
            vals[i] = astar.scalar(grid[i]);
        }
        hom::GLimitField tab = hom::tabulated_1d(std::move(grid), std::move(vals), astar.provenance);
        tab.export_csv(paths.ref_astar);
    } else {
        astar.export_csv(paths.ref_astar);
    }
    const fem::FemSolution u0 = reference_homogenized(cfg, astar);
    u0.save_binary(paths.ref_u0_bin);
    u0.export_csv(paths.ref_u0_csv);
    update_manifest(cfg, {paths.ref_astar, paths.ref_u0_bin, paths.ref_u0_csv});
    std::cout << "reference: wrote " << paths.ref_astar << " and " << paths.ref_u0_bin << "\n";
}

namespace {

// references from disk, computing and persisting them when absent
std::pair<hom::GLimitField, fem::FemSolution> ensure_references(const RunConfig& cfg) {
    const RunPaths paths = run_paths(cfg);
    if (!fs::exists(paths.ref_astar) || !fs::exists(paths.ref_u0_bin)) cmd_reference(cfg);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    return {load_glimit_csv(paths.ref_astar, b.dim), fem::FemSolution::load_binary(paths.ref_u0_bin)};
}

} // namespace

metrics::ErrorReport cmd_train(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const RunPaths paths = run_paths(cfg);
    if (!fs::exists(paths.dataset))
        throw ConfigError("train: dataset not found at " + paths.dataset +
                          " (run `glimit generate` first)");
    const data::SampleSet td = data::load_csv(paths.dataset);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    const data::CollocationSet tr =
        data::make_collocation(b.dim, b.lo, b.hi, cfg.n_res, cfg.collocation, cfg.seed_data);

    train::PinnModel prototype = make_model(cfg);
    train::TrainConfig tc;
    tc.adam_epochs = cfg.adam_epochs;
    tc.batch_data = cfg.batch;
    tc.lr0 = cfg.lr;
    tc.lbfgs_iters = cfg.lbfgs_iters;
    tc.restarts = cfg.restarts;
    tc.cycles = cfg.cycles;
    tc.init_seed = cfg.seed_init;
    tc.positivity = cfg.positivity;

    const train::TrainResult result = train::train(prototype, b.f, td, tr, tc);

    net::save_params(result.best.u_params, paths.model_u);
    net::save_params(result.best.a_params, paths.model_a);
    train::write_log_csv(result.log, paths.log);

    auto [astar_ref, u0_ref] = ensure_references(cfg);
    metrics::ErrorReport rep = evaluate_model(cfg, result.best, astar_ref, u0_ref);

    std::ofstream out(paths.report_json);
    out << rep.to_json() << "\n";
    out.close();
    std::ofstream csv(paths.report_csv);
    csv << metrics::ErrorReport::csv_header() << "\n" << rep.csv_row() << "\n";
    csv.close();
    update_manifest(cfg, {paths.model_u, paths.model_a, paths.log, paths.report_json});

    std::cout << "train: best restart " << result.best_restart << " final loss "
              << result.best_final_loss << "\n"
              << "train: e_astar=" << rep.e_astar << " e_u0=" << rep.e_u0 << "\n";
    return rep;
}

metrics::ErrorReport cmd_evaluate(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const RunPaths paths = run_paths(cfg);
    train::PinnModel model = make_model(cfg);
    model.u_params = net::load_params(paths.model_u);
    model.a_params = net::load_params(paths.model_a);
    auto [astar_ref, u0_ref] = ensure_references(cfg);
    metrics::ErrorReport rep = evaluate_model(cfg, model, astar_ref, u0_ref);
    std::ofstream out(paths.report_json);
    out << rep.to_json() << "\n";
    std::cout << "evaluate: e_astar=" << rep.e_astar << " e_u0=" << rep.e_u0 << "\n";
    return rep;
}

void cmd_export_plots(const RunConfig& cfg0) {
    const RunConfig cfg = resolve(cfg0);
    const RunPaths paths = run_paths(cfg);
    const BenchmarkDef& b = benchmark(cfg.benchmark);
    train::PinnModel model = make_model(cfg);
    model.u_params = net::load_params(paths.model_u);
    model.a_params = net::load_params(paths.model_a);
    auto [astar_ref, u0_ref] = ensure_references(cfg);

    if (b.dim == 1) {
        std::FILE* fp = std::fopen((paths.dir + "/astar_curve.csv").c_str(), "w");
        std::fprintf(fp, "x,astar_learned,astar_reference\n");
        for (int i = 0; i <= 1000; ++i) {
            const double x = b.lo[0] + (b.hi[0] - b.lo[0]) * i / 1000;
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", x, model.astar_1d(x), astar_ref.scalar(x));
        }
        std::fclose(fp);
        fp = std::fopen((paths.dir + "/solution_curve.csv").c_str(), "w");
        std::fprintf(fp, "x,u0_learned,u0_reference\n");
        for (int i = 0; i <= 1000; ++i) {
            const double x = b.lo[0] + (b.hi[0] - b.lo[0]) * i / 1000;
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", x, model.u0_1d(x), u0_ref.eval1(x));
        }
        std::fclose(fp);
    } else {
        std::FILE* fp = std::fopen((paths.dir + "/astar_curve.csv").c_str(), "w");
        std::fprintf(fp, "x2,a11_learned,a22_learned,a11_reference,a22_reference\n");
        for (int i = 0; i <= 1000; ++i) {
            const double x2 = b.lo[1] + (b.hi[1] - b.lo[1]) * i / 1000;
            const auto l = model.astar_2d(x2);
            const auto r = astar_ref.diag(x2);
            std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g\n", x2, l[0], l[1], r[0], r[1]);
        }
        std::fclose(fp);
        fp = std::fopen((paths.dir + "/solution_grid.csv").c_str(), "w");
        std::fprintf(fp, "x1,x2,u0_learned,u0_reference,abs_error\n");
        const int n = 128;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i) {
                const double x = b.lo[0] + (b.hi[0] - b.lo[0]) * i / n;
                const double y = b.lo[1] + (b.hi[1] - b.lo[1]) * j / n;
                const double ul = model.u0_2d(x, y), ur = u0_ref.eval2(x, y);
                std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g\n", x, y, ul, ur,
                             std::abs(ul - ur));
            }
        std::fclose(fp);
        fp = std::fopen((paths.dir + "/solution_slice.csv").c_str(), "w");
        std::fprintf(fp, "x2,u0_learned,u0_reference\n");
        const double x1 = 1.25;
        for (int i = 0; i <= 1000; ++i) {
            const double x2 = b.lo[1] + (b.hi[1] - b.lo[1]) * i / 1000;
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", x2, model.u0_2d(x1, x2),
                         u0_ref.eval2(x1, x2));
        }
        std::fclose(fp);
    }
    std::cout << "export-plots: wrote plot CSVs to " << paths.dir << "\n";
}

int cmd_sweep(const std::string& axis, const std::vector<double>& values, const RunConfig& base) {
    fs::create_directories(base.out_dir);
    const std::string csv_path = base.out_dir + "/sweep_" + axis + ".csv";
    std::ofstream csv(csv_path);
    csv << "axis,value,e_astar,e_u0,wall_s,status\n";
    int failures = 0;
    for (const double v : values) {
        RunConfig cfg = base;
        char tag[64];
        std::snprintf(tag, sizeof tag, "%s_%g", axis.c_str(), v);
        cfg.out_dir = base.out_dir + "/" + tag;
        if (axis == "eps") cfg.eps = v;
        else if (axis == "noise") cfg.noise = v;
        else if (axis == "ndata") {
            cfg.n_data = static_cast<int>(v);
            cfg.n_res = -1; // re-derive from the benchmark's offset rule
        } else
            throw ConfigError("cmd_sweep: unknown axis '" + axis + "'");
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cmd_generate(cfg);
            const metrics::ErrorReport rep = cmd_train(cfg);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            char row[256];
            std::snprintf(row, sizeof row, "%s,%.17g,%.17g,%.17g,%.3f,ok", axis.c_str(), v,
                          rep.e_astar, rep.e_u0, secs);
            csv << row << "\n";
        } catch (const std::exception& e) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            csv << axis << "," << v << ",nan,nan," << secs << ",failed: " << e.what() << "\n";
            ++failures;
        }
        csv.flush();
    }
    std::cout << "sweep: wrote " << csv_path << " (" << failures << " failures)\n";
    return failures;
}

} // namespace glimit::bench
