#pragma once

// Benchmark registry and end-to-end orchestration: data synthesis, reference
// computation, training, evaluation, sweeps, and plot-ready exports.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glimit/dataset.hpp"
#include "glimit/homogenize.hpp"
#include "glimit/metrics.hpp"
#include "glimit/training.hpp"

namespace glimit::bench {

struct Hyper {
    int a_depth = 3, a_width = 30;
    int u_depth = 3, u_width = 30;
    double lr = 1e-3;
    int epochs = 40000;
    int batch = 64;
};

struct RunConfig {
    std::string benchmark = "locper1d";
    double eps = 1.0 / 128.0;
    double noise = 0.0;
    int n_data = -1; // -1: benchmark default
    int n_res = -1;
    uint64_t seed_data = 1, seed_init = 1, seed_noise = 1;
    int mesh_n = -1; // synthesis mesh subdivisions (-1: desk default)
    bool full_scale = false;
    int restarts = 5;
    int adam_epochs = -1;
    int batch = -1;
    double lr = -1.0;
    int lbfgs_iters = 500;
    int cycles = 1;
    bool positivity = true;
    data::CollocationMode collocation = data::CollocationMode::grid;
    std::array<double, 2> omega{0.5, 0.5}; // ergodic realization
    int mc_samples = 200000;
    // patch-upscaling oracle (nonper2d)
    double patch_delta = 0.125;
    int patch_resolution = 256;
    double patch_eps = -1.0; // coefficient scale used by the oracle; -1: delta/8
    int ref_slices = 17;
    int eval_grid_n = -1; // -1: paper default for the benchmark
    std::string out_dir = "out/run";

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    std::string hash() const; // over science-relevant fields (not out_dir)
};

struct BenchmarkDef {
    std::string id;
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0}, hi{1.0, 1.0};
    hom::Structure structure;
    train::SourceFn f;
    std::function<hom::CoefficientField(double eps, std::array<double, 2> omega)> coefficient;
    std::function<double(double eps)> finest_period; // resolution hint
    Hyper hyper;
    int default_n_data = 160, default_n_res = 190;
    double default_eps = 1.0 / 128.0;
    int desk_mesh_n = 32768;
    int paper_mesh_n = 100000;
    int eval_grid_n = 100000; // per-axis intervals of the error grid
};

const std::map<std::string, BenchmarkDef>& registry();
const BenchmarkDef& benchmark(const std::string& id);

// filled-in config (benchmark defaults applied)
RunConfig resolve(RunConfig cfg);

struct RunPaths {
    std::string dir;
    std::string dataset, manifest, ref_astar, ref_u0_bin, ref_u0_csv;
    std::string model_u, model_a, log, report_json, report_csv;
};
RunPaths run_paths(const RunConfig& cfg);

// subcommand bodies (CLI maps 1:1 onto these)
void cmd_generate(const RunConfig& cfg);
void cmd_reference(const RunConfig& cfg);
metrics::ErrorReport cmd_train(const RunConfig& cfg);
metrics::ErrorReport cmd_evaluate(const RunConfig& cfg);
void cmd_export_plots(const RunConfig& cfg);

// sweep over one axis; returns the number of failed runs (0 = all good).
// Appends one row per value to <out_dir>/sweep_<axis>.csv.
int cmd_sweep(const std::string& axis, const std::vector<double>& values, const RunConfig& base);

// helpers shared with tests
hom::CoefficientField make_coefficient(const RunConfig& cfg);
hom::GLimitField compute_reference_glimit(const RunConfig& cfg);
fem::FemSolution synthesize_multiscale(const RunConfig& cfg);
train::PinnModel make_model(const RunConfig& cfg);
metrics::ErrorReport evaluate_model(const RunConfig& cfg, const train::PinnModel& model,
                                    const hom::GLimitField& astar_ref,
                                    const fem::FemSolution& u0_ref);

} // namespace glimit::bench
