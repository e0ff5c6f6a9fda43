// glimit: learn homogenized coefficients and solutions of multiscale
// elliptic equations from solution data, with FEM synthesis and classical
// homogenization references.
//
// Exit codes: 0 success, 2 config error, 3 numeric error, 4 partial sweep
// failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>
#include <omp.h>

#include <CLI11.hpp>

#include "glimit/bench.hpp"
#include "glimit/errors.hpp"

using namespace glimit;

namespace {

void add_config_flags(CLI::App* cmd, bench::RunConfig& cfg, std::string& config_file) {
    cmd->add_option("--config", config_file, "JSON config file (flags override its fields)");
    cmd->add_option("-b,--benchmark", cfg.benchmark,
                    "benchmark id: locper1d | oscil1d | nonper2d | ergodic1d");
    cmd->add_option("--eps", cfg.eps, "finescale parameter");
    cmd->add_option("--noise", cfg.noise, "noise level (fraction of data RMS)");
    cmd->add_option("--n-data", cfg.n_data, "number of data points |T_d|");
    cmd->add_option("--n-res", cfg.n_res, "number of residual points |T_r|");
    cmd->add_option("--seed-data", cfg.seed_data, "data/collocation seed");
    cmd->add_option("--seed-init", cfg.seed_init, "network init seed");
    cmd->add_option("--seed-noise", cfg.seed_noise, "noise seed");
    cmd->add_option("--mesh-n", cfg.mesh_n, "synthesis mesh subdivisions");
    cmd->add_flag("--full-scale", cfg.full_scale, "allow paper-scale meshes and eps");
    cmd->add_option("--restarts", cfg.restarts, "random restarts");
    cmd->add_option("--epochs", cfg.adam_epochs, "ADAM epochs (one minibatch step each)");
    cmd->add_option("--batch", cfg.batch, "minibatch size over T_d");
    cmd->add_option("--lr", cfg.lr, "initial learning rate");
    cmd->add_option("--lbfgs-iters", cfg.lbfgs_iters, "L-BFGS iterations after ADAM");
    cmd->add_option("--cycles", cfg.cycles, "ADAM+L-BFGS cycles");
    cmd->add_option("--positivity", cfg.positivity,
                    "coefficient positivity transform (softplus + floor)");
    cmd->add_option("--omega1", cfg.omega[0], "ergodic realization omega_1");
    cmd->add_option("--omega2", cfg.omega[1], "ergodic realization omega_2");
    cmd->add_option("--mc-samples", cfg.mc_samples, "Monte-Carlo samples for the reference");
    cmd->add_option("--patch-delta", cfg.patch_delta, "patch size of the upscaling oracle");
    cmd->add_option("--patch-resolution", cfg.patch_resolution, "patch mesh subdivisions");
    cmd->add_option("--patch-eps", cfg.patch_eps, "coefficient scale for the patch oracle");
    cmd->add_option("--ref-slices", cfg.ref_slices, "x2 slices of the 2D reference");
    cmd->add_option("--eval-grid-n", cfg.eval_grid_n, "error evaluation grid subdivisions");
    cmd->add_option("-o,--out", cfg.out_dir, "run output directory");
}

bench::RunConfig finalize_config(const CLI::App* cmd, bench::RunConfig flag_values,
                                 const std::string& config_file) {
    bench::RunConfig cfg;
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw ConfigError("cannot open config file " + config_file);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = bench::RunConfig::from_json(ss.str());
    }
    // flags override file fields; CLI11 tracks what was actually given
    auto given = [&](const std::string& name) { return cmd->count(name) > 0; };
    if (config_file.empty()) {
        cfg = flag_values;
    } else {
        if (given("--benchmark")) cfg.benchmark = flag_values.benchmark;
        if (given("--eps")) cfg.eps = flag_values.eps;
        if (given("--noise")) cfg.noise = flag_values.noise;
        if (given("--n-data")) cfg.n_data = flag_values.n_data;
        if (given("--n-res")) cfg.n_res = flag_values.n_res;
        if (given("--seed-data")) cfg.seed_data = flag_values.seed_data;
        if (given("--seed-init")) cfg.seed_init = flag_values.seed_init;
        if (given("--seed-noise")) cfg.seed_noise = flag_values.seed_noise;
        if (given("--mesh-n")) cfg.mesh_n = flag_values.mesh_n;
        if (given("--full-scale")) cfg.full_scale = flag_values.full_scale;
        if (given("--restarts")) cfg.restarts = flag_values.restarts;
        if (given("--epochs")) cfg.adam_epochs = flag_values.adam_epochs;
        if (given("--batch")) cfg.batch = flag_values.batch;
        if (given("--lr")) cfg.lr = flag_values.lr;
        if (given("--lbfgs-iters")) cfg.lbfgs_iters = flag_values.lbfgs_iters;
        if (given("--cycles")) cfg.cycles = flag_values.cycles;
        if (given("--positivity")) cfg.positivity = flag_values.positivity;
        if (given("--omega1")) cfg.omega[0] = flag_values.omega[0];
        if (given("--omega2")) cfg.omega[1] = flag_values.omega[1];
        if (given("--mc-samples")) cfg.mc_samples = flag_values.mc_samples;
        if (given("--patch-delta")) cfg.patch_delta = flag_values.patch_delta;
        if (given("--patch-resolution")) cfg.patch_resolution = flag_values.patch_resolution;
        if (given("--patch-eps")) cfg.patch_eps = flag_values.patch_eps;
        if (given("--ref-slices")) cfg.ref_slices = flag_values.ref_slices;
        if (given("--eval-grid-n")) cfg.eval_grid_n = flag_values.eval_grid_n;
        if (given("--out")) cfg.out_dir = flag_values.out_dir;
    }
    if (const char* root = std::getenv("GLIMIT_OUT_ROOT"))
        if (cfg.out_dir.find('/') != 0) cfg.out_dir = std::string(root) + "/" + cfg.out_dir;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"glimit: G-limit learning for multiscale elliptic equations"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "OpenMP thread count (1 = strict serial mode)");

    bench::RunConfig cfg;
    std::string config_file;
    std::string sweep_axis = "noise";
    std::vector<double> sweep_values;

    CLI::App* c_gen = app.add_subcommand("generate", "synthesize a multiscale dataset");
    CLI::App* c_ref = app.add_subcommand("reference", "compute reference G-limit and solution");
    CLI::App* c_train = app.add_subcommand("train", "train the PINN and write an error report");
    CLI::App* c_eval = app.add_subcommand("evaluate", "evaluate a saved model");
    CLI::App* c_sweep = app.add_subcommand("sweep", "run a parameter sweep");
    CLI::App* c_plots = app.add_subcommand("export-plots", "emit tidy CSVs for plotting");
    for (CLI::App* c : {c_gen, c_ref, c_train, c_eval, c_sweep, c_plots})
        add_config_flags(c, cfg, config_file);
    c_sweep->add_option("--axis", sweep_axis, "sweep axis: eps | noise | ndata");
    c_sweep->add_option("--values", sweep_values, "axis values")->expected(-1);

    CLI11_PARSE(app, argc, argv);

    if (const char* t = std::getenv("GLIMIT_THREADS"))
        if (threads == 0) threads = std::atoi(t);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        CLI::App* sub = app.get_subcommands().front();
        const bench::RunConfig run_cfg = finalize_config(sub, cfg, config_file);
        if (sub == c_gen) {
            bench::cmd_generate(run_cfg);
        } else if (sub == c_ref) {
            bench::cmd_reference(run_cfg);
        } else if (sub == c_train) {
            bench::cmd_train(run_cfg);
        } else if (sub == c_eval) {
            bench::cmd_evaluate(run_cfg);
        } else if (sub == c_plots) {
            bench::cmd_export_plots(run_cfg);
        } else if (sub == c_sweep) {
            if (sweep_values.empty())
                std::cout << "sweep: empty value list\n";
            const int failures = bench::cmd_sweep(sweep_axis, sweep_values, run_cfg);
            if (failures > 0) return 4;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
