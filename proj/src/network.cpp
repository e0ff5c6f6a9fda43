#include "glimit/network.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "glimit/numerics.hpp"

namespace glimit::net {

Params init_glorot(const MlpSpec& spec, uint64_t seed) {
    spec.validate();
    Params p;
    p.spec = spec;
    p.seed = seed;
    p.flat.assign(spec.param_count(), 0.0);
    num::Rng rng(seed);
    size_t k = 0;
    int n_in = spec.input_dim;
    for (int l = 0; l <= spec.depth; ++l) {
        const int n_out = (l == spec.depth) ? spec.output_dim : spec.width;
        const double stddev = std::sqrt(2.0 / (n_in + n_out));
        for (int j = 0; j < n_in * n_out; ++j) p.flat[k + j] = stddev * rng.normal();
        // biases stay zero
        k += static_cast<size_t>(n_in) * n_out + n_out;
        n_in = n_out;
    }
    return p;
}

void save_params(const Params& p, const std::string& path) {
    nlohmann::json j;
    j["format"] = "glimit-params v1";
    j["spec"] = {{"input_dim", p.spec.input_dim},
                 {"output_dim", p.spec.output_dim},
                 {"depth", p.spec.depth},
                 {"width", p.spec.width}};
    j["seed"] = p.seed;
    j["training_step"] = p.training_step;
    j["values"] = p.flat;
    std::ofstream out(path);
    if (!out) throw ConfigError("save_params: cannot open " + path);
    out << j.dump(1) << "\n";
}

Params load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_params: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != std::string("glimit-params v1"))
        throw ConfigError("load_params: unrecognized format in " + path);
    Params p;
    p.spec.input_dim = j["spec"]["input_dim"];
    p.spec.output_dim = j["spec"]["output_dim"];
    p.spec.depth = j["spec"]["depth"];
    p.spec.width = j["spec"]["width"];
    p.seed = j["seed"];
    p.training_step = j["training_step"];
    p.flat = j["values"].get<std::vector<double>>();
    if (static_cast<int>(p.flat.size()) != p.spec.param_count())
        throw ConfigError("load_params: value count does not match spec");
    return p;
}

} // namespace glimit::net
