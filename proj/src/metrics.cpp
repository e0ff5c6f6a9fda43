#include "glimit/metrics.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace glimit::metrics {

namespace {

double trapz_weight_1d(int i, int n) { return (i == 0 || i == n) ? 0.5 : 1.0; }

} // namespace

double relative_l2_1d(const Field1& fhat, const Field1& fref, const GridSpec& grid) {
    const int n = grid.n[0];
    const double h = (grid.hi[0] - grid.lo[0]) / n;
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = grid.lo[0] + i * h;
        const double w = trapz_weight_1d(i, n) * h;
        const double r = fref(x), d = fhat(x) - r;
        num += w * d * d;
        den += w * r * r;
    }
    if (!(den > 0.0)) throw UsageError("relative_l2: reference norm is zero");
    return std::sqrt(num / den);
}

double relative_l2_2d(const Field2& fhat, const Field2& fref, const GridSpec& grid) {
    const int nx = grid.n[0], ny = grid.n[1];
    const double hx = (grid.hi[0] - grid.lo[0]) / nx;
    const double hy = (grid.hi[1] - grid.lo[1]) / ny;
    double num = 0.0, den = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : num, den) if (int64_t(nx) * ny > 65536)
    for (int j = 0; j <= ny; ++j) {
        const double y = grid.lo[1] + j * hy;
        const double wy = trapz_weight_1d(j, ny) * hy;
        double lnum = 0.0, lden = 0.0;
        for (int i = 0; i <= nx; ++i) {
            const double x = grid.lo[0] + i * hx;
            const double w = wy * trapz_weight_1d(i, nx) * hx;
            const double r = fref(x, y), d = fhat(x, y) - r;
            lnum += w * d * d;
            lden += w * r * r;
        }
        num += lnum;
        den += lden;
    }
    if (!(den > 0.0)) throw UsageError("relative_l2: reference norm is zero");
    return std::sqrt(num / den);
}

double relative_l2_diag(const DiagField& fhat, const DiagField& fref, const GridSpec& grid) {
    // fields depend on x2 only; the x1 quadrature is a constant factor that
    // cancels in the ratio, so integrate along x2 with Frobenius contraction
    const int n = grid.n[1] > 0 ? grid.n[1] : grid.n[0];
    const double lo = grid.dim == 2 ? grid.lo[1] : grid.lo[0];
    const double hi = grid.dim == 2 ? grid.hi[1] : grid.hi[0];
    const double h = (hi - lo) / n;
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + i * h;
        const double w = trapz_weight_1d(i, n) * h;
        const auto r = fref(x), v = fhat(x);
        const double d0 = v[0] - r[0], d1 = v[1] - r[1];
        num += w * (d0 * d0 + d1 * d1);
        den += w * (r[0] * r[0] + r[1] * r[1]);
    }
    if (!(den > 0.0)) throw UsageError("relative_l2: reference norm is zero");
    return std::sqrt(num / den);
}

std::string ErrorReport::to_json() const {
    nlohmann::json j;
    j["e_astar"] = e_astar;
    j["e_u0"] = e_u0;
    j["grid"] = {{"dim", grid.dim},
                 {"lo", {grid.lo[0], grid.lo[1]}},
                 {"hi", {grid.hi[0], grid.hi[1]}},
                 {"n", {grid.n[0], grid.n[1]}}};
    j["astar_reference"] = astar_reference;
    j["u0_reference"] = u0_reference;
    j["run"] = {{"benchmark", benchmark}, {"eps", eps},       {"noise", noise},
                {"n_data", n_data},       {"n_res", n_res},   {"seed", seed},
                {"config_hash", config_hash}};
    return j.dump(1);
}

ErrorReport ErrorReport::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ErrorReport r;
    r.e_astar = j["e_astar"];
    r.e_u0 = j["e_u0"];
    r.grid.dim = j["grid"]["dim"];
    r.grid.lo = {j["grid"]["lo"][0], j["grid"]["lo"][1]};
    r.grid.hi = {j["grid"]["hi"][0], j["grid"]["hi"][1]};
    r.grid.n = {j["grid"]["n"][0], j["grid"]["n"][1]};
    r.astar_reference = j["astar_reference"];
    r.u0_reference = j["u0_reference"];
    r.benchmark = j["run"]["benchmark"];
    r.eps = j["run"]["eps"];
    r.noise = j["run"]["noise"];
    r.n_data = j["run"]["n_data"];
    r.n_res = j["run"]["n_res"];
    r.seed = j["run"]["seed"];
    r.config_hash = j["run"]["config_hash"];
    return r;
}

std::string ErrorReport::csv_header() {
    return "benchmark,eps,noise,n_data,n_res,seed,e_astar,e_u0,config_hash";
}

std::string ErrorReport::csv_row() const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%d,%d,%llu,%.17g,%.17g,%s", benchmark.c_str(),
                  eps, noise, n_data, n_res, static_cast<unsigned long long>(seed), e_astar, e_u0,
                  config_hash.c_str());
    return buf;
}

} // namespace glimit::metrics
