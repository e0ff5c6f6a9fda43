#include "glimit/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>

#include "glimit/numerics.hpp"

namespace glimit::data {

SampleSet sample_equispaced(const fem::FemSolution& u, int n) {
    SampleSet s;
    s.dim = u.mesh.dim;
    s.eps = 0.0;
    s.mesh_h = u.mesh.h(0);
    if (s.dim == 1) {
        if (n < 2) throw ConfigError("sample_equispaced: need n >= 2");
        if (n > u.mesh.n[0])
            std::cerr << "[glimit::data] warning: sample count exceeds mesh resolution\n";
        const double lo = u.mesh.lo[0], hi = u.mesh.hi[0];
        for (int i = 1; i <= n; ++i) {
            const double x = lo + (hi - lo) * i / (n + 1);
            s.points.push_back({x, 0.0});
            s.values.push_back(u.eval1(x));
        }
    } else {
        const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
        if (m * m != n) throw ConfigError("sample_equispaced: 2D count must be a perfect square");
        if (m > u.mesh.n[0] || m > u.mesh.n[1])
            std::cerr << "[glimit::data] warning: sample grid exceeds mesh resolution\n";
        for (int j = 1; j <= m; ++j)
            for (int i = 1; i <= m; ++i) {
                const double x = u.mesh.lo[0] + (u.mesh.hi[0] - u.mesh.lo[0]) * i / (m + 1);
                const double y = u.mesh.lo[1] + (u.mesh.hi[1] - u.mesh.lo[1]) * j / (m + 1);
                s.points.push_back({x, y});
                s.values.push_back(u.eval2(x, y));
            }
    }
    return s;
}

SampleSet add_noise(const SampleSet& s, double level, uint64_t seed) {
    if (level < 0.0 || level > 0.2)
        throw ConfigError("add_noise: level must lie in [0, 0.2]");
    SampleSet out = s;
    out.noise_level = level;
    out.seed = seed;
    if (level == 0.0) return out;
    double sq = 0.0;
    for (double v : s.values) sq += v * v;
    const double rms = std::sqrt(sq / s.values.size());
    num::Rng rng(seed);
    for (double& v : out.values) v += level * rms * rng.normal();
    return out;
}

CollocationSet make_collocation(int dim, std::array<double, 2> lo, std::array<double, 2> hi,
                                int n, CollocationMode mode, uint64_t seed) {
    if (n < 1) throw ConfigError("make_collocation: need n >= 1");
    CollocationSet c;
    c.dim = dim;
    if (mode == CollocationMode::grid) {
        if (dim == 1) {
            for (int i = 1; i <= n; ++i)
                c.points.push_back({lo[0] + (hi[0] - lo[0]) * i / (n + 1), 0.0});
        } else {
            const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
            if (m * m != n)
                throw ConfigError("make_collocation: 2D grid count must be a perfect square");
            for (int j = 1; j <= m; ++j)
                for (int i = 1; i <= m; ++i)
                    c.points.push_back({lo[0] + (hi[0] - lo[0]) * i / (m + 1),
                                        lo[1] + (hi[1] - lo[1]) * j / (m + 1)});
        }
    } else {
        num::Rng rng(seed);
        while (static_cast<int>(c.points.size()) < n) {
            std::array<double, 2> p{0.0, 0.0};
            bool interior = true;
            for (int d = 0; d < dim; ++d) {
                p[d] = lo[d] + (hi[d] - lo[d]) * rng.uniform01();
                interior = interior && p[d] > lo[d] && p[d] < hi[d];
            }
            if (interior) c.points.push_back(p);
        }
    }
    return c;
}

void save_csv(const SampleSet& s, std::array<double, 2> lo, std::array<double, 2> hi,
              const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw ConfigError("save_csv: cannot open " + path);
    std::fprintf(fp, "# glimit-dataset v1; eps=%.17g; h=%.17g; noise=%.17g; seed=%llu; run=%s; "
                     "dim=%d; lo=%.17g,%.17g; hi=%.17g,%.17g\n",
                 s.eps, s.mesh_h, s.noise_level, static_cast<unsigned long long>(s.seed),
                 s.run_id.empty() ? "-" : s.run_id.c_str(), s.dim, lo[0], lo[1], hi[0], hi[1]);
    if (s.dim == 1) {
        std::fprintf(fp, "x,u\n");
        for (size_t i = 0; i < s.points.size(); ++i)
            std::fprintf(fp, "%.17g,%.17g\n", s.points[i][0], s.values[i]);
    } else {
        std::fprintf(fp, "x1,x2,u\n");
        for (size_t i = 0; i < s.points.size(); ++i)
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", s.points[i][0], s.points[i][1], s.values[i]);
    }
    std::fclose(fp);
}

SampleSet load_csv(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "r");
    if (!fp) throw ConfigError("load_csv: cannot open " + path);
    SampleSet s;
    char line[512];
    if (!std::fgets(line, sizeof line, fp)) {
        std::fclose(fp);
        throw ConfigError("load_csv: empty file " + path);
    }
    char run[128] = "-";
    unsigned long long seed = 0;
    double lo0, lo1, hi0, hi1;
    const int matched =
        std::sscanf(line,
                    "# glimit-dataset v1; eps=%lg; h=%lg; noise=%lg; seed=%llu; run=%127[^;]; "
                    "dim=%d; lo=%lg,%lg; hi=%lg,%lg",
                    &s.eps, &s.mesh_h, &s.noise_level, &seed, run, &s.dim, &lo0, &lo1, &hi0, &hi1);
    if (matched != 10) {
        std::fclose(fp);
        throw ConfigError("load_csv: bad dataset header in " + path);
    }
    s.seed = seed;
    if (std::strcmp(run, "-") != 0) s.run_id = run;
    if (!std::fgets(line, sizeof line, fp)) {
        std::fclose(fp);
        throw ConfigError("load_csv: missing column header in " + path);
    }
    while (std::fgets(line, sizeof line, fp)) {
        std::array<double, 2> p{0.0, 0.0};
        double u = 0.0;
        if (s.dim == 1) {
            if (std::sscanf(line, "%lg,%lg", &p[0], &u) != 2) continue;
        } else {
            if (std::sscanf(line, "%lg,%lg,%lg", &p[0], &p[1], &u) != 3) continue;
        }
        s.points.push_back(p);
        s.values.push_back(u);
    }
    std::fclose(fp);
    return s;
}

} // namespace glimit::data
