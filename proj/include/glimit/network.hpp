#pragma once

// Feed-forward tanh networks for the homogenized solution and the learned
// coefficient, plus the multiplicative bubble wrapper that imposes Dirichlet
// data exactly.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glimit/autodiff.hpp"
#include "glimit/errors.hpp"

namespace glimit::net {

struct MlpSpec {
    int input_dim = 1;
    int output_dim = 1;
    int depth = 3;  // number of hidden layers
    int width = 30; // neurons per hidden layer
    bool operator==(const MlpSpec&) const = default;

    int param_count() const {
        int n = 0, n_in = input_dim;
        for (int l = 0; l <= depth; ++l) {
            const int n_out = (l == depth) ? output_dim : width;
            n += n_in * n_out + n_out;
            n_in = n_out;
        }
        return n;
    }

    void validate() const {
        if (input_dim < 1 || input_dim > 2 || output_dim < 1 || depth < 1 || width < 1)
            throw ConfigError("MlpSpec: invalid architecture");
    }
};

// Flattened weights/biases, layer by layer: W^l row-major (out x in), then b^l.
struct Params {
    MlpSpec spec;
    std::vector<double> flat;
    uint64_t seed = 0;         // checkpoint header
    int64_t training_step = 0; // checkpoint header
};

// Weights ~ Normal(0, 2/(fan_in+fan_out)), biases zero. Deterministic in seed.
Params init_glorot(const MlpSpec& spec, uint64_t seed);

void save_params(const Params& p, const std::string& path);
Params load_params(const std::string& path);

// Forward pass. D is the activation value type (double, ad::Rev, or a dual
// over them); W is the weight scalar type (double or ad::Rev).
template <class D, class W>
void mlp_eval(const MlpSpec& spec, std::span<const W> p, std::span<const D> in,
              std::span<D> out) {
    if (static_cast<int>(in.size()) != spec.input_dim ||
        static_cast<int>(out.size()) != spec.output_dim)
        throw UsageError("mlp_eval: dimension mismatch");
    using std::tanh;
    std::vector<D> a(in.begin(), in.end()), b;
    size_t k = 0;
    int n_in = spec.input_dim;
    for (int l = 0; l <= spec.depth; ++l) {
        const int n_out = (l == spec.depth) ? spec.output_dim : spec.width;
        b.assign(n_out, D{});
        for (int j = 0; j < n_out; ++j) {
            const W* row = &p[k + static_cast<size_t>(j) * n_in];
            D acc = a[0] * row[0];
            for (int i = 1; i < n_in; ++i) acc = acc + a[i] * row[i];
            acc = acc + p[k + static_cast<size_t>(n_in) * n_out + j];
            b[j] = (l == spec.depth) ? acc : tanh(acc);
        }
        k += static_cast<size_t>(n_in) * n_out + n_out;
        a.swap(b);
        n_in = n_out;
    }
    for (int j = 0; j < spec.output_dim; ++j) out[j] = a[j];
}

template <class D, class W>
D mlp_eval1(const MlpSpec& spec, std::span<const W> p, std::span<const D> in) {
    D out;
    mlp_eval<D, W>(spec, p, in, std::span<D>(&out, 1));
    return out;
}

// Hard Dirichlet constraint on an axis-aligned box [lo,hi]^dim:
// u(x) = g(x) + l(x) * raw with the bubble l vanishing on the boundary and
// positive inside.
struct BoundaryWrapper {
    int dim = 1;
    double lo = 0.0;
    double hi = 1.0;
    std::function<double(std::span<const double>)> g; // null => g == 0

    bool inside(std::span<const double> x) const {
        for (int i = 0; i < dim; ++i)
            if (x[i] < lo || x[i] > hi) return false;
        return true;
    }

    double bubble(std::span<const double> x) const {
        double l = 1.0;
        for (int i = 0; i < dim; ++i) l *= (x[i] - lo) * (hi - x[i]);
        return l;
    }

    double boundary_value(std::span<const double> x) const { return g ? g(x) : 0.0; }

    // u(x) = g(x) + l(x)*raw; exact g on the boundary since l has a zero factor there.
    double solution(std::span<const double> x, double raw) const {
        if (!inside(x)) throw UsageError("BoundaryWrapper: point outside domain");
        return boundary_value(x) + bubble(x) * raw;
    }
};

// Bubble and wrapped solution in dual arithmetic (g == 0 path; the built-in
// problems all use homogeneous Dirichlet data).
template <class T, int N>
ad::Dual2<T, N> bubble_dual(const BoundaryWrapper& w, std::span<const ad::Dual2<T, N>> x) {
    ad::Dual2<T, N> l = (x[0] - w.lo) * (w.hi - x[0]);
    for (int i = 1; i < N; ++i) l = l * ((x[i] - w.lo) * (w.hi - x[i]));
    return l;
}

template <class T, int N>
ad::Dual2<T, N> wrap_solution(const BoundaryWrapper& w, std::span<const ad::Dual2<T, N>> x,
                              const ad::Dual2<T, N>& raw) {
    if (w.g) throw UsageError("wrap_solution: dual path supports g == 0 only");
    return bubble_dual<T, N>(w, x) * raw;
}

} // namespace glimit::net
