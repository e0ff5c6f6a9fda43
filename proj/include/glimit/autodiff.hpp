#pragma once

// Scalar automatic differentiation: forward-mode dual numbers carrying first
// and second spatial derivatives, whose components can themselves be
// reverse-mode variables recorded on a Tape. Spatial dimension is <= 2, so
// forward blocks are fixed-size; parameter gradients come from one backward
// sweep over the tape.

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "glimit/errors.hpp"

namespace glimit::ad {

// ---------------------------------------------------------------------------
// Reverse mode over parameters
// ---------------------------------------------------------------------------

class Tape {
public:
    struct Node {
        int32_t a, b;   // parent indices, -1 if absent
        double da, db;  // local partials w.r.t. parents
    };

    // Registers an independent variable. Leaves must be registered before any
    // dependent operation is recorded.
    int32_t leaf() {
        if (static_cast<size_t>(n_leaves_) != nodes_.size())
            throw UsageError("Tape::leaf: register parameters before recording operations");
        nodes_.push_back({-1, -1, 0.0, 0.0});
        return n_leaves_++;
    }

    int32_t unary(int32_t a, double da) {
        nodes_.push_back({a, -1, da, 0.0});
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    int32_t binary(int32_t a, int32_t b, double da, double db) {
        nodes_.push_back({a, b, da, db});
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    size_t size() const { return nodes_.size(); }
    int32_t num_leaves() const { return n_leaves_; }
    bool consumed() const { return consumed_; }
    void mark_consumed() { consumed_ = true; }

    void clear() {
        nodes_.clear();
        n_leaves_ = 0;
        consumed_ = false;
    }

    void reserve(size_t n) { nodes_.reserve(n); }

    // Backward sweep seeded at `out`; writes d(out)/d(leaf_i) into grad[i]
    // for i < grad.size(). Each node is visited exactly once.
    void reverse_into(int32_t out, std::span<double> grad) {
        adj_.assign(nodes_.size(), 0.0);
        adj_[out] = 1.0;
        for (int32_t k = static_cast<int32_t>(nodes_.size()) - 1; k >= n_leaves_; --k) {
            const double a = adj_[k];
            if (a == 0.0) continue;
            const Node& nd = nodes_[k];
            if (nd.a >= 0) adj_[nd.a] += a * nd.da;
            if (nd.b >= 0) adj_[nd.b] += a * nd.db;
        }
        for (size_t i = 0; i < grad.size(); ++i) grad[i] = adj_[i];
    }

    // Diagnostic: index of the first node with a non-finite local partial,
    // or -1 if all are finite. Cold path, called only after a failure.
    int32_t first_nonfinite_node() const {
        for (size_t k = 0; k < nodes_.size(); ++k)
            if (!std::isfinite(nodes_[k].da) || !std::isfinite(nodes_[k].db))
                return static_cast<int32_t>(k);
        return -1;
    }

private:
    std::vector<Node> nodes_;
    std::vector<double> adj_;
    int32_t n_leaves_ = 0;
    bool consumed_ = false;
};

namespace detail {
inline thread_local Tape* tls_tape = nullptr;
}

inline Tape* active_tape() { return detail::tls_tape; }

// Activates a tape on the current thread for the lifetime of the scope.
class TapeScope {
public:
    explicit TapeScope(Tape& t) : prev_(detail::tls_tape) { detail::tls_tape = &t; }
    ~TapeScope() { detail::tls_tape = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

// A scalar tracked on the active tape. i < 0 means constant (not recorded).
struct Rev {
    double v = 0.0;
    int32_t i = -1;

    Rev() = default;
    Rev(double x) : v(x) {}
    Rev(double x, int32_t idx) : v(x), i(idx) {}

    static Rev param(double x) { return Rev(x, detail::tls_tape->leaf()); }
};

inline double value(double x) { return x; }
inline double value(const Rev& x) { return x.v; }

inline Rev operator+(const Rev& a, const Rev& b) {
    Rev r(a.v + b.v);
    if (a.i >= 0)
        r.i = (b.i >= 0) ? detail::tls_tape->binary(a.i, b.i, 1.0, 1.0)
                         : detail::tls_tape->unary(a.i, 1.0);
    else if (b.i >= 0)
        r.i = detail::tls_tape->unary(b.i, 1.0);
    return r;
}

inline Rev operator-(const Rev& a, const Rev& b) {
    Rev r(a.v - b.v);
    if (a.i >= 0)
        r.i = (b.i >= 0) ? detail::tls_tape->binary(a.i, b.i, 1.0, -1.0)
                         : detail::tls_tape->unary(a.i, 1.0);
    else if (b.i >= 0)
        r.i = detail::tls_tape->unary(b.i, -1.0);
    return r;
}

inline Rev operator-(const Rev& a) {
    Rev r(-a.v);
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, -1.0);
    return r;
}

inline Rev operator*(const Rev& a, const Rev& b) {
    Rev r(a.v * b.v);
    if (a.i >= 0)
        r.i = (b.i >= 0) ? detail::tls_tape->binary(a.i, b.i, b.v, a.v)
                         : detail::tls_tape->unary(a.i, b.v);
    else if (b.i >= 0)
        r.i = detail::tls_tape->unary(b.i, a.v);
    return r;
}

inline Rev operator/(const Rev& a, const Rev& b) {
    const double inv = 1.0 / b.v;
    Rev r(a.v * inv);
    if (a.i >= 0)
        r.i = (b.i >= 0) ? detail::tls_tape->binary(a.i, b.i, inv, -a.v * inv * inv)
                         : detail::tls_tape->unary(a.i, inv);
    else if (b.i >= 0)
        r.i = detail::tls_tape->unary(b.i, -a.v * inv * inv);
    return r;
}

inline Rev& operator+=(Rev& a, const Rev& b) { a = a + b; return a; }
inline Rev& operator-=(Rev& a, const Rev& b) { a = a - b; return a; }
inline Rev& operator*=(Rev& a, const Rev& b) { a = a * b; return a; }

inline Rev tanh(const Rev& a) {
    const double t = std::tanh(a.v);
    Rev r(t);
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, 1.0 - t * t);
    return r;
}

inline Rev sin(const Rev& a) {
    Rev r(std::sin(a.v));
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, std::cos(a.v));
    return r;
}

inline Rev cos(const Rev& a) {
    Rev r(std::cos(a.v));
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, -std::sin(a.v));
    return r;
}

inline Rev exp(const Rev& a) {
    const double e = std::exp(a.v);
    Rev r(e);
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, e);
    return r;
}

inline Rev log(const Rev& a) {
    Rev r(std::log(a.v));
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, 1.0 / a.v);
    return r;
}

inline Rev pow(const Rev& a, double p) {
    Rev r(std::pow(a.v, p));
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, p * std::pow(a.v, p - 1.0));
    return r;
}

inline double softplus_val(double x) {
    // stable log(1 + e^x)
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid_val(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double softplus(double x) { return softplus_val(x); }

inline Rev softplus(const Rev& a) {
    Rev r(softplus_val(a.v));
    if (a.i >= 0) r.i = detail::tls_tape->unary(a.i, sigmoid_val(a.v));
    return r;
}

// ---------------------------------------------------------------------------
// Forward mode over spatial inputs
// ---------------------------------------------------------------------------
//
// Dual1<T,N>: value + gradient. Dual2<T,N>: value + gradient + Hessian stored
// symmetric-packed (N=1: [xx]; N=2: [xx, xy, yy]). T is double or Rev.

template <int N> constexpr int packed_size = N * (N + 1) / 2;
template <int N> constexpr int packed_index(int i, int j) {
    return (i <= j) ? (i * (2 * N - i - 1)) / 2 + j : (j * (2 * N - j - 1)) / 2 + i;
}

template <class T, int N> struct Dual1;
template <class T, int N> struct Dual2;

template <class X> inline constexpr bool is_dual_v = false;
template <class T, int N> inline constexpr bool is_dual_v<Dual1<T, N>> = true;
template <class T, int N> inline constexpr bool is_dual_v<Dual2<T, N>> = true;

// scalar types admissible as dual components / mixed operands
template <class S, class T>
concept ScalarFor = (!is_dual_v<S>) && std::convertible_to<S, T>;

template <class T, int N>
struct Dual1 {
    T v{};
    std::array<T, N> g{};

    Dual1() = default;
    Dual1(double c) : v(c) {}
    Dual1(const T& c) : v(c) {}

    // Independent spatial variable: d/dx_k seed.
    static Dual1 input(const T& x, int k) {
        Dual1 d;
        d.v = x;
        d.g[k] = T(1.0);
        return d;
    }
};

template <class T, int N>
struct Dual2 {
    T v{};
    std::array<T, N> g{};
    std::array<T, packed_size<N>> h{};

    Dual2() = default;
    Dual2(double c) : v(c) {}
    Dual2(const T& c) : v(c) {}

    static Dual2 input(const T& x, int k) {
        Dual2 d;
        d.v = x;
        d.g[k] = T(1.0);
        return d;
    }

    T hess(int i, int j) const { return h[packed_index<N>(i, j)]; }
};

// --- Dual1 arithmetic ---

template <class T, int N>
inline Dual1<T, N> operator+(const Dual1<T, N>& a, const Dual1<T, N>& b) {
    Dual1<T, N> r;
    r.v = a.v + b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] + b.g[i];
    return r;
}

template <class T, int N>
inline Dual1<T, N> operator-(const Dual1<T, N>& a, const Dual1<T, N>& b) {
    Dual1<T, N> r;
    r.v = a.v - b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] - b.g[i];
    return r;
}

template <class T, int N>
inline Dual1<T, N> operator-(const Dual1<T, N>& a) {
    Dual1<T, N> r;
    r.v = -a.v;
    for (int i = 0; i < N; ++i) r.g[i] = -a.g[i];
    return r;
}

template <class T, int N>
inline Dual1<T, N> operator*(const Dual1<T, N>& a, const Dual1<T, N>& b) {
    Dual1<T, N> r;
    r.v = a.v * b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    return r;
}

// scale/shift by a quantity constant in space (weight, literal, tape scalar)
template <class T, int N, ScalarFor<T> S>
inline Dual1<T, N> operator*(const Dual1<T, N>& a, const S& s) {
    const T c(s);
    Dual1<T, N> r;
    r.v = a.v * c;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * c;
    return r;
}
template <class T, int N, ScalarFor<T> S>
inline Dual1<T, N> operator*(const S& c, const Dual1<T, N>& a) { return a * c; }

template <class T, int N, ScalarFor<T> S>
inline Dual1<T, N> operator+(const Dual1<T, N>& a, const S& c) {
    Dual1<T, N> r = a;
    r.v = a.v + T(c);
    return r;
}
template <class T, int N, ScalarFor<T> S>
inline Dual1<T, N> operator+(const S& c, const Dual1<T, N>& a) { return a + c; }

template <class T, int N, ScalarFor<T> S>
inline Dual1<T, N> operator-(const Dual1<T, N>& a, const S& c) {
    Dual1<T, N> r = a;
    r.v = a.v - T(c);
    return r;
}
template <class T, int N, ScalarFor<T> S>
inline Dual1<T, N> operator-(const S& c, const Dual1<T, N>& a) {
    Dual1<T, N> r = -a;
    r.v = T(c) - a.v;
    return r;
}

template <class T, int N>
inline Dual1<T, N> inv(const Dual1<T, N>& a) {
    Dual1<T, N> r;
    const T iv = T(1.0) / a.v;
    r.v = iv;
    const T m = -(iv * iv);
    for (int i = 0; i < N; ++i) r.g[i] = m * a.g[i];
    return r;
}

template <class T, int N>
inline Dual1<T, N> operator/(const Dual1<T, N>& a, const Dual1<T, N>& b) { return a * inv(b); }

template <class T, int N>
inline Dual1<T, N> tanh(const Dual1<T, N>& a) {
    using std::tanh;
    Dual1<T, N> r;
    const T t = tanh(a.v);
    r.v = t;
    const T fp = T(1.0) - t * t;
    for (int i = 0; i < N; ++i) r.g[i] = fp * a.g[i];
    return r;
}

template <class T, int N>
inline Dual1<T, N> softplus(const Dual1<T, N>& a) {
    using std::exp;
    Dual1<T, N> r;
    r.v = softplus(a.v);
    // d softplus = sigmoid; built from exp to stay generic in T
    const T s = T(1.0) / (T(1.0) + exp(-a.v));
    for (int i = 0; i < N; ++i) r.g[i] = s * a.g[i];
    return r;
}

// --- Dual2 arithmetic ---

template <class T, int N>
inline Dual2<T, N> operator+(const Dual2<T, N>& a, const Dual2<T, N>& b) {
    Dual2<T, N> r;
    r.v = a.v + b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] + b.g[i];
    for (int k = 0; k < packed_size<N>; ++k) r.h[k] = a.h[k] + b.h[k];
    return r;
}

template <class T, int N>
inline Dual2<T, N> operator-(const Dual2<T, N>& a, const Dual2<T, N>& b) {
    Dual2<T, N> r;
    r.v = a.v - b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] - b.g[i];
    for (int k = 0; k < packed_size<N>; ++k) r.h[k] = a.h[k] - b.h[k];
    return r;
}

template <class T, int N>
inline Dual2<T, N> operator-(const Dual2<T, N>& a) {
    Dual2<T, N> r;
    r.v = -a.v;
    for (int i = 0; i < N; ++i) r.g[i] = -a.g[i];
    for (int k = 0; k < packed_size<N>; ++k) r.h[k] = -a.h[k];
    return r;
}

template <class T, int N>
inline Dual2<T, N> operator*(const Dual2<T, N>& a, const Dual2<T, N>& b) {
    Dual2<T, N> r;
    r.v = a.v * b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            const int k = packed_index<N>(i, j);
            r.h[k] = a.h[k] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[k];
        }
    return r;
}

template <class T, int N, ScalarFor<T> S>
inline Dual2<T, N> operator*(const Dual2<T, N>& a, const S& s) {
    const T c(s);
    Dual2<T, N> r;
    r.v = a.v * c;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * c;
    for (int k = 0; k < packed_size<N>; ++k) r.h[k] = a.h[k] * c;
    return r;
}
template <class T, int N, ScalarFor<T> S>
inline Dual2<T, N> operator*(const S& c, const Dual2<T, N>& a) { return a * c; }

template <class T, int N, ScalarFor<T> S>
inline Dual2<T, N> operator+(const Dual2<T, N>& a, const S& c) {
    Dual2<T, N> r = a;
    r.v = a.v + T(c);
    return r;
}
template <class T, int N, ScalarFor<T> S>
inline Dual2<T, N> operator+(const S& c, const Dual2<T, N>& a) { return a + c; }

template <class T, int N, ScalarFor<T> S>
inline Dual2<T, N> operator-(const Dual2<T, N>& a, const S& c) {
    Dual2<T, N> r = a;
    r.v = a.v - T(c);
    return r;
}
template <class T, int N, ScalarFor<T> S>
inline Dual2<T, N> operator-(const S& c, const Dual2<T, N>& a) {
    Dual2<T, N> r = -a;
    r.v = T(c) - a.v;
    return r;
}

// r = f(a) with fp = f', fpp = f'' at a.v
template <class T, int N>
inline Dual2<T, N> unary_taylor(const Dual2<T, N>& a, const T& f, const T& fp, const T& fpp) {
    Dual2<T, N> r;
    r.v = f;
    for (int i = 0; i < N; ++i) r.g[i] = fp * a.g[i];
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            const int k = packed_index<N>(i, j);
            r.h[k] = fpp * (a.g[i] * a.g[j]) + fp * a.h[k];
        }
    return r;
}

template <class T, int N>
inline Dual2<T, N> inv(const Dual2<T, N>& a) {
    const T iv = T(1.0) / a.v;
    const T iv2 = iv * iv;
    return unary_taylor(a, iv, -iv2, T(2.0) * iv2 * iv);
}

template <class T, int N>
inline Dual2<T, N> operator/(const Dual2<T, N>& a, const Dual2<T, N>& b) { return a * inv(b); }

template <class T, int N>
inline Dual2<T, N> tanh(const Dual2<T, N>& a) {
    using std::tanh;
    const T t = tanh(a.v);
    const T fp = T(1.0) - t * t;
    return unary_taylor(a, t, fp, T(-2.0) * t * fp);
}

template <class T, int N>
inline Dual2<T, N> sin(const Dual2<T, N>& a) {
    using std::sin, std::cos;
    const T s = sin(a.v), c = cos(a.v);
    return unary_taylor(a, s, c, -s);
}

template <class T, int N>
inline Dual2<T, N> cos(const Dual2<T, N>& a) {
    using std::sin, std::cos;
    const T s = sin(a.v), c = cos(a.v);
    return unary_taylor(a, c, -s, -c);
}

template <class T, int N>
inline Dual2<T, N> exp(const Dual2<T, N>& a) {
    using std::exp;
    const T e = exp(a.v);
    return unary_taylor(a, e, e, e);
}

template <class T, int N>
inline Dual2<T, N> log(const Dual2<T, N>& a) {
    using std::log;
    const T iv = T(1.0) / a.v;
    return unary_taylor(a, log(a.v), iv, -(iv * iv));
}

template <class T, int N>
inline Dual2<T, N> pow(const Dual2<T, N>& a, double p) {
    using std::pow;
    return unary_taylor(a, pow(a.v, p), T(p) * pow(a.v, p - 1.0), T(p * (p - 1.0)) * pow(a.v, p - 2.0));
}

template <class T, int N>
inline Dual2<T, N> softplus(const Dual2<T, N>& a) {
    using std::exp;
    const T s = T(1.0) / (T(1.0) + exp(-a.v));
    return unary_taylor(a, softplus(a.v), s, s * (T(1.0) - s));
}

// ---------------------------------------------------------------------------
// Module operations
// ---------------------------------------------------------------------------

template <int N>
struct ValGradHess {
    double value;
    std::array<double, N> grad;
    std::array<std::array<double, N>, N> hess;
};

// Evaluates f at x and returns value, gradient, and (symmetric) Hessian.
// f takes std::array<Dual2<double,N>,N> and returns Dual2<double,N>.
template <int N, class F>
ValGradHess<N> forward_hessian(F&& f, const std::array<double, N>& x) {
    for (int i = 0; i < N; ++i)
        if (!std::isfinite(x[i])) throw UsageError("forward_hessian: non-finite input");
    std::array<Dual2<double, N>, N> in;
    for (int i = 0; i < N; ++i) in[i] = Dual2<double, N>::input(x[i], i);
    Dual2<double, N> out = f(in);
    ValGradHess<N> r;
    r.value = out.v;
    bool ok = std::isfinite(out.v);
    for (int i = 0; i < N; ++i) {
        r.grad[i] = out.g[i];
        ok = ok && std::isfinite(out.g[i]);
        for (int j = 0; j < N; ++j) {
            r.hess[i][j] = out.hess(i, j);
            ok = ok && std::isfinite(r.hess[i][j]);
        }
    }
    if (!ok) throw NumericError("forward_hessian: non-finite result");
    return r;
}

// Gradient of a recorded scalar w.r.t. every registered parameter.
// The tape is single-use until cleared.
std::vector<double> parameter_gradient(const Rev& loss, Tape& tape);

} // namespace glimit::ad
