#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "trajbound/error.hpp"

namespace trajbound {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Counter-based random stream. Draw k of stream (seed, id) is a pure function of
/// (seed, id, k), so substreams cost nothing to create and never share state.
/// All distributions are implemented here rather than through <random> so that
/// sequences are identical across standard libraries.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
        : master_seed_(master_seed), stream_id_(stream_id),
          key_a_(detail::mix64(master_seed ^ 0x6A09E667F3BCC909ULL)),
          key_b_(detail::mix64(detail::mix64(stream_id + detail::kGolden) ^ master_seed)) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t position() const noexcept { return counter_; }

    /// A fresh stream derived from this one's seed; used to hand independent
    /// streams to sub-tasks.
    RngStream substream(std::uint64_t id) const noexcept {
        return RngStream(detail::mix64(master_seed_ + detail::kGolden * (stream_id_ + 1)), id);
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t c = counter_++;
        return detail::mix64(detail::mix64(c * detail::kGolden + key_a_) ^ key_b_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (one output per pair of uniforms).
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Unbiased integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        require(n > 0, Errc::invalid_argument, "index range must be non-empty");
        // Lemire's nearly-divisionless method.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool coin() noexcept { return (next_u64() >> 63) != 0; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_a_;
    std::uint64_t key_b_;
    std::uint64_t counter_ = 0;
};

/// Vector of Rademacher variables; every entry is exactly -1 or +1.
class SignVector {
public:
    explicit SignVector(std::vector<int> signs) : signs_(std::move(signs)) {
        for (int s : signs_) require(s == 1 || s == -1, Errc::invalid_argument, "sign entries must be +1 or -1");
    }

    std::size_t size() const noexcept { return signs_.size(); }
    int operator[](std::size_t i) const noexcept { return signs_[i]; }
    const std::vector<int>& values() const noexcept { return signs_; }
    auto begin() const noexcept { return signs_.begin(); }
    auto end() const noexcept { return signs_.end(); }

private:
    std::vector<int> signs_;
};

inline SignVector rademacher_signs(RngStream& rng, std::size_t n) {
    require(n >= 1, Errc::invalid_argument, "rademacher_signs needs n >= 1");
    std::vector<int> s(n);
    for (auto& v : s) v = rng.coin() ? 1 : -1;
    return SignVector(std::move(s));
}

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), Errc::dimension_mismatch, "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), Errc::dimension_mismatch, "axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), Errc::dimension_mismatch, "subtract: length mismatch");
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vector scaled(std::span<const double> a, double s) {
    Vector r(a.begin(), a.end());
    for (double& v : r) v *= s;
    return r;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

/// Row-major dense matrix; only used as storage for samples and per-sample gradients.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        require(data_.size() == rows_ * cols_, Errc::dimension_mismatch, "matrix data size mismatch");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const noexcept { return data_; }

    void append_row(std::span<const double> r) {
        if (rows_ == 0 && cols_ == 0) cols_ = r.size();
        require(r.size() == cols_, Errc::dimension_mismatch, "append_row: width mismatch");
        data_.insert(data_.end(), r.begin(), r.end());
        ++rows_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Power iteration
// ---------------------------------------------------------------------------

using LinearOperator = std::function<Vector(std::span<const double>)>;

struct EigenEstimate {
    double value = 0.0;
    Vector vector;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline Vector random_unit(RngStream& rng, std::size_t dim) {
    Vector v(dim);
    double n = 0.0;
    while (n == 0.0) {
        for (double& x : v) x = rng.normal();
        n = norm(v);
    }
    for (double& x : v) x /= n;
    return v;
}

inline EigenEstimate dominant_eig(const LinearOperator& apply, std::size_t dim, int iters, double tol,
                                  RngStream& rng, double shift) {
    constexpr int kMaxRestarts = 8;
    EigenEstimate est;
    Vector v = random_unit(rng, dim);
    double lambda_prev = 0.0;
    int restarts = 0;
    for (int k = 0; k < iters; ++k) {
        Vector y = apply(v);
        require(y.size() == dim, Errc::dimension_mismatch,
                "operator returned length " + std::to_string(y.size()) + ", expected " + std::to_string(dim));
        if (shift != 0.0) axpy(shift, v, y);
        const double lambda = dot(v, y);
        const double ny = norm(y);
        est.iterations = k + 1;
        if (ny == 0.0 || (k == 0 && std::abs(lambda) < 1e-300)) {
            // Start vector in the null space: retry from a fresh direction before
            // concluding the operator is zero.
            if (restarts++ < kMaxRestarts) {
                v = random_unit(rng, dim);
                k = -1;
                continue;
            }
            est.value = 0.0;
            est.vector = v;
            est.converged = true;
            return est;
        }
        for (std::size_t i = 0; i < dim; ++i) v[i] = y[i] / ny;
        if (k > 0 && std::abs(lambda - lambda_prev) <= tol) {
            est.value = lambda;
            est.converged = true;
            lambda_prev = lambda;
            break;
        }
        lambda_prev = lambda;
        est.value = lambda;
    }
    // Rayleigh quotient at the final (unit) iterate.
    Vector y = apply(v);
    require(y.size() == dim, Errc::dimension_mismatch, "operator returned wrong length");
    if (shift != 0.0) axpy(shift, v, y);
    est.value = dot(v, y);
    const double nv = norm(v);
    for (double& x : v) x /= nv;
    est.vector = std::move(v);
    return est;
}

} // namespace detail

/// Largest (algebraic) eigenvalue of a symmetric operator. If the dominant
/// eigenvalue by magnitude turns out negative the operator is shifted so the
/// top of the spectrum becomes dominant.
inline EigenEstimate power_iteration_top_eig(const LinearOperator& apply, std::size_t dim, int iters, double tol,
                                             std::uint64_t seed = 0x5EED) {
    require(dim >= 1, Errc::invalid_argument, "power iteration needs dim >= 1");
    require(iters >= 1, Errc::invalid_argument, "power iteration needs iters >= 1");
    RngStream rng(seed, 0);
    EigenEstimate est = detail::dominant_eig(apply, dim, iters, tol, rng, 0.0);
    if (est.value < 0.0) {
        const double shift = -est.value;
        EigenEstimate shifted = detail::dominant_eig(apply, dim, iters, tol, rng, shift);
        shifted.value -= shift;
        shifted.iterations += est.iterations;
        return shifted;
    }
    return est;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline double default_fd_step(std::span<const double> w) { return 1e-4 * std::max(1.0, max_abs(w)); }

inline Vector central_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                    std::span<const double> w, double h) {
    require(h > 0.0 && std::isfinite(h), Errc::invalid_argument, "finite-difference step must be positive");
    Vector x(w.begin(), w.end());
    Vector g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            fail(Errc::numeric_domain, "non-finite function value at coordinate " + std::to_string(i));
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline Vector central_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                    std::span<const double> w) {
    return central_diff_gradient(f, w, default_fd_step(w));
}

} // namespace trajbound
