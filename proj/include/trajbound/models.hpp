#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trajbound/csv.hpp"
#include "trajbound/datasets.hpp"
#include "trajbound/error.hpp"
#include "trajbound/numerics.hpp"

namespace trajbound {

enum class ModelKind { linear, mlp };
enum class Activation { tanh };
enum class LossKind { squared, cross_entropy };

using ParamVector = Vector;

/// Architecture and loss of a small predictor.
///
/// linear: y_hat = w.x with no bias, P = input_dim, squared loss only.
/// mlp:    layer_widths = [input_dim, hidden..., output_dim]; tanh on hidden
///         layers, identity on the output layer. Cross-entropy treats the label
///         as a class index in [0, output_dim).
///
/// Flattening order is layer-major, weights before biases; each weight matrix
/// is stored row-major as (fan_out x fan_in).
struct ModelSpec {
    ModelKind kind = ModelKind::linear;
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::tanh;
    LossKind loss = LossKind::squared;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;

    static ModelSpec linear(std::size_t dim) {
        ModelSpec s;
        s.kind = ModelKind::linear;
        s.input_dim = dim;
        s.output_dim = 1;
        s.validate();
        return s;
    }

    static ModelSpec mlp(std::vector<std::size_t> widths, LossKind loss = LossKind::squared) {
        require(widths.size() >= 2, Errc::invalid_argument, "mlp needs at least input and output widths");
        ModelSpec s;
        s.kind = ModelKind::mlp;
        s.input_dim = widths.front();
        s.output_dim = widths.back();
        s.layer_widths = std::move(widths);
        s.loss = loss;
        s.validate();
        return s;
    }

    void validate() const {
        require(input_dim >= 1, Errc::invalid_argument, "input_dim must be >= 1");
        if (kind == ModelKind::linear) {
            require(output_dim == 1, Errc::invalid_argument, "linear model has output_dim 1");
            require(loss == LossKind::squared, Errc::invalid_argument, "linear model uses squared loss");
            return;
        }
        require(layer_widths.size() >= 2, Errc::invalid_argument, "mlp needs at least two layer widths");
        for (std::size_t w : layer_widths) require(w >= 1, Errc::invalid_argument, "mlp widths must be >= 1");
        require(layer_widths.front() == input_dim, Errc::invalid_argument, "first mlp width must equal input_dim");
        require(layer_widths.back() == output_dim, Errc::invalid_argument, "last mlp width must equal output_dim");
        if (loss == LossKind::squared)
            require(output_dim == 1, Errc::invalid_argument, "squared loss needs a single output");
        else
            require(output_dim >= 2, Errc::invalid_argument, "cross-entropy needs at least two classes");
    }

    std::size_t param_count() const {
        if (kind == ModelKind::linear) return input_dim;
        std::size_t p = 0;
        for (std::size_t l = 1; l < layer_widths.size(); ++l) p += layer_widths[l] * layer_widths[l - 1] + layer_widths[l];
        return p;
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline std::string to_string(LossKind k) { return k == LossKind::squared ? "squared" : "cross_entropy"; }

/// Compact form used in snapshot headers, e.g. "linear:20:squared" or "mlp:20-32-2:tanh:cross_entropy".
inline std::string to_string(const ModelSpec& s) {
    if (s.kind == ModelKind::linear) return "linear:" + std::to_string(s.input_dim) + ":squared";
    std::string widths;
    for (std::size_t i = 0; i < s.layer_widths.size(); ++i) widths += (i ? "-" : "") + std::to_string(s.layer_widths[i]);
    return "mlp:" + widths + ":tanh:" + to_string(s.loss);
}

inline LossKind parse_loss(const std::string& s) {
    if (s == "squared") return LossKind::squared;
    if (s == "cross_entropy") return LossKind::cross_entropy;
    fail(Errc::parse_error, "unknown loss '" + s + "'");
}

inline ModelSpec parse_model_spec(const std::string& text) {
    std::vector<std::string> parts;
    std::istringstream in(text);
    for (std::string p; std::getline(in, p, ':');) parts.push_back(p);
    auto to_count = [&](const std::string& s) -> std::size_t {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) fail(Errc::parse_error, "bad count '" + s + "' in model spec '" + text + "'");
        return v;
    };
    if (parts.size() == 3 && parts[0] == "linear" && parts[2] == "squared") return ModelSpec::linear(to_count(parts[1]));
    if (parts.size() == 4 && parts[0] == "mlp" && parts[2] == "tanh") {
        std::vector<std::size_t> widths;
        std::istringstream ws(parts[1]);
        for (std::string w; std::getline(ws, w, '-');) widths.push_back(to_count(w));
        return ModelSpec::mlp(std::move(widths), parse_loss(parts[3]));
    }
    fail(Errc::parse_error, "malformed model spec '" + text + "'");
}

/// Linear: zeros. MLP: each weight and bias uniform in +-1/sqrt(fan_in).
inline ParamVector init_params(const ModelSpec& spec, RngStream& rng) {
    spec.validate();
    ParamVector w(spec.param_count(), 0.0);
    if (spec.kind == ModelKind::linear) return w;
    std::size_t off = 0;
    for (std::size_t l = 1; l < spec.layer_widths.size(); ++l) {
        const std::size_t fan_in = spec.layer_widths[l - 1];
        const std::size_t count = spec.layer_widths[l] * fan_in + spec.layer_widths[l];
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t k = 0; k < count; ++k) w[off + k] = scale * (2.0 * rng.uniform() - 1.0);
        off += count;
    }
    return w;
}

namespace detail {

inline void check_sample(const ModelSpec& spec, std::span<const double> w, std::span<const double> x, double y) {
    require(w.size() == spec.param_count(), Errc::dimension_mismatch,
            "parameter vector has length " + std::to_string(w.size()) + ", model needs " +
                std::to_string(spec.param_count()));
    require(x.size() == spec.input_dim, Errc::dimension_mismatch,
            "input has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(spec.input_dim));
    if (spec.loss == LossKind::cross_entropy) {
        const double cls = std::floor(y);
        require(cls == y && y >= 0.0 && y < static_cast<double>(spec.output_dim), Errc::invalid_argument,
                "cross-entropy label must be a class index in [0, " + std::to_string(spec.output_dim) + ")");
    }
}

/// Loss and (optionally) its gradient for one sample. `grad` must be zeroed
/// and of length P when non-empty.
inline double loss_grad_impl(const ModelSpec& spec, std::span<const double> w, std::span<const double> x, double y,
                             std::span<double> grad) {
    check_sample(spec, w, x, y);
    const bool want_grad = !grad.empty();
    if (spec.kind == ModelKind::linear) {
        const double r = y - dot(w, x);
        const double loss = 0.5 * r * r;
        if (!std::isfinite(loss)) fail(Errc::numeric_domain, "non-finite linear prediction");
        if (want_grad)
            for (std::size_t i = 0; i < x.size(); ++i) grad[i] = -r * x[i];
        return loss;
    }

    const auto& widths = spec.layer_widths;
    const std::size_t layers = widths.size() - 1;
    // acts[0] = x; acts[l] = post-activation output of layer l (identity on the last layer).
    std::vector<Vector> acts(layers + 1);
    acts[0].assign(x.begin(), x.end());
    std::vector<std::size_t> offsets(layers);
    std::size_t off = 0;
    for (std::size_t l = 1; l <= layers; ++l) {
        offsets[l - 1] = off;
        const std::size_t in = widths[l - 1];
        const std::size_t out = widths[l];
        const double* W = w.data() + off;
        const double* b = W + out * in;
        Vector& a = acts[l];
        a.assign(out, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            double s = b[o];
            for (std::size_t i = 0; i < in; ++i) s += W[o * in + i] * acts[l - 1][i];
            a[o] = (l < layers) ? std::tanh(s) : s;
        }
        off += out * in + out;
    }

    const Vector& z = acts[layers];
    Vector delta(z.size());
    double loss = 0.0;
    if (spec.loss == LossKind::squared) {
        const double r = y - z[0];
        loss = 0.5 * r * r;
        delta[0] = -r;
    } else {
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        const double lse = zmax + std::log(sum);
        const auto cls = static_cast<std::size_t>(y);
        loss = lse - z[cls];
        for (std::size_t k = 0; k < z.size(); ++k) delta[k] = std::exp(z[k] - lse) - (k == cls ? 1.0 : 0.0);
    }
    if (!std::isfinite(loss) || !all_finite(z)) fail(Errc::numeric_domain, "non-finite forward pass");
    if (!want_grad) return loss;

    // delta holds dLoss/d(pre-activation) of the current layer.
    for (std::size_t l = layers; l >= 1; --l) {
        const std::size_t in = widths[l - 1];
        const std::size_t out = widths[l];
        const double* W = w.data() + offsets[l - 1];
        double* gW = grad.data() + offsets[l - 1];
        double* gb = gW + out * in;
        for (std::size_t o = 0; o < out; ++o) {
            for (std::size_t i = 0; i < in; ++i) gW[o * in + i] = delta[o] * acts[l - 1][i];
            gb[o] = delta[o];
        }
        if (l == 1) break;
        Vector prev(in, 0.0);
        for (std::size_t i = 0; i < in; ++i) {
            double s = 0.0;
            for (std::size_t o = 0; o < out; ++o) s += W[o * in + i] * delta[o];
            const double a = acts[l - 1][i];
            prev[i] = s * (1.0 - a * a);
        }
        delta = std::move(prev);
    }
    return loss;
}

} // namespace detail

inline double loss_per_sample(const ModelSpec& spec, std::span<const double> w, std::span<const double> x, double y) {
    return detail::loss_grad_impl(spec, w, x, y, {});
}

inline ParamVector grad_per_sample(const ModelSpec& spec, std::span<const double> w, std::span<const double> x,
                                   double y) {
    ParamVector g(spec.param_count(), 0.0);
    detail::loss_grad_impl(spec, w, x, y, g);
    return g;
}

/// Network output (logits for cross-entropy).
inline Vector predict(const ModelSpec& spec, std::span<const double> w, std::span<const double> x) {
    if (spec.kind == ModelKind::linear) return {dot(w, x)};
    detail::check_sample(spec, w, x, 0.0);
    Vector a(x.begin(), x.end());
    std::size_t off = 0;
    const auto& widths = spec.layer_widths;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        const std::size_t in = widths[l - 1], out = widths[l];
        Vector next(out);
        for (std::size_t o = 0; o < out; ++o) {
            double s = w[off + out * in + o];
            for (std::size_t i = 0; i < in; ++i) s += w[off + o * in + i] * a[i];
            next[o] = (l + 1 < widths.size()) ? std::tanh(s) : s;
        }
        off += out * in + out;
        a = std::move(next);
    }
    return a;
}

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

namespace detail {

template <typename Fn>
decltype(auto) with_sample_context(std::size_t i, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string("sample ") + std::to_string(i) + ": " + e.what());
    }
}

} // namespace detail

/// Mean loss and mean gradient over the rows `indices` of `data`. Per-sample
/// gradients are computed into a scratch buffer and added in index order, then
/// divided by the count, so the result is bit-reproducible.
inline LossGrad grad_mean_over(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
                               std::span<const std::size_t> indices) {
    require(!indices.empty(), Errc::invalid_argument, "mean over an empty index set");
    const std::size_t p = spec.param_count();
    LossGrad out{0.0, ParamVector(p, 0.0)};
    ParamVector g(p);
    for (std::size_t i : indices) {
        std::fill(g.begin(), g.end(), 0.0);
        out.loss += detail::with_sample_context(i, [&] { return detail::loss_grad_impl(spec, w, data.x(i), data.y(i), g); });
        for (std::size_t k = 0; k < p; ++k) out.grad[k] += g[k];
    }
    const auto m = static_cast<double>(indices.size());
    out.loss /= m;
    for (double& v : out.grad) v /= m;
    return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

inline LossGrad grad_mean(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
    require(data.size() >= 1, Errc::invalid_argument, "grad_mean needs n >= 1");
    const auto idx = all_indices(data.size());
    return grad_mean_over(spec, w, data, idx);
}

inline double loss_mean(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
    require(data.size() >= 1, Errc::invalid_argument, "loss_mean needs n >= 1");
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        s += detail::with_sample_context(i, [&] { return loss_per_sample(spec, w, data.x(i), data.y(i)); });
    return s / static_cast<double>(data.size());
}

/// All per-sample gradients as rows of an n x P matrix, plus per-sample losses.
struct PerSampleGrads {
    Matrix grads;
    Vector losses;
};

inline PerSampleGrads per_sample_gradients(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
    PerSampleGrads out{Matrix(data.size(), spec.param_count()), Vector(data.size())};
    for (std::size_t i = 0; i < data.size(); ++i)
        out.losses[i] = detail::with_sample_context(
            i, [&] { return detail::loss_grad_impl(spec, w, data.x(i), data.y(i), out.grads.row(i)); });
    return out;
}

/// Hessian of the mean loss applied to v, by central differences of exact
/// gradients along v/|v|. Exact (up to roundoff) for the quadratic linear model.
inline ParamVector hessian_vector_product(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
                                          std::span<const double> v, double h) {
    require(v.size() == w.size(), Errc::dimension_mismatch, "hvp direction has wrong length");
    const double nv = norm(v);
    require(nv > 0.0, Errc::invalid_argument, "hvp direction must be non-zero");
    require(h > 0.0, Errc::invalid_argument, "hvp step must be positive");
    ParamVector wp(w.begin(), w.end()), wm(w.begin(), w.end());
    for (std::size_t i = 0; i < w.size(); ++i) {
        wp[i] += h * v[i] / nv;
        wm[i] -= h * v[i] / nv;
    }
    const auto gp = grad_mean(spec, wp, data).grad;
    const auto gm = grad_mean(spec, wm, data).grad;
    ParamVector out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h) * nv;
    return out;
}

inline ParamVector hessian_vector_product(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
                                          std::span<const double> v) {
    return hessian_vector_product(spec, w, data, v, default_fd_step(w));
}

// ---------------------------------------------------------------------------
// Parameter snapshots: "spec=<spec>,P=<count>" then one CSV row of reals.
// ---------------------------------------------------------------------------

inline void write_param_snapshot(std::ostream& out, const ModelSpec& spec, std::span<const double> w) {
    require(w.size() == spec.param_count(), Errc::dimension_mismatch, "snapshot length does not match spec");
    out << "spec=" << to_string(spec) << ",P=" << w.size() << '\n';
    for (std::size_t i = 0; i < w.size(); ++i) out << (i ? "," : "") << format_real(w[i]);
    out << '\n';
}

struct ParamSnapshot {
    ModelSpec spec;
    ParamVector values;
};

inline ParamSnapshot read_param_snapshot(std::istream& in) {
    std::string header, row;
    if (!std::getline(in, header) || !std::getline(in, row)) fail(Errc::parse_error, "truncated parameter snapshot");
    const auto comma = header.rfind(",P=");
    if (header.rfind("spec=", 0) != 0 || comma == std::string::npos) fail(Errc::parse_error, "bad snapshot header");
    ParamSnapshot snap{parse_model_spec(header.substr(5, comma - 5)), {}};
    const std::size_t declared = std::stoul(header.substr(comma + 3));
    std::istringstream cells(row);
    for (std::string c; std::getline(cells, c, ',');) snap.values.push_back(detail::parse_cell(c, 2, "param"));
    require(declared == snap.spec.param_count() && snap.values.size() == declared, Errc::schema_error,
            "snapshot parameter count mismatch");
    return snap;
}

} // namespace trajbound
