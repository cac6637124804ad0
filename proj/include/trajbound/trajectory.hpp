#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajbound/datasets.hpp"
#include "trajbound/error.hpp"
#include "trajbound/models.hpp"
#include "trajbound/numerics.hpp"
#include "trajbound/optim.hpp"
#include "trajbound/snapshot.hpp"

namespace trajbound {

/// How random subsets U of S are drawn by the V and gamma' estimators.
/// rademacher: each sample joins U independently with probability 1/2.
/// uniform_size: |U| uniform on [1, n-1], then U uniform among subsets of that size.
enum class SubsetDistribution { rademacher, uniform_size };

struct SubsetEstimatorConfig {
    std::size_t k_samples = 1024;
    std::optional<std::size_t> n_sp;  // gradient subsample size; unset means all of S
    std::uint64_t seed = 0;
    SubsetDistribution distribution = SubsetDistribution::rademacher;

    std::size_t subsample_size(std::size_t n) const {
        const std::size_t m = n_sp.value_or(n);
        require(m >= 1 && m <= n, Errc::invalid_argument,
                "n_sp = " + std::to_string(m) + " outside [1, " + std::to_string(n) + "]");
        return m;
    }

    void validate(std::size_t n) const {
        require(k_samples >= 1, Errc::invalid_argument, "k_samples must be >= 1");
        subsample_size(n);
    }
};

// ---------------------------------------------------------------------------
// Gradient covariance
// ---------------------------------------------------------------------------

struct TraceStats {
    double trace = 0.0;
    double grad_norm = 0.0;
    double F = 0.0;
    double second_moment = 0.0;  // mean of |grad f(w, z_i)|^2 over the (sub)sample
    ParamVector grad;            // exact grad F_S over all of S
};

inline constexpr double kTraceClampTolerance = 1e-9;

namespace detail {

inline double clamp_trace(double raw, bool exact) {
    if (raw >= 0.0) return raw;
    // A subsampled second moment may legitimately fall below |grad F_S|^2.
    if (!exact || raw >= -kTraceClampTolerance) return 0.0;
    fail(Errc::numeric_domain, "gradient covariance trace " + format_real(raw) + " is negative beyond roundoff");
}

} // namespace detail

/// Tr Sigma = mean_i |g_i|^2 - |mean_i g_i|^2 from a matrix of per-sample
/// gradients; the second moment uses `rows` (all rows when empty).
inline TraceStats trace_sigma_from_grads(const Matrix& grads, std::span<const std::size_t> rows = {}) {
    const std::size_t n = grads.rows();
    require(n >= 1, Errc::invalid_argument, "trace needs at least one gradient");
    TraceStats st;
    st.grad.assign(grads.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) axpy(1.0, grads.row(i), st.grad);
    for (double& v : st.grad) v /= static_cast<double>(n);
    double m2 = 0.0;
    if (rows.empty()) {
        for (std::size_t i = 0; i < n; ++i) m2 += squared_norm(grads.row(i));
        m2 /= static_cast<double>(n);
    } else {
        for (std::size_t i : rows) m2 += squared_norm(grads.row(i));
        m2 /= static_cast<double>(rows.size());
    }
    const double g2 = squared_norm(st.grad);
    st.second_moment = m2;
    st.grad_norm = std::sqrt(g2);
    st.trace = detail::clamp_trace(m2 - g2, rows.empty() || rows.size() == n);
    return st;
}

/// Trace of the per-sample gradient covariance on `data`, with the exact mean
/// gradient and the second moment over a uniform subsample of size n_sp
/// (n_sp = n is exact and consumes no randomness).
inline TraceStats grad_trace_sigma(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
                                   std::size_t n_sp, RngStream& rng) {
    const std::size_t n = data.size();
    require(n_sp >= 1 && n_sp <= n, Errc::invalid_argument, "n_sp must lie in [1, n]");
    const auto ps = per_sample_gradients(spec, w, data);
    TraceStats st;
    if (n_sp == n) {
        st = trace_sigma_from_grads(ps.grads);
    } else {
        const auto rows = sample_without_replacement(rng, n, n_sp);
        st = trace_sigma_from_grads(ps.grads, rows);
    }
    double f = 0.0;
    for (double l : ps.losses) f += l;
    st.F = f / static_cast<double>(n);
    return st;
}

/// Scale factor turning the per-sample covariance into the covariance of the
/// minibatch gradient noise for batches of size b drawn without replacement.
inline double noise_cov_scale(std::size_t n, std::size_t b) {
    require(n >= 2, Errc::invalid_argument, "noise covariance needs n >= 2");
    require(b >= 1 && b <= n, Errc::invalid_argument, "batch size outside [1, n]");
    return static_cast<double>(n - b) / (static_cast<double>(b) * static_cast<double>(n - 1));
}

// ---------------------------------------------------------------------------
// Trajectory complexity
// ---------------------------------------------------------------------------

struct ComplexityStep {
    double value = 0.0;      // C after the update
    double increment = 0.0;
    bool degenerate = false; // zero gradient with non-zero covariance: increment skipped
};

/// C_t = C_{t-1} - 2 (F_t - F_{t-1}) / sqrt(n) * sqrt(1 + Tr Sigma / |grad F_S|^2),
/// with Tr Sigma and the gradient norm taken at the current point.
inline ComplexityStep complexity_update(double C_prev, double F_prev, double F_curr, double trace_sigma,
                                        double grad_norm, std::size_t n) {
    require(n >= 1, Errc::invalid_argument, "complexity update needs n >= 1");
    double ratio = 1.0;
    if (grad_norm > 0.0) {
        ratio = std::sqrt(1.0 + trace_sigma / (grad_norm * grad_norm));
    } else if (trace_sigma > 0.0) {
        return {C_prev, 0.0, true};
    }
    const double inc = -2.0 * ((F_curr - F_prev) / std::sqrt(static_cast<double>(n))) * ratio;
    return {C_prev + inc, inc, false};
}

inline std::optional<double> gamma_tilde(double grad_norm_Sprime, double grad_norm_S) {
    if (!(grad_norm_S > 0.0)) return std::nullopt;
    return grad_norm_Sprime / grad_norm_S;
}

// ---------------------------------------------------------------------------
// Diversity ratio V and bias factor gamma'
// ---------------------------------------------------------------------------

namespace detail {

/// Fills `signs` with +1 for members of U.
inline void draw_subset_signs(RngStream& rng, SubsetDistribution dist, std::vector<int>& signs) {
    const std::size_t n = signs.size();
    if (dist == SubsetDistribution::rademacher || n < 2) {
        for (int& s : signs) s = rng.coin() ? 1 : -1;
        return;
    }
    const std::size_t size = 1 + static_cast<std::size_t>(rng.index(n - 1));
    std::fill(signs.begin(), signs.end(), -1);
    for (std::size_t i : sample_without_replacement(rng, n, size)) signs[i] = 1;
}

/// |(1/n) sum_i sign_i g_i|
inline double signed_mean_norm(const Matrix& grads, std::span<const int> signs, Vector& scratch) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    for (std::size_t i = 0; i < grads.rows(); ++i) axpy(static_cast<double>(signs[i]), grads.row(i), scratch);
    return norm(scratch) / static_cast<double>(grads.rows());
}

} // namespace detail

struct VEstimate {
    std::optional<double> V;   // empty when the denominator vanishes (trivial bound)
    double D_hat = 0.0;        // Monte-Carlo mean of |(1/n) sum sigma_i g_i|
    double D_se = 0.0;         // its standard error
    double grad_norm = 0.0;
    bool trivial = false;
};

/// V(w) = |grad F_S| / E_U |(|U|/n) grad F_U - ((n-|U|)/n) grad F_{S\U}|. The
/// expectation is the mean of |(1/n) sum_i sigma_i g_i| over k sign draws.
inline VEstimate estimate_V_from_grads(const Matrix& grads, std::size_t k_samples, RngStream& rng,
                                       SubsetDistribution dist = SubsetDistribution::rademacher) {
    const std::size_t n = grads.rows();
    require(n >= 2, Errc::invalid_argument, "V estimator needs n >= 2");
    require(k_samples >= 1, Errc::invalid_argument, "V estimator needs k_samples >= 1");
    Vector mean(grads.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) axpy(1.0, grads.row(i), mean);
    for (double& v : mean) v /= static_cast<double>(n);

    std::vector<int> signs(n);
    Vector scratch(grads.cols());
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = 0; k < k_samples; ++k) {
        detail::draw_subset_signs(rng, dist, signs);
        const double d = detail::signed_mean_norm(grads, signs, scratch);
        sum += d;
        sum_sq += d * d;
    }
    const auto k = static_cast<double>(k_samples);
    VEstimate est;
    est.D_hat = sum / k;
    const double var = k_samples > 1 ? std::max(0.0, (sum_sq - k * est.D_hat * est.D_hat) / (k - 1.0)) : 0.0;
    est.D_se = std::sqrt(var / k);
    est.grad_norm = norm(mean);
    if (est.D_hat > 0.0)
        est.V = est.grad_norm / est.D_hat;
    else
        est.trivial = true;
    return est;
}

inline VEstimate estimate_V(const ModelSpec& spec, std::span<const double> w, const Dataset& data,
                            const SubsetEstimatorConfig& cfg, std::uint64_t stream_id = 0) {
    cfg.validate(data.size());
    RngStream rng(cfg.seed, stream_id);
    return estimate_V_from_grads(per_sample_gradients(spec, w, data).grads, cfg.k_samples, rng, cfg.distribution);
}

struct SubsetRatio {
    std::optional<double> max_ratio;  // max_U |U| |grad F_U| / (n |grad F_S|); empty if grad F_S = 0
    double envelope = 0.0;            // max_i |g_i| / |grad F_S|, an upper bound on max_ratio
    bool exhaustive = false;
};

/// Largest subset-gradient ratio over proper non-empty U. Enumerates all
/// 2^n - 2 subsets when that is no more than k_samples, otherwise takes the
/// max over k random draws (each redrawn until proper).
inline SubsetRatio subset_ratio_max(const Matrix& grads, std::size_t k_samples, RngStream& rng,
                                    SubsetDistribution dist = SubsetDistribution::rademacher) {
    const std::size_t n = grads.rows();
    require(n >= 2, Errc::invalid_argument, "subset ratio needs n >= 2");
    Vector total(grads.cols(), 0.0);
    double max_row = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        axpy(1.0, grads.row(i), total);
        max_row = std::max(max_row, norm(grads.row(i)));
    }
    const double total_norm = norm(total);
    SubsetRatio out;
    if (!(total_norm > 0.0)) return out;
    out.envelope = max_row / (total_norm / static_cast<double>(n));

    Vector part(grads.cols());
    auto ratio_of = [&](auto&& member) {
        std::fill(part.begin(), part.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (member(i)) axpy(1.0, grads.row(i), part);
        return norm(part) / total_norm;
    };

    double best = 0.0;
    const bool can_enumerate = n < 63 && ((std::uint64_t{1} << n) - 2) <= k_samples;
    if (can_enumerate) {
        out.exhaustive = true;
        const std::uint64_t full = (std::uint64_t{1} << n) - 1;
        for (std::uint64_t mask = 1; mask < full; ++mask)
            best = std::max(best, ratio_of([&](std::size_t i) { return ((mask >> i) & 1U) != 0; }));
    } else {
        std::vector<int> signs(n);
        for (std::size_t k = 0; k < k_samples; ++k) {
            std::size_t members = 0;
            do {
                detail::draw_subset_signs(rng, dist, signs);
                members = static_cast<std::size_t>(std::count(signs.begin(), signs.end(), 1));
            } while (members == 0 || members == n);
            best = std::max(best, ratio_of([&](std::size_t i) { return signs[i] == 1; }));
        }
    }
    out.max_ratio = best;
    return out;
}

struct GammaPrimeEstimate {
    double gamma_prime = 0.0;
    double max_ratio = 0.0;        // inner max over subsets and snapshots
    double envelope = 0.0;         // analytic upper envelope of the inner max
    std::size_t skipped = 0;       // snapshots with grad F_S = 0
    bool exhaustive = false;
};

/// gamma' = max{1, max_{U, t} |U| |grad F_U(J_t)| / (n |grad F_S(J_t)|)} * gamma.
inline GammaPrimeEstimate gamma_prime_from_grads(const std::vector<Matrix>& grads_per_snapshot, double gamma,
                                                 const SubsetEstimatorConfig& cfg) {
    require(gamma > 0.0, Errc::invalid_argument, "gamma must be positive");
    GammaPrimeEstimate est;
    est.exhaustive = true;
    for (std::size_t s = 0; s < grads_per_snapshot.size(); ++s) {
        RngStream rng(cfg.seed, 0x6A00000000ULL + s);
        const auto r = subset_ratio_max(grads_per_snapshot[s], cfg.k_samples, rng, cfg.distribution);
        if (!r.max_ratio) {
            ++est.skipped;
            continue;
        }
        est.max_ratio = std::max(est.max_ratio, *r.max_ratio);
        est.envelope = std::max(est.envelope, r.envelope);
        est.exhaustive = est.exhaustive && r.exhaustive;
    }
    est.gamma_prime = std::max(1.0, est.max_ratio) * gamma;
    return est;
}

inline GammaPrimeEstimate estimate_gamma_prime(const ModelSpec& spec, const std::vector<ParamVector>& weights,
                                               const Dataset& data, double gamma, const SubsetEstimatorConfig& cfg) {
    cfg.validate(data.size());
    std::vector<Matrix> grads;
    grads.reserve(weights.size());
    for (const auto& w : weights) grads.push_back(per_sample_gradients(spec, w, data).grads);
    return gamma_prime_from_grads(grads, gamma, cfg);
}

// ---------------------------------------------------------------------------
// Relative progress ratios
// ---------------------------------------------------------------------------

struct ProgressRatios {
    std::optional<double> rp;
    std::optional<double> trp;
    double eta_effective = 0.0;
};

/// RP = (F_S' - F_S) / (eta |grad F_S|^2), TRP = (F_S'' - F_S') / (eta grad F_S . grad F_S')
/// for one GD step; gradients are taken at the starting point.
inline ProgressRatios rp_trp_gd(double F_S_prev, double F_S_curr, double F_Sp_prev, double F_Sp_curr, double eta,
                                std::span<const double> grad_S_prev, std::span<const double> grad_Sp_prev) {
    require(eta > 0.0, Errc::invalid_argument, "progress ratios need eta > 0");
    ProgressRatios out;
    out.eta_effective = eta;
    const double g2 = squared_norm(grad_S_prev);
    if (g2 > 0.0) out.rp = (F_S_curr - F_S_prev) / (eta * g2);
    const double gd = dot(grad_S_prev, grad_Sp_prev);
    if (gd != 0.0) out.trp = (F_Sp_curr - F_Sp_prev) / (eta * gd);
    return out;
}

/// Progress ratios over an interval of `steps` updates, estimated from the
/// endpoint weights: the displacement X_prev - X_curr stands in for
/// eta_eff * grad F_S(X_prev) with eta_eff = steps * eta.
inline ProgressRatios rp_trp_interval(std::span<const double> X_prev, std::span<const double> X_curr,
                                      double F_S_prev, double F_S_curr, double F_Sp_prev, double F_Sp_curr,
                                      double eta, double steps, std::span<const double> grad_Sp_prev) {
    require(eta > 0.0 && steps > 0.0, Errc::invalid_argument, "progress ratios need eta > 0");
    ProgressRatios out;
    out.eta_effective = steps * eta;
    const Vector disp = subtract(X_prev, X_curr);
    const double d2 = squared_norm(disp);
    if (d2 > 0.0) out.rp = out.eta_effective * (F_S_curr - F_S_prev) / d2;
    const double proj = dot(disp, grad_Sp_prev);
    if (proj != 0.0) out.trp = (F_Sp_curr - F_Sp_prev) / proj;
    return out;
}

/// Epoch-level SGD approximation: one epoch is n/b steps, so eta_eff = (n/b) eta.
inline ProgressRatios rp_trp_sgd_approx(std::span<const double> X_prev, std::span<const double> X_curr,
                                        double F_S_prev, double F_S_curr, double F_Sp_prev, double F_Sp_curr,
                                        double eta, std::size_t b, std::size_t n, std::span<const double> grad_Sp_prev) {
    require(b >= 1 && b <= n, Errc::invalid_argument, "batch size outside [1, n]");
    return rp_trp_interval(X_prev, X_curr, F_S_prev, F_S_curr, F_Sp_prev, F_Sp_curr, eta,
                           static_cast<double>(n) / static_cast<double>(b), grad_Sp_prev);
}

// ---------------------------------------------------------------------------
// Per-step generalization decomposition
// ---------------------------------------------------------------------------

struct GenDecomposition {
    std::vector<double> per_step_ii;  // [(F_S'(J_t) - F_S'(J_{t-1})) - (F_S(J_t) - F_S(J_{t-1}))], t = 1..T
    double gen_lin_hat = 0.0;
    double gen_nl_hat = 0.0;
    double initial_gap = 0.0;         // F_S'(J_0) - F_S(J_0)
    double final_gap = 0.0;           // F_S'(J_T) - F_S(J_T)
};

/// Needs one snapshot per step (t = 0, 1, ..., T) with weights and both gradients stored.
inline GenDecomposition gen_decomposition(const std::vector<TrajectorySnapshot>& snaps) {
    require(!snaps.empty() && snaps.front().t == 0, Errc::incomplete_trajectory, "step-0 snapshot missing");
    GenDecomposition out;
    out.initial_gap = snaps.front().F_Sprime - snaps.front().F_S;
    out.final_gap = snaps.back().F_Sprime - snaps.back().F_S;
    for (std::size_t k = 1; k < snaps.size(); ++k) {
        const auto& prev = snaps[k - 1];
        const auto& cur = snaps[k];
        if (cur.t != prev.t + 1)
            fail(Errc::incomplete_trajectory, "snapshot after step " + std::to_string(prev.t) + " is step " +
                                                  std::to_string(cur.t) + "; per-step snapshots are required");
        if (prev.w.empty() || cur.w.empty() || prev.grad_S.empty() || prev.grad_Sprime.empty())
            fail(Errc::incomplete_trajectory, "snapshot " + std::to_string(prev.t) + " lacks stored weights or gradients");
        out.per_step_ii.push_back((cur.F_Sprime - prev.F_Sprime) - (cur.F_S - prev.F_S));
        const Vector dw = subtract(cur.w, prev.w);
        const Vector dg = subtract(prev.grad_Sprime, prev.grad_S);
        out.gen_lin_hat += dot(dw, dg);
    }
    out.gen_nl_hat = (out.final_gap - out.initial_gap) - out.gen_lin_hat;
    return out;
}

// ---------------------------------------------------------------------------
// Recorder
// ---------------------------------------------------------------------------

struct RecorderOptions {
    std::optional<std::size_t> n_sp;  // subsample for the second moment; unset = all of S
    std::uint64_t seed = 0;
    bool store_weights = true;
    bool store_gradients = false;
    bool progress_ratios = true;
};

/// Builds a TrajectorySnapshot at every record point of train(): losses and
/// gradients on S and S', Tr Sigma, delta_t, the accumulated complexity,
/// gamma-tilde and the progress ratios since the previous record point.
/// Stateful; use one instance per training run.
class TrajectoryRecorder {
public:
    TrajectoryRecorder(ModelSpec spec, const Dataset& S, const Dataset& S_prime, RecorderOptions opts = {})
        : spec_(std::move(spec)), S_(&S), Sp_(&S_prime), opts_(opts), rng_(opts.seed, 0x7A00) {
        if (opts_.n_sp) require(*opts_.n_sp >= 1 && *opts_.n_sp <= S.size(), Errc::invalid_argument, "n_sp outside [1, n]");
    }

    TrajectorySnapshot operator()(const RecordPoint& pt) {
        TrajectorySnapshot s;
        s.t = pt.t;
        s.epoch = pt.epoch;
        s.eta_t = pt.eta_t;

        const std::size_t n = S_->size();
        const TraceStats st = grad_trace_sigma(spec_, pt.w, *S_, opts_.n_sp.value_or(n), rng_);
        const LossGrad sp = grad_mean(spec_, pt.w, *Sp_);
        s.F_S = st.F;
        s.F_Sprime = sp.loss;
        s.grad_norm_S = st.grad_norm;
        s.grad_norm_Sprime = norm(sp.grad);
        s.grad_dot = dot(st.grad, sp.grad);
        s.trace_sigma = st.trace;
        s.delta_t = s.eta_t * s.grad_norm_S;
        s.gamma_tilde = gamma_tilde(s.grad_norm_Sprime, s.grad_norm_S);

        if (prev_) {
            const auto c = complexity_update(prev_->C_cum, prev_->F_S, s.F_S, s.trace_sigma, s.grad_norm_S, n);
            s.C_cum = c.value;
            s.degenerate_gradient = c.degenerate;
            if (opts_.progress_ratios && pt.steps_since_last_record > 0) {
                ProgressRatios pr;
                if (pt.steps_since_last_record == 1 && pt.last_step && pt.last_step->batch_indices.size() == n) {
                    pr = rp_trp_gd(prev_->F_S, s.F_S, prev_->F_Sprime, s.F_Sprime, prev_->eta_t, prev_grad_S_,
                                   prev_grad_Sp_);
                } else {
                    pr = rp_trp_interval(prev_w_, pt.w, prev_->F_S, s.F_S, prev_->F_Sprime, s.F_Sprime, prev_->eta_t,
                                         static_cast<double>(pt.steps_since_last_record), prev_grad_Sp_);
                }
                s.rp = pr.rp;
                s.trp = pr.trp;
            }
        }

        prev_w_.assign(pt.w.begin(), pt.w.end());
        prev_grad_S_ = st.grad;
        prev_grad_Sp_ = sp.grad;
        if (opts_.store_weights) s.w = prev_w_;
        if (opts_.store_gradients) {
            s.grad_S = st.grad;
            s.grad_Sprime = sp.grad;
        }
        prev_ = s;
        prev_->w.clear();
        prev_->grad_S.clear();
        prev_->grad_Sprime.clear();
        return s;
    }

private:
    ModelSpec spec_;
    const Dataset* S_;
    const Dataset* Sp_;
    RecorderOptions opts_;
    RngStream rng_;
    std::optional<TrajectorySnapshot> prev_;
    Vector prev_w_, prev_grad_S_, prev_grad_Sp_;
};

// ---------------------------------------------------------------------------
// trajectory.csv
// ---------------------------------------------------------------------------

inline CsvTable trajectory_table(const std::vector<TrajectorySnapshot>& snaps) {
    CsvTable table({"t", "epoch", "eta", "F_S", "F_Sprime", "grad_norm_S", "grad_norm_Sprime", "grad_dot", "trace_sigma",
                    "delta", "C_cum", "gamma_tilde", "rp", "trp"});
    for (const auto& s : snaps)
        table.add_row({std::to_string(s.t), std::to_string(s.epoch), format_real(s.eta_t), format_real(s.F_S),
                       format_real(s.F_Sprime), format_real(s.grad_norm_S), format_real(s.grad_norm_Sprime),
                       format_real(s.grad_dot), format_real(s.trace_sigma), format_real(s.delta_t), format_real(s.C_cum),
                       format_real(s.gamma_tilde), format_real(s.rp), format_real(s.trp)});
    return table;
}

inline void write_trajectory_csv(const std::string& path, const std::vector<TrajectorySnapshot>& snaps) {
    trajectory_table(snaps).save(path);
}

} // namespace trajbound
