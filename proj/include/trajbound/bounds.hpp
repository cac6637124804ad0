#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trajbound/csv.hpp"
#include "trajbound/datasets.hpp"
#include "trajbound/error.hpp"
#include "trajbound/models.hpp"
#include "trajbound/numerics.hpp"
#include "trajbound/optim.hpp"
#include "trajbound/snapshot.hpp"
#include "trajbound/trajectory.hpp"

namespace trajbound {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Every scalar that enters a bound. NaN marks a constant that was never estimated.
struct ConstantEstimates {
    double L_hat = kMissing;
    double beta_hat = kMissing;
    double M2_sq = kMissing;      // max_t E |grad F_B(J_t)|^2
    double M4_fourth = kMissing;  // max_t E |grad F_B(J_t)|^4
    double gamma = kMissing;
    double gamma_prime = kMissing;
    double V_m = kMissing;
    double eta_m = kMissing;
    double zeta = kMissing;
    long T0 = 0;
    std::size_t n = 0;
    long T = 0;
    std::size_t b = 0;

    bool V_trivial = false;
    double subset_ratio = kMissing;          // max{1, max_{U,t} |U| |grad F_U| / (n |grad F_S|)}
    double subset_ratio_envelope = kMissing;
    bool subset_ratio_exhaustive = false;
    std::size_t gamma_prime_skipped = 0;
    double gamma_relaxed = kMissing;         // early-phase quantile used by the relaxed bound
    double gamma_prime_relaxed = kMissing;
};

struct ConstantOptions {
    std::size_t batch_size = 10;             // b for M2/M4; b = n gives the exact full-batch values
    std::size_t m_batches = 64;
    std::size_t max_estimator_snapshots = 0; // V and gamma' on at most this many snapshots (0 = all)
    std::size_t beta_snapshots = 8;          // mlp only
    int power_iters = 1000;
    double power_tol = 1e-10;
    double gamma_quantile = 0.95;
    double early_fraction = 0.25;
};

// ---------------------------------------------------------------------------
// Smoothness
// ---------------------------------------------------------------------------

/// Top eigenvalue of (1/n) sum_i x_i x_i^T, the exact Hessian of the linear model.
inline double linear_beta_hat(const Dataset& data) {
    data.validate();
    const std::size_t n = data.size(), d = data.dim();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = data.x(i);
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(d));
        H.noalias() += xv * xv.transpose();
    }
    H /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

/// Sharpness at w: top eigenvalue of the finite-difference Hessian of F_data.
inline EigenEstimate hvp_top_eig(const ModelSpec& spec, std::span<const double> w, const Dataset& data, int iters,
                                 double tol, std::uint64_t seed = 0x5EED) {
    const double h = default_fd_step(w);
    const LinearOperator op = [&](std::span<const double> v) -> Vector {
        if (squared_norm(v) == 0.0) return Vector(v.size(), 0.0);
        return hessian_vector_product(spec, w, data, v, h);
    };
    return power_iteration_top_eig(op, w.size(), iters, tol, seed);
}

// ---------------------------------------------------------------------------
// Constant estimation
// ---------------------------------------------------------------------------

namespace detail {

inline void check_snapshots(const std::vector<TrajectorySnapshot>& snaps) {
    require(!snaps.empty(), Errc::incomplete_trajectory, "trajectory has no snapshots");
    require(snaps.front().t == 0, Errc::incomplete_trajectory, "trajectory lacks the step-0 snapshot");
    for (std::size_t k = 1; k < snaps.size(); ++k)
        require(snaps[k].t > snaps[k - 1].t, Errc::incomplete_trajectory,
                "snapshot steps are not increasing at index " + std::to_string(k));
}

/// Steps represented by each snapshot: up to the next snapshot, 1 for the last.
inline std::vector<long> snapshot_weights(const std::vector<TrajectorySnapshot>& snaps) {
    std::vector<long> w(snaps.size(), 1);
    for (std::size_t k = 0; k + 1 < snaps.size(); ++k) w[k] = snaps[k + 1].t - snaps[k].t;
    return w;
}

inline std::vector<std::size_t> spread_indices(std::size_t count, std::size_t limit) {
    std::vector<std::size_t> idx;
    if (count == 0) return idx;
    if (limit == 0 || limit >= count) {
        for (std::size_t i = 0; i < count; ++i) idx.push_back(i);
        return idx;
    }
    if (limit == 1) return {count - 1};
    for (std::size_t j = 0; j < limit; ++j) {
        const std::size_t i = (j * (count - 1) + (limit - 1) / 2) / (limit - 1);
        if (idx.empty() || idx.back() != i) idx.push_back(i);
    }
    return idx;
}

inline Vector batch_mean_row(const Matrix& grads, std::span<const std::size_t> rows) {
    Vector g(grads.cols(), 0.0);
    for (std::size_t i : rows) axpy(1.0, grads.row(i), g);
    for (double& v : g) v /= static_cast<double>(rows.size());
    return g;
}

} // namespace detail

/// Linear-interpolated sample quantile (q in [0, 1]) of a non-empty list.
inline double quantile(std::vector<double> values, double q) {
    require(!values.empty(), Errc::invalid_argument, "quantile of an empty list");
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct RelaxedParameters {
    double gamma_relaxed = 1.0;
    long T0 = 0;
    double zeta = 0.0;
};

/// gamma_relaxed is the q-quantile of gamma-tilde over the early fraction of
/// snapshots, T0 the first step where gamma-tilde exceeds it, and zeta the
/// largest excess (|grad F_S'| - gamma_relaxed |grad F_S|)_+ from T0 on.
inline RelaxedParameters relaxed_parameters(const std::vector<TrajectorySnapshot>& snaps, double q, double early_fraction) {
    detail::check_snapshots(snaps);
    require(early_fraction > 0.0 && early_fraction <= 1.0, Errc::invalid_argument, "early_fraction outside (0, 1]");
    const auto early = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(early_fraction * static_cast<double>(snaps.size()))));
    std::vector<double> g;
    for (std::size_t k = 0; k < early; ++k)
        if (snaps[k].gamma_tilde) g.push_back(*snaps[k].gamma_tilde);
    RelaxedParameters p;
    if (g.empty()) {
        p.T0 = snaps.back().t;
        return p;
    }
    p.gamma_relaxed = quantile(g, q);
    p.T0 = snaps.back().t;
    std::size_t first = snaps.size();
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        if (snaps[k].gamma_tilde && *snaps[k].gamma_tilde > p.gamma_relaxed) {
            first = k;
            p.T0 = snaps[k].t;
            break;
        }
    }
    for (std::size_t k = first; k < snaps.size(); ++k)
        p.zeta = std::max(p.zeta, snaps[k].grad_norm_Sprime - p.gamma_relaxed * snaps[k].grad_norm_S);
    return p;
}

/// Estimates every constant from a recorded run. Snapshots must carry their weights.
inline ConstantEstimates estimate_constants(const ModelSpec& spec, const TrainResult& run, const Dataset& S,
                                            const Dataset& S_prime, const SubsetEstimatorConfig& est_cfg,
                                            const ConstantOptions& opts = {}) {
    (void)S_prime;  // enters only through the recorded gamma-tilde series
    const auto& snaps = run.snapshots;
    require(!snaps.empty(), Errc::invalid_argument, "cannot estimate constants from an empty trajectory");
    detail::check_snapshots(snaps);
    for (const auto& s : snaps)
        require(s.w.size() == spec.param_count(), Errc::incomplete_trajectory,
                "snapshot " + std::to_string(s.t) + " has no stored weights");
    const std::size_t n = S.size();
    require(n >= 2, Errc::invalid_argument, "constants need n >= 2");
    require(opts.batch_size >= 1 && opts.batch_size <= n, Errc::invalid_argument, "batch size outside [1, n]");
    require(opts.m_batches >= 1, Errc::invalid_argument, "m_batches must be >= 1");
    est_cfg.validate(n);

    ConstantEstimates c;
    c.n = n;
    c.T = run.steps;
    c.b = opts.batch_size;
    c.L_hat = 0.0;
    c.M2_sq = 0.0;
    c.M4_fourth = 0.0;

    const auto chosen = detail::spread_indices(snaps.size(), opts.max_estimator_snapshots);
    std::vector<bool> is_chosen(snaps.size(), false);
    for (std::size_t k : chosen) is_chosen[k] = true;

    double v_max = 0.0;
    bool any_v = false;
    double ratio_max = 0.0;
    double envelope = 0.0;
    bool exhaustive = true;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const auto ps = per_sample_gradients(spec, snaps[k].w, S);
        for (std::size_t i = 0; i < n; ++i) c.L_hat = std::max(c.L_hat, norm(ps.grads.row(i)));

        RngStream mrng(est_cfg.seed, 0x4D00000000ULL + k);
        double m2 = 0.0, m4 = 0.0;
        if (opts.batch_size == n) {
            const double g2 = squared_norm(detail::batch_mean_row(ps.grads, all_indices(n)));
            m2 = g2;
            m4 = g2 * g2;
        } else {
            for (std::size_t j = 0; j < opts.m_batches; ++j) {
                const auto batch = sample_batch(mrng, n, opts.batch_size);
                const double g2 = squared_norm(detail::batch_mean_row(ps.grads, batch));
                m2 += g2;
                m4 += g2 * g2;
            }
            m2 /= static_cast<double>(opts.m_batches);
            m4 /= static_cast<double>(opts.m_batches);
        }
        c.M2_sq = std::max(c.M2_sq, m2);
        c.M4_fourth = std::max(c.M4_fourth, m4);

        if (!is_chosen[k]) continue;
        RngStream vrng(est_cfg.seed, 0x5600000000ULL + k);
        const auto v = estimate_V_from_grads(ps.grads, est_cfg.k_samples, vrng, est_cfg.distribution);
        if (v.V) {
            any_v = true;
            v_max = std::max(v_max, *v.V);
        }
        RngStream grng(est_cfg.seed, 0x6A00000000ULL + k);
        const auto r = subset_ratio_max(ps.grads, est_cfg.k_samples, grng, est_cfg.distribution);
        if (!r.max_ratio) {
            ++c.gamma_prime_skipped;
            continue;
        }
        ratio_max = std::max(ratio_max, *r.max_ratio);
        envelope = std::max(envelope, r.envelope);
        exhaustive = exhaustive && r.exhaustive;
    }
    c.V_m = any_v ? v_max : 0.0;
    c.V_trivial = !any_v;
    c.subset_ratio = std::max(1.0, ratio_max);
    c.subset_ratio_envelope = envelope;
    c.subset_ratio_exhaustive = exhaustive;

    double gamma = 0.0;
    for (const auto& s : snaps)
        if (s.gamma_tilde) gamma = std::max(gamma, *s.gamma_tilde);
    c.gamma = gamma > 0.0 ? gamma : 1.0;
    c.gamma_prime = c.subset_ratio * c.gamma;

    c.eta_m = snaps.front().eta_t;
    if (!run.step_etas.empty()) c.eta_m = *std::max_element(run.step_etas.begin(), run.step_etas.end());

    if (spec.kind == ModelKind::linear) {
        c.beta_hat = linear_beta_hat(S);
    } else {
        c.beta_hat = 0.0;
        for (std::size_t k : detail::spread_indices(snaps.size(), opts.beta_snapshots))
            c.beta_hat = std::max(c.beta_hat, hvp_top_eig(spec, snaps[k].w, S, opts.power_iters, opts.power_tol,
                                                          est_cfg.seed ^ (0xBE7A0000ULL + k)).value);
    }

    const auto relaxed = relaxed_parameters(snaps, opts.gamma_quantile, opts.early_fraction);
    c.gamma_relaxed = relaxed.gamma_relaxed;
    c.gamma_prime_relaxed = c.subset_ratio * relaxed.gamma_relaxed;
    c.T0 = relaxed.T0;
    c.zeta = relaxed.zeta;
    return c;
}

// ---------------------------------------------------------------------------
// Bound reports
// ---------------------------------------------------------------------------

enum class BaselineKind { hardt_convex, hardt_nonconvex, zhang, bassily };

inline std::string to_string(BaselineKind k) {
    switch (k) {
    case BaselineKind::hardt_convex: return "hardt_convex";
    case BaselineKind::hardt_nonconvex: return "hardt_nonconvex";
    case BaselineKind::zhang: return "zhang";
    case BaselineKind::bassily: return "bassily";
    }
    return "?";
}

struct BoundReport {
    std::string method;
    double value = 0.0;
    std::optional<double> remainder_scale;  // O(eta_m) term with unknown constant; never part of value
    ConstantEstimates constants;
    std::vector<std::pair<std::string, double>> aggregates;
    std::string formula;

    double aggregate(const std::string& name) const {
        for (const auto& [k, v] : aggregates)
            if (k == name) return v;
        fail(Errc::invalid_argument, method + " report has no aggregate '" + name + "'");
    }
};

namespace detail {

inline double need(double v, const char* name, const std::string& method) {
    require(std::isfinite(v), Errc::invalid_argument, method + " needs constant " + name);
    return v;
}

} // namespace detail

/// Evaluates a report's formula from its constants and aggregates.
inline double evaluate_bound(const BoundReport& r) {
    const auto& c = r.constants;
    const auto& m = r.method;
    auto agg = [&](const char* name) { return r.aggregate(name); };
    const auto n = static_cast<double>(c.n);
    if (m == "ours_main") {
        return detail::need(c.gamma_prime, "gamma_prime", m) * detail::need(c.V_m, "V_m", m) * agg("C_T");
    }
    if (m == "ours_smooth") {
        const double cc = agg("c");
        const double gv = detail::need(c.gamma_prime, "gamma_prime", m) * detail::need(c.V_m, "V_m", m);
        const double term1 = gv * agg("C_T");
        if (cc == 0.0 || agg("T") == 0.0) return term1;
        const double term2 = 2.0 * cc * cc * gv * std::sqrt(detail::need(c.M4_fourth, "M4_fourth", m)) *
                             std::sqrt(agg("smooth_sum"));
        const double term3 = 2.0 * cc * cc * detail::need(c.M2_sq, "M2_sq", m) / detail::need(c.beta_hat, "beta_hat", m);
        return term1 + term2 + term3;
    }
    if (m == "ours_relaxed") {
        return detail::need(c.gamma_prime, "gamma_prime", m) * detail::need(c.V_m, "V_m", m) * agg("C_T") +
               0.5 * agg("tail_sum") * detail::need(c.zeta, "zeta", m);
    }
    const double L = detail::need(c.L_hat, "L_hat", m);
    if (m == "hardt_convex") return 2.0 * L * L / n * agg("sum_eta");
    if (m == "hardt_nonconvex") {
        const double bc = agg("c");
        const double beta = detail::need(c.beta_hat, "beta_hat", m);
        const double c_h = bc / beta;
        return (1.0 + 1.0 / bc) / (n - 1.0) * std::pow(2.0 * c_h * L * L, 1.0 / (bc + 1.0)) *
               std::pow(agg("T"), bc / (bc + 1.0));
    }
    if (m == "zhang") {
        const double cc = agg("c");
        return 16.0 * L * L * std::pow(agg("T"), cc) / std::pow(n, 1.0 + cc);
    }
    if (m == "bassily") return 2.0 * L * L * std::sqrt(agg("sum_eta_sq")) + 4.0 * L * L / n * agg("sum_eta");
    fail(Errc::invalid_argument, "unknown bound method '" + m + "'");
}

namespace detail {

inline BoundReport finish(BoundReport r) {
    r.value = evaluate_bound(r);
    require(std::isfinite(r.value), Errc::numeric_domain, r.method + " evaluated to a non-finite value");
    return r;
}

inline void require_nontrivial(const ConstantEstimates& c) {
    require(!c.V_trivial, Errc::invalid_argument, "V is undefined (zero subset-gradient spread); the bound is trivial");
}

} // namespace detail

/// gamma' V_m C(J_T); C_cum already carries the -2/sqrt(n) factor and the noise ratio.
inline BoundReport bound_trajectory_main(const ConstantEstimates& est, const std::vector<TrajectorySnapshot>& snaps) {
    detail::check_snapshots(snaps);
    detail::require_nontrivial(est);
    BoundReport r;
    r.method = "ours_main";
    r.constants = est;
    r.aggregates = {{"C_T", snaps.back().C_cum}};
    r.remainder_scale = est.eta_m;
    r.formula = "gamma_prime * V_m * C_T + O(eta_m), O(eta_m) has an unknown constant and is not included";
    return detail::finish(std::move(r));
}

/// Three-term bound for eta_t = c / (beta (t + 1)); c = 0 or an untrained run leaves the main term alone.
inline BoundReport bound_trajectory_smooth(const ConstantEstimates& est, const std::vector<TrajectorySnapshot>& snaps,
                                           double c) {
    detail::check_snapshots(snaps);
    detail::require_nontrivial(est);
    require(std::isfinite(c) && c >= 0.0, Errc::invalid_argument, "schedule constant c must be >= 0");
    const auto n = static_cast<double>(est.n);
    const double beta = est.beta_hat;
    double sum = 0.0;
    if (c > 0.0) {
        detail::need(beta, "beta_hat", "ours_smooth");
        for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
            const auto& s = snaps[k];
            double ratio = 1.0;
            if (s.grad_norm_S > 0.0)
                ratio += s.trace_sigma / (s.grad_norm_S * s.grad_norm_S);
            else if (s.trace_sigma > 0.0)
                continue;
            for (long t = s.t; t < snaps[k + 1].t; ++t) {
                const double tp = static_cast<double>(t + 1);
                sum += ratio / (n * beta * beta * tp * tp * tp * tp);
            }
        }
    }
    BoundReport r;
    r.method = "ours_smooth";
    r.constants = est;
    r.aggregates = {{"C_T", snaps.back().C_cum},
                    {"c", c},
                    {"smooth_sum", sum},
                    {"T", static_cast<double>(snaps.back().t - snaps.front().t)}};
    r.remainder_scale = est.eta_m;
    r.formula = "gamma_prime*V_m*C_T + 2 c^2 gamma_prime V_m sqrt(M4_fourth) sqrt(smooth_sum) + 2 c^2 M2_sq / beta_hat;"
                " smooth_sum = sum_{t<T} (1 + TrSigma_t/|grad F_S|^2) / (n beta_hat^2 (t+1)^4)";
    return detail::finish(std::move(r));
}

inline BoundReport bound_trajectory_smooth(const ConstantEstimates& est, const std::vector<TrajectorySnapshot>& snaps,
                                           const Schedule& schedule) {
    require(schedule.kind() == ScheduleKind::inverse_time, Errc::invalid_argument,
            "the smooth bound requires an inverse_time schedule");
    require(std::isfinite(est.beta_hat) &&
                std::abs(schedule.beta() - est.beta_hat) <= 1e-9 * std::max(1.0, std::abs(est.beta_hat)),
            Errc::invalid_argument, "schedule beta does not match beta_hat");
    return bound_trajectory_smooth(est, snaps, schedule.c());
}

/// Main bound plus (1/2) sum_{t >= T0} eta_t |grad F_S(J_t)| zeta.
inline BoundReport bound_trajectory_relaxed(const ConstantEstimates& est, const std::vector<TrajectorySnapshot>& snaps,
                                            long T0, double zeta) {
    detail::check_snapshots(snaps);
    detail::require_nontrivial(est);
    require(T0 >= 0 && T0 <= snaps.back().t, Errc::invalid_argument, "T0 outside [0, T]");
    require(std::isfinite(zeta) && zeta >= 0.0, Errc::invalid_argument, "zeta must be >= 0");
    const auto weights = detail::snapshot_weights(snaps);
    double tail = 0.0;
    for (std::size_t k = 0; k < snaps.size(); ++k)
        if (snaps[k].t >= T0) tail += static_cast<double>(weights[k]) * snaps[k].delta_t;
    BoundReport r;
    r.method = "ours_relaxed";
    r.constants = est;
    r.constants.T0 = T0;
    r.constants.zeta = zeta;
    r.aggregates = {{"C_T", snaps.back().C_cum}, {"tail_sum", tail}};
    r.remainder_scale = est.eta_m;
    r.formula = "gamma_prime * V_m * C_T + 0.5 * zeta * sum_{t>=T0} eta_t |grad F_S(J_t)|";
    return detail::finish(std::move(r));
}

/// Explicit-constant stability bounds. `c` is the inverse_time schedule constant
/// (eta_t = c / (beta t)), required by hardt_nonconvex and zhang.
inline BoundReport bound_stability_baseline(BaselineKind kind, const ConstantEstimates& est,
                                            std::span<const double> step_etas, std::optional<double> c = std::nullopt) {
    BoundReport r;
    r.method = to_string(kind);
    r.constants = est;
    require(est.n >= 2, Errc::invalid_argument, r.method + " needs constant n >= 2");
    detail::need(est.L_hat, "L_hat", r.method);
    const auto T = static_cast<double>(step_etas.size());
    switch (kind) {
    case BaselineKind::hardt_convex: {
        double s = 0.0;
        for (double e : step_etas) s += e;
        r.aggregates = {{"sum_eta", s}};
        r.formula = "2 L_hat^2 / n * sum_{t=1}^{T} eta_t";
        break;
    }
    case BaselineKind::hardt_nonconvex:
        require(c && *c > 0.0, Errc::invalid_argument, "hardt_nonconvex needs the inverse_time constant c");
        detail::need(est.beta_hat, "beta_hat", r.method);
        r.aggregates = {{"c", *c}, {"T", T}};
        r.formula = "(1 + 1/(beta_hat c_h)) / (n - 1) * (2 c_h L_hat^2)^(1/(beta_hat c_h + 1)) * T^(beta_hat c_h/(beta_hat c_h + 1)),"
                    " c_h = c / beta_hat";
        break;
    case BaselineKind::zhang:
        require(c && *c > 0.0, Errc::invalid_argument, "zhang needs the inverse_time constant c");
        r.aggregates = {{"c", *c}, {"T", T}};
        r.formula = "16 L_hat^2 T^c / n^(1 + c)";
        break;
    case BaselineKind::bassily: {
        double s = 0.0, s2 = 0.0;
        for (std::size_t t = 0; t + 1 < step_etas.size(); ++t) {
            s += step_etas[t];
            s2 += step_etas[t] * step_etas[t];
        }
        r.aggregates = {{"sum_eta", s}, {"sum_eta_sq", s2}};
        r.formula = "2 L_hat^2 sqrt(sum_{t=1}^{T-1} eta_t^2) + 4 L_hat^2 / n * sum_{t=1}^{T-1} eta_t";
        break;
    }
    }
    return detail::finish(std::move(r));
}

inline BoundReport bound_stability_baseline(BaselineKind kind, const ConstantEstimates& est,
                                            std::span<const double> step_etas, const Schedule& schedule) {
    std::optional<double> c;
    if (schedule.kind() == ScheduleKind::inverse_time) c = schedule.c();
    return bound_stability_baseline(kind, est, step_etas, c);
}

// ---------------------------------------------------------------------------
// bounds.csv
// ---------------------------------------------------------------------------

inline CsvTable bounds_table(const std::vector<BoundReport>& reports) {
    CsvTable table({"method", "value", "remainder_scale", "L_hat", "beta_hat", "M2_sq", "M4_fourth", "gamma",
                    "gamma_prime", "V_m", "eta_m", "zeta", "T0", "n", "T", "b", "formula"});
    auto num = [](double v) { return std::isfinite(v) ? format_real(v) : std::string{}; };
    for (const auto& r : reports) {
        const auto& c = r.constants;
        table.add_row({r.method, format_real(r.value), format_real(r.remainder_scale), num(c.L_hat), num(c.beta_hat),
                       num(c.M2_sq), num(c.M4_fourth), num(c.gamma), num(c.gamma_prime), num(c.V_m), num(c.eta_m),
                       num(c.zeta), std::to_string(c.T0), std::to_string(c.n), std::to_string(c.T), std::to_string(c.b),
                       r.formula});
    }
    return table;
}

inline void write_bounds_csv(const std::string& path, const std::vector<BoundReport>& reports) {
    bounds_table(reports).save(path);
}

} // namespace trajbound
