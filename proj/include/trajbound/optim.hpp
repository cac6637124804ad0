#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "trajbound/datasets.hpp"
#include "trajbound/error.hpp"
#include "trajbound/models.hpp"
#include "trajbound/numerics.hpp"
#include "trajbound/snapshot.hpp"

namespace trajbound {

enum class ScheduleKind { constant, inverse_time, cosine };

/// Learning-rate schedule. inverse_time is c / (beta (t + 1)) with t counted
/// from 0, i.e. c / (beta t) for 1-based steps. Cosine clamps to eta_min after T_max.
class Schedule {
public:
    static Schedule constant(double eta0) {
        require(std::isfinite(eta0) && eta0 > 0.0, Errc::invalid_argument, "constant schedule needs eta0 > 0");
        Schedule s;
        s.kind_ = ScheduleKind::constant;
        s.eta0_ = eta0;
        return s;
    }

    static Schedule inverse_time(double c, double beta) {
        require(std::isfinite(c) && c > 0.0, Errc::invalid_argument, "inverse_time schedule needs c > 0");
        require(std::isfinite(beta) && beta > 0.0, Errc::invalid_argument, "inverse_time schedule needs beta > 0");
        Schedule s;
        s.kind_ = ScheduleKind::inverse_time;
        s.c_ = c;
        s.beta_ = beta;
        return s;
    }

    static Schedule cosine(double eta0, double eta_min, long t_max) {
        require(std::isfinite(eta0) && eta0 > 0.0, Errc::invalid_argument, "cosine schedule needs eta0 > 0");
        require(std::isfinite(eta_min) && eta_min >= 0.0 && eta_min <= eta0, Errc::invalid_argument,
                "cosine schedule needs 0 <= eta_min <= eta0");
        require(t_max >= 1, Errc::invalid_argument, "cosine schedule needs T_max >= 1");
        Schedule s;
        s.kind_ = ScheduleKind::cosine;
        s.eta0_ = eta0;
        s.eta_min_ = eta_min;
        s.t_max_ = t_max;
        return s;
    }

    ScheduleKind kind() const noexcept { return kind_; }
    double eta0() const noexcept { return eta0_; }
    double c() const noexcept { return c_; }
    double beta() const noexcept { return beta_; }
    double eta_min() const noexcept { return eta_min_; }
    long t_max() const noexcept { return t_max_; }

    double at(long t) const {
        require(t >= 0, Errc::invalid_argument, "learning rate requested for negative step");
        switch (kind_) {
        case ScheduleKind::constant: return eta0_;
        case ScheduleKind::inverse_time: return c_ / (beta_ * static_cast<double>(t + 1));
        case ScheduleKind::cosine: {
            if (t >= t_max_) return eta_min_;
            const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(t_max_);
            return eta_min_ + 0.5 * (eta0_ - eta_min_) * (1.0 + std::cos(phase));
        }
        }
        return eta0_;
    }

private:
    Schedule() = default;
    ScheduleKind kind_ = ScheduleKind::constant;
    double eta0_ = 0.0;
    double c_ = 0.0;
    double beta_ = 0.0;
    double eta_min_ = 0.0;
    long t_max_ = 1;
};

inline double lr_at(const Schedule& schedule, long t) { return schedule.at(t); }

enum class OptimMode { gd, sgd };

/// uniform_subsets draws an independent uniform size-b subset every step.
/// epoch_permutation walks a fresh permutation per epoch in chunks of b
/// (the n mod b leftover rows of each epoch are skipped).
enum class BatchSampling { uniform_subsets, epoch_permutation };

struct OptimConfig {
    OptimMode mode = OptimMode::sgd;
    std::size_t batch_size = 10;
    Schedule schedule = Schedule::constant(0.05);
    long max_steps = 0;
    std::optional<double> stop_train_loss;
    long snapshot_every = 1;
    std::uint64_t seed = 0;
    BatchSampling sampling = BatchSampling::uniform_subsets;

    std::size_t effective_batch(std::size_t n) const { return mode == OptimMode::gd ? n : batch_size; }

    void validate(std::size_t n) const {
        require(max_steps >= 0, Errc::invalid_argument, "max_steps must be >= 0");
        require(snapshot_every >= 1, Errc::invalid_argument, "snapshot_every must be >= 1");
        if (mode == OptimMode::sgd)
            require(batch_size >= 1 && batch_size <= n, Errc::invalid_argument,
                    "sgd batch size " + std::to_string(batch_size) + " outside [1, " + std::to_string(n) + "]");
    }

    /// Epoch index reached after t steps.
    long epoch_of(long t, std::size_t n) const {
        if (mode == OptimMode::gd) return t;
        if (sampling == BatchSampling::epoch_permutation) return t / static_cast<long>(std::max<std::size_t>(1, n / batch_size));
        return static_cast<long>((static_cast<unsigned long long>(t) * batch_size) / n);
    }

    /// Steps in one pass over the data.
    long steps_per_epoch(std::size_t n) const {
        if (mode == OptimMode::gd) return 1;
        if (sampling == BatchSampling::epoch_permutation) return static_cast<long>(std::max<std::size_t>(1, n / batch_size));
        return static_cast<long>(std::max<std::size_t>(1, (n + batch_size - 1) / batch_size));
    }
};

/// Uniform size-b subset of [0, n), returned in increasing order.
inline std::vector<std::size_t> sample_batch(RngStream& rng, std::size_t n, std::size_t b) {
    require(b >= 1 && b <= n, Errc::invalid_argument,
            "batch size " + std::to_string(b) + " outside [1, " + std::to_string(n) + "]");
    auto idx = sample_without_replacement(rng, n, b);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct StepRecord {
    long t = 0;
    double eta_t = 0.0;
    std::vector<std::size_t> batch_indices;
    double F_B = 0.0;
};

struct StepResult {
    ParamVector w_next;
    StepRecord record;
};

inline constexpr double kDivergenceNorm = 1e12;

/// w_next = w - eta * grad F_B(w).
inline StepResult step_on_batch(const ModelSpec& spec, std::span<const double> w, const Dataset& data, double eta,
                                std::vector<std::size_t> batch, long t) {
    LossGrad lg;
    try {
        lg = grad_mean_over(spec, w, data, batch);
    } catch (const Error& e) {
        if (e.code() != Errc::numeric_domain) throw;
        throw DivergedError(t, norm(w), e.what());
    }
    if (!std::isfinite(lg.loss) || !all_finite(lg.grad)) throw DivergedError(t, norm(w), "non-finite batch gradient");
    StepResult out{ParamVector(w.begin(), w.end()), StepRecord{t, eta, std::move(batch), lg.loss}};
    axpy(-eta, lg.grad, out.w_next);
    const double wn = norm(out.w_next);
    if (!std::isfinite(wn) || wn > kDivergenceNorm) throw DivergedError(t, wn, "weights left the finite range");
    return out;
}

/// One GD (B = S) or SGD (B uniform of size b) update at step t.
inline StepResult step(const ModelSpec& spec, std::span<const double> w, const Dataset& data, const OptimConfig& cfg,
                       long t, RngStream& rng) {
    const double eta = cfg.schedule.at(t);
    auto batch = cfg.mode == OptimMode::gd ? all_indices(data.size()) : sample_batch(rng, data.size(), cfg.batch_size);
    return step_on_batch(spec, w, data, eta, std::move(batch), t);
}

/// Handed to the recorder at step 0, every `snapshot_every` steps and at the final step.
struct RecordPoint {
    long t = 0;
    long epoch = 0;
    double eta_t = 0.0;
    std::span<const double> w;
    const StepRecord* last_step = nullptr;  // null at t = 0
    long steps_since_last_record = 0;
};

using Recorder = std::function<TrajectorySnapshot(const RecordPoint&)>;

struct TrainResult {
    ParamVector w_final;
    std::vector<TrajectorySnapshot> snapshots;
    std::vector<double> step_etas;   // eta_t for every executed step
    long steps = 0;
    bool stopped_early = false;
};

/// Runs at most cfg.max_steps updates, stopping once F_S < stop_train_loss.
/// w0 must not depend on S.
inline TrainResult train(const ModelSpec& spec, ParamVector w0, const Dataset& S, const Dataset& S_prime,
                         const OptimConfig& cfg, const Recorder& recorder = {}) {
    (void)S_prime;  // consumed by the recorder
    S.validate();
    cfg.validate(S.size());
    require(w0.size() == spec.param_count(), Errc::dimension_mismatch, "initial weights have the wrong length");

    const std::size_t n = S.size();
    RngStream rng(cfg.seed, 0);
    std::vector<std::size_t> perm;
    std::size_t perm_pos = n;  // forces a shuffle on first use

    TrainResult out;
    ParamVector w = std::move(w0);
    std::optional<StepRecord> last;
    long last_recorded = -1;

    auto record = [&](long t) {
        if (t == last_recorded) return;
        const RecordPoint pt{t, cfg.epoch_of(t, n), cfg.schedule.at(t), w, last ? &*last : nullptr,
                             last_recorded < 0 ? 0 : t - last_recorded};
        if (recorder) {
            out.snapshots.push_back(recorder(pt));
        } else {
            TrajectorySnapshot s;
            s.t = pt.t;
            s.epoch = pt.epoch;
            s.eta_t = pt.eta_t;
            out.snapshots.push_back(std::move(s));
        }
        last_recorded = t;
    };

    for (long t = 0;; ++t) {
        bool stop = t >= cfg.max_steps;
        if (!stop && cfg.stop_train_loss && loss_mean(spec, w, S) < *cfg.stop_train_loss) {
            stop = true;
            out.stopped_early = true;
        }
        if (t % cfg.snapshot_every == 0 || stop) record(t);
        if (stop) {
            out.steps = t;
            break;
        }

        StepResult r;
        if (cfg.mode == OptimMode::sgd && cfg.sampling == BatchSampling::epoch_permutation) {
            const std::size_t b = cfg.batch_size;
            if (perm_pos + b > n) {
                perm = sample_without_replacement(rng, n, n);
                perm_pos = 0;
            }
            std::vector<std::size_t> batch(perm.begin() + static_cast<long>(perm_pos),
                                           perm.begin() + static_cast<long>(perm_pos + b));
            std::sort(batch.begin(), batch.end());
            perm_pos += b;
            r = step_on_batch(spec, w, S, cfg.schedule.at(t), std::move(batch), t);
        } else {
            r = step(spec, w, S, cfg, t, rng);
        }
        out.step_etas.push_back(r.record.eta_t);
        w = std::move(r.w_next);
        last = std::move(r.record);
    }
    out.w_final = std::move(w);
    return out;
}

} // namespace trajbound
