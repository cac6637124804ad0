#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "trajbound/bounds.hpp"
#include "trajbound/csv.hpp"
#include "trajbound/datasets.hpp"
#include "trajbound/error.hpp"
#include "trajbound/models.hpp"
#include "trajbound/optim.hpp"
#include "trajbound/trajectory.hpp"
#include "trajbound/harness/config.hpp"
#include "trajbound/harness/stats.hpp"
#include "trajbound/harness/svg.hpp"

namespace trajbound::harness {

// Substream ids hung off each run seed.
inline constexpr std::uint64_t kInitStream = 0x1417;
inline constexpr std::uint64_t kNoiseStream = 0x401;
inline constexpr std::uint64_t kSplitStream = 0x5B1;

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return trajbound::detail::mix64(seed ^ (salt * trajbound::detail::kGolden));
}

struct SeedData {
    Dataset S;
    Dataset S_prime;
};

inline SeedData make_data(const ExperimentConfig& c, std::uint64_t seed, double label_noise) {
    SeedData d;
    if (c.dataset.kind == "toy") {
        ToyConfig tc;
        tc.n_train = c.dataset.n_train;
        tc.n_test = c.dataset.n_test;
        tc.dim = c.dataset.dim;
        tc.seed = seed;
        auto toy = generate_toy(tc);
        d.S = std::move(toy.train);
        d.S_prime = std::move(toy.test);
    } else {
        const Dataset all = load_csv_dataset(c.dataset.path, c.dataset.label_column);
        RngStream rng(seed, kSplitStream);
        auto split = split_train_holdout(all, c.dataset.holdout_fraction, rng);
        d.S = std::move(split.train);
        d.S_prime = std::move(split.holdout);
    }
    if (label_noise > 0.0) {
        RngStream rng(seed, kNoiseStream);
        d.S = inject_label_noise(d.S, label_noise, rng);
    }
    return d;
}

inline ModelSpec make_model(const ExperimentConfig& c, std::size_t dim) {
    if (c.model.kind == "linear") return ModelSpec::linear(dim);
    const LossKind loss = parse_loss(c.model.loss);
    std::vector<std::size_t> widths{dim};
    widths.insert(widths.end(), c.model.hidden.begin(), c.model.hidden.end());
    widths.push_back(loss == LossKind::cross_entropy ? 2 : 1);
    return ModelSpec::mlp(widths, loss);
}

/// Smoothness used to set an inverse_time schedule before training.
inline double initial_beta_hat(const ModelSpec& spec, std::span<const double> w0, const Dataset& S,
                               const ExperimentConfig& c) {
    if (spec.kind == ModelKind::linear) return linear_beta_hat(S);
    return hvp_top_eig(spec, w0, S, static_cast<int>(c.estimators.power_iters), c.estimators.power_tol).value;
}

struct RunSetup {
    ModelSpec spec;
    ParamVector w0;
    OptimConfig optim;
    std::optional<double> beta_hat;  // set when the schedule needed it
};

inline RunSetup make_run(const ExperimentConfig& c, std::uint64_t seed, const SeedData& data,
                         std::optional<double> lr_override = std::nullopt) {
    RunSetup r{make_model(c, data.S.dim()), {}, {}, std::nullopt};
    RngStream init_rng(seed, kInitStream);
    r.w0 = init_params(r.spec, init_rng);

    const std::size_t n = data.S.size();
    OptimConfig& o = r.optim;
    o.mode = c.optim.mode == "gd" ? OptimMode::gd : OptimMode::sgd;
    o.batch_size = o.mode == OptimMode::gd ? n : c.optim.batch_size;
    o.sampling = c.optim.sampling == "epoch_permutation" ? BatchSampling::epoch_permutation : BatchSampling::uniform_subsets;
    o.seed = derive_seed(seed, 0x0971);
    o.stop_train_loss = c.optim.stop_train_loss;
    o.validate(n);
    const long per_epoch = o.steps_per_epoch(n);
    o.max_steps = c.optim.max_steps > 0 ? c.optim.max_steps : c.optim.epochs * per_epoch;
    o.snapshot_every = c.optim.snapshot_every > 0 ? c.optim.snapshot_every : per_epoch;

    const double lr = lr_override.value_or(c.optim.lr);
    if (c.optim.schedule == "constant") {
        o.schedule = Schedule::constant(lr);
    } else if (c.optim.schedule == "cosine") {
        o.schedule = Schedule::cosine(lr, std::min(c.optim.eta_min, lr), c.optim.t_max > 0 ? c.optim.t_max : std::max(1L, o.max_steps));
    } else {
        const double beta = c.optim.beta ? *c.optim.beta : initial_beta_hat(r.spec, r.w0, data.S, c);
        r.beta_hat = beta;
        o.schedule = Schedule::inverse_time(c.optim.c, beta);
    }
    return r;
}

inline RecorderOptions recorder_options(const ExperimentConfig& c, std::uint64_t seed, bool store_weights) {
    RecorderOptions ro;
    ro.n_sp = c.estimators.n_sp;
    ro.seed = derive_seed(seed, 0x7EC0);
    ro.store_weights = store_weights;
    return ro;
}

inline TrainResult run_training(const RunSetup& setup, const SeedData& data, const RecorderOptions& ro) {
    TrajectoryRecorder rec(setup.spec, data.S, data.S_prime, ro);
    return train(setup.spec, setup.w0, data.S, data.S_prime, setup.optim, std::ref(rec));
}

inline SubsetEstimatorConfig estimator_config(const ExperimentConfig& c, std::uint64_t seed) {
    SubsetEstimatorConfig e;
    e.k_samples = c.estimators.k_samples;
    e.n_sp = c.estimators.n_sp;
    e.seed = derive_seed(seed, 0xE57);
    e.distribution = c.estimators.distribution == "uniform_size" ? SubsetDistribution::uniform_size
                                                                 : SubsetDistribution::rademacher;
    return e;
}

inline ConstantOptions constant_options(const ExperimentConfig& c, const OptimConfig& o) {
    ConstantOptions co;
    co.batch_size = o.batch_size;
    co.m_batches = c.estimators.m_batches;
    co.max_estimator_snapshots = c.estimators.max_snapshots;
    co.beta_snapshots = c.estimators.beta_snapshots;
    co.power_iters = static_cast<int>(c.estimators.power_iters);
    co.power_tol = c.estimators.power_tol;
    co.gamma_quantile = c.estimators.gamma_quantile;
    return co;
}

struct CommandResult {
    CsvTable table;                    // the command's main table
    std::vector<std::string> files;    // every file written, in write order
};

namespace detail {

inline std::string seed_dir(const std::string& out, std::uint64_t seed) {
    const auto p = std::filesystem::path(out) / ("seed_" + std::to_string(seed));
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) fail(Errc::io_error, "cannot create '" + p.string() + "': " + ec.message());
    return p.string();
}

inline std::string join(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

inline void save(CommandResult& res, const CsvTable& t, const std::string& path) {
    t.save(path);
    res.files.push_back(path);
}

inline void plots(CommandResult& res, bool enabled, const CsvTable& t, const std::vector<PlotSpec>& specs,
                  const std::string& dir) {
    if (!enabled) return;
    for (auto& f : emit_svg_plots(t, specs, dir)) res.files.push_back(std::move(f));
}

inline std::vector<double> values(const std::vector<std::optional<double>>& xs) {
    std::vector<double> out;
    for (const auto& x : xs)
        if (x) out.push_back(*x);
    return out;
}

inline std::string cell(double v) { return std::isfinite(v) ? format_real(v) : std::string{}; }

/// Per-epoch view of the snapshots: the first snapshot of every epoch plus the last.
inline std::vector<std::size_t> epoch_rows(const std::vector<TrajectorySnapshot>& snaps) {
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < snaps.size(); ++k)
        if (rows.empty() || snaps[k].epoch != snaps[rows.back()].epoch) rows.push_back(k);
    if (!snaps.empty() && rows.back() != snaps.size() - 1) rows.push_back(snaps.size() - 1);
    return rows;
}

} // namespace detail

inline void prepare_output(const ExperimentConfig& c, CommandResult& res) {
    std::error_code ec;
    std::filesystem::create_directories(c.output_dir, ec);
    if (ec) fail(Errc::io_error, "cannot create '" + c.output_dir + "': " + ec.message());
    const auto path = detail::join(c.output_dir, "metadata.txt");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write '" + path + "'");
    out << emit_config(c);
    res.files.push_back(path);
}

// ---------------------------------------------------------------------------
// toy_table
// ---------------------------------------------------------------------------

inline CommandResult cmd_toy_table(const ExperimentConfig& c, bool plots = false) {
    CommandResult res{CsvTable({"seed", "gen_error", "ours_main", "ours_smooth", "ours_relaxed", "hardt_convex",
                                "hardt_nonconvex", "zhang", "bassily"}),
                      {}};
    prepare_output(c, res);
    const std::vector<std::string> methods = {"ours_main", "ours_smooth", "ours_relaxed", "hardt_convex",
                                              "hardt_nonconvex", "zhang", "bassily"};
    std::vector<std::vector<double>> cols(methods.size() + 1);
    for (std::uint64_t seed : c.seeds) {
        const SeedData data = make_data(c, seed, c.dataset.label_noise);
        const RunSetup setup = make_run(c, seed, data);
        TrainResult run;
        try {
            run = run_training(setup, data, recorder_options(c, seed, true));
        } catch (const DivergedError& e) {
            fail(Errc::diverged, "seed " + std::to_string(seed) + ": " + e.what());
        }
        const auto est = estimate_constants(setup.spec, run, data.S, data.S_prime, estimator_config(c, seed),
                                            constant_options(c, setup.optim));
        std::vector<BoundReport> reports;
        reports.push_back(bound_trajectory_main(est, run.snapshots));
        const bool inverse = setup.optim.schedule.kind() == ScheduleKind::inverse_time;
        if (inverse) {
            ConstantEstimates smooth_est = est;
            smooth_est.beta_hat = setup.optim.schedule.beta();
            reports.push_back(bound_trajectory_smooth(smooth_est, run.snapshots, setup.optim.schedule));
        }
        ConstantEstimates relaxed_est = est;
        relaxed_est.gamma = est.gamma_relaxed;
        relaxed_est.gamma_prime = est.gamma_prime_relaxed;
        reports.push_back(bound_trajectory_relaxed(relaxed_est, run.snapshots, est.T0, est.zeta));
        for (auto kind : {BaselineKind::hardt_convex, BaselineKind::hardt_nonconvex, BaselineKind::zhang,
                          BaselineKind::bassily}) {
            if (!inverse && (kind == BaselineKind::hardt_nonconvex || kind == BaselineKind::zhang)) continue;
            reports.push_back(bound_stability_baseline(kind, est, run.step_etas, setup.optim.schedule));
        }

        const auto dir = detail::seed_dir(c.output_dir, seed);
        const auto traj = trajectory_table(run.snapshots);
        detail::save(res, traj, detail::join(dir, "trajectory.csv"));
        detail::save(res, bounds_table(reports), detail::join(dir, "bounds.csv"));
        detail::plots(res, plots, traj, {{"t", {"F_S", "F_Sprime"}, "losses", "losses.svg"}, {"t", {"C_cum"}, "complexity", "complexity.svg"}}, dir);

        const auto& last = run.snapshots.back();
        std::vector<double> row{last.F_Sprime - last.F_S};
        for (const auto& m : methods) {
            double v = NAN;
            for (const auto& r : reports)
                if (r.method == m) v = r.value;
            row.push_back(v);
        }
        std::vector<std::string> cells{std::to_string(seed)};
        for (std::size_t i = 0; i < row.size(); ++i) {
            cols[i].push_back(row[i]);
            cells.push_back(detail::cell(row[i]));
        }
        res.table.add_row(cells);
    }
    std::vector<std::string> cells{"mean"};
    for (const auto& col : cols) cells.push_back(detail::cell(mean(col)));
    res.table.add_row(cells);
    detail::save(res, res.table, detail::join(c.output_dir, "toy_table.csv"));
    return res;
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------

struct TrackSummary {
    double correlation = 0.0;     // Pearson(F_S + C_cum, F_S') over epochs
    double early_ratio = 0.0;     // median |dC/dF_S| over the first quarter of epochs
    double late_ratio = 0.0;      // median |dC/dF_S| over the final quarter
};

inline std::pair<CsvTable, TrackSummary> track_series(const std::vector<TrajectorySnapshot>& snaps) {
    CsvTable t({"t", "epoch", "F_S", "F_Sprime", "C_cum", "F_S_plus_C", "dC_dF_S"});
    const auto rows = detail::epoch_rows(snaps);
    std::vector<double> a, b;
    std::vector<std::optional<double>> ratio;
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto& s = snaps[rows[j]];
        std::optional<double> r;
        if (j > 0) {
            const auto& p = snaps[rows[j - 1]];
            if (s.F_S != p.F_S) r = (s.C_cum - p.C_cum) / (s.F_S - p.F_S);
        }
        ratio.push_back(r);
        a.push_back(s.F_S + s.C_cum);
        b.push_back(s.F_Sprime);
        t.add_row({std::to_string(s.t), std::to_string(s.epoch), format_real(s.F_S), format_real(s.F_Sprime),
                   format_real(s.C_cum), format_real(s.F_S + s.C_cum), format_real(r)});
    }
    TrackSummary sum;
    if (a.size() >= 2) sum.correlation = pearson(a, b);
    const std::size_t q = std::max<std::size_t>(1, ratio.size() / 4);
    std::vector<double> early, late;
    for (std::size_t j = 0; j < ratio.size(); ++j) {
        if (!ratio[j]) continue;
        if (j < q) early.push_back(std::abs(*ratio[j]));
        if (j >= ratio.size() - q) late.push_back(std::abs(*ratio[j]));
    }
    sum.early_ratio = early.empty() ? NAN : median(early);
    sum.late_ratio = late.empty() ? NAN : median(late);
    return {t, sum};
}

inline CommandResult cmd_track(const ExperimentConfig& c, bool plots = false) {
    CommandResult res{CsvTable({"seed", "correlation", "early_abs_dC_dF_S", "late_abs_dC_dF_S"}), {}};
    prepare_output(c, res);
    for (std::uint64_t seed : c.seeds) {
        const SeedData data = make_data(c, seed, c.dataset.label_noise);
        const RunSetup setup = make_run(c, seed, data);
        const TrainResult run = run_training(setup, data, recorder_options(c, seed, false));
        const auto dir = detail::seed_dir(c.output_dir, seed);
        detail::save(res, trajectory_table(run.snapshots), detail::join(dir, "trajectory.csv"));
        auto [track, sum] = track_series(run.snapshots);
        detail::save(res, track, detail::join(dir, "track.csv"));
        detail::plots(res, plots, track,
                      {{"epoch", {"F_S_plus_C", "F_Sprime", "F_S"}, "F_S + C vs held-out loss", "track.svg"},
                       {"epoch", {"dC_dF_S"}, "dC/dF_S per epoch", "dC_dF_S.svg"}},
                      dir);
        res.table.add_row({std::to_string(seed), detail::cell(sum.correlation), detail::cell(sum.early_ratio),
                           detail::cell(sum.late_ratio)});
    }
    detail::save(res, res.table, detail::join(c.output_dir, "track_summary.csv"));
    return res;
}

// ---------------------------------------------------------------------------
// assumption
// ---------------------------------------------------------------------------

inline CommandResult cmd_assumption(const ExperimentConfig& c, bool plots = false) {
    CommandResult res{CsvTable({"seed", "dataset", "gamma", "early_median", "final_decile_max"}), {}};
    prepare_output(c, res);
    for (std::uint64_t seed : c.seeds) {
        const SeedData data = make_data(c, seed, c.dataset.label_noise);
        const RunSetup setup = make_run(c, seed, data);
        const TrainResult run = run_training(setup, data, recorder_options(c, seed, false));

        CsvTable series({"t", "epoch", "F_S", "gamma_tilde", "gamma_tilde_control"});
        std::vector<std::optional<double>> held, control;
        for (std::size_t k : detail::epoch_rows(run.snapshots)) {
            const auto& s = run.snapshots[k];
            // S' = S gives the same weights, so the control ratio is |grad F_S| / |grad F_S|.
            const auto ctl = gamma_tilde(s.grad_norm_S, s.grad_norm_S);
            held.push_back(s.gamma_tilde);
            control.push_back(ctl);
            series.add_row({std::to_string(s.t), std::to_string(s.epoch), format_real(s.F_S), format_real(s.gamma_tilde),
                            format_real(ctl)});
        }
        const auto dir = detail::seed_dir(c.output_dir, seed);
        detail::save(res, series, detail::join(dir, "assumption.csv"));
        detail::plots(res, plots, series, {{"epoch", {"gamma_tilde", "gamma_tilde_control"}, "gamma-tilde", "gamma_tilde.svg"}}, dir);

        for (const auto& [name, xs] : {std::pair{std::string("holdout"), held}, std::pair{std::string("control"), control}}) {
            const std::size_t q = std::max<std::size_t>(1, xs.size() / 4);
            const std::size_t dec = std::max<std::size_t>(1, xs.size() / 10);
            std::vector<double> early, all;
            double late = NAN;
            for (std::size_t j = 0; j < xs.size(); ++j) {
                if (!xs[j]) continue;
                all.push_back(*xs[j]);
                if (j < q) early.push_back(*xs[j]);
                if (j >= xs.size() - dec) late = std::isnan(late) ? *xs[j] : std::max(late, *xs[j]);
            }
            res.table.add_row({std::to_string(seed), name, detail::cell(all.empty() ? NAN : *std::max_element(all.begin(), all.end())),
                               detail::cell(early.empty() ? NAN : median(early)), detail::cell(late)});
        }
    }
    detail::save(res, res.table, detail::join(c.output_dir, "assumption_summary.csv"));
    return res;
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

struct SweepResult {
    std::string sweep_param;
    double value = 0.0;
    std::uint64_t seed = 0;
    std::optional<double> gen_error;
    std::optional<double> C_final;
    long stopped_at = 0;
    bool diverged = false;
};

inline std::vector<SweepResult> run_sweep(const ExperimentConfig& c) {
    const bool noise = c.experiment == "sweep_noise";
    require(noise || c.experiment == "sweep_lr", Errc::config_error, "run_sweep needs a sweep experiment");
    std::vector<SweepResult> out;
    for (double v : c.sweep_values) {
        for (std::uint64_t seed : c.seeds) {
            SweepResult r{noise ? "label_noise" : "lr", v, seed, std::nullopt, std::nullopt, 0, false};
            const SeedData data = make_data(c, seed, noise ? v : c.dataset.label_noise);
            const RunSetup setup = make_run(c, seed, data, noise ? std::nullopt : std::optional<double>(v));
            try {
                const TrainResult run = run_training(setup, data, recorder_options(c, seed, false));
                const auto& last = run.snapshots.back();
                r.gen_error = last.F_Sprime - last.F_S;
                r.C_final = last.C_cum;
                r.stopped_at = run.steps;
            } catch (const DivergedError& e) {
                r.diverged = true;
                r.stopped_at = e.step();
            }
            out.push_back(r);
        }
    }
    return out;
}

/// Rows per (value, seed), then one seed-mean row per value over the runs that did not diverge.
inline CsvTable sweep_table(const std::vector<SweepResult>& rows) {
    CsvTable t({"sweep_param", "value", "seed", "gen_error", "C_final", "stopped_at", "diverged"});
    for (const auto& r : rows)
        t.add_row({r.sweep_param, format_real(r.value), std::to_string(r.seed), format_real(r.gen_error),
                   format_real(r.C_final), std::to_string(r.stopped_at), r.diverged ? "1" : "0"});
    std::vector<double> seen;
    for (const auto& r : rows) {
        if (std::find(seen.begin(), seen.end(), r.value) != seen.end()) continue;
        seen.push_back(r.value);
        std::vector<double> g, cf, st;
        std::size_t div = 0;
        for (const auto& q : rows) {
            if (q.value != r.value) continue;
            if (q.diverged) {
                ++div;
                continue;
            }
            g.push_back(*q.gen_error);
            cf.push_back(*q.C_final);
            st.push_back(static_cast<double>(q.stopped_at));
        }
        t.add_row({r.sweep_param, format_real(r.value), "mean", g.empty() ? "" : format_real(mean(g)),
                   cf.empty() ? "" : format_real(mean(cf)), st.empty() ? "" : format_real(mean(st)), std::to_string(div)});
    }
    return t;
}

inline CsvTable sweep_means(const CsvTable& sweep) {
    CsvTable m(sweep.header());
    const std::size_t seed_col = sweep.column("seed");
    for (const auto& row : sweep.rows())
        if (row[seed_col] == "mean") m.add_row(row);
    return m;
}

inline CommandResult cmd_sweep(const ExperimentConfig& c, bool plots = false) {
    CommandResult res{sweep_table({}), {}};
    prepare_output(c, res);
    res.table = sweep_table(run_sweep(c));
    detail::save(res, res.table, detail::join(c.output_dir, "sweep.csv"));
    detail::plots(res, plots, sweep_means(res.table),
                  {{"value", {"gen_error"}, "seed-mean generalization error", "sweep_gen_error.svg"},
                   {"value", {"C_final"}, "seed-mean final complexity", "sweep_C_final.svg"}},
                  c.output_dir);
    return res;
}

// ---------------------------------------------------------------------------
// eos
// ---------------------------------------------------------------------------

inline CommandResult cmd_eos(const ExperimentConfig& c, bool plots = false) {
    CommandResult res{CsvTable({"seed", "epochs", "diverged", "diverged_at", "mean_rp", "mean_trp", "max_sharpness", "threshold"}), {}};
    prepare_output(c, res);
    for (std::uint64_t seed : c.seeds) {
        const SeedData data = make_data(c, seed, c.dataset.label_noise);
        const RunSetup setup = make_run(c, seed, data);
        const std::size_t n = data.S.size();
        const double steps_per_record = static_cast<double>(setup.optim.snapshot_every);

        std::vector<TrajectorySnapshot> snaps;
        std::vector<double> sharp;
        TrajectoryRecorder inner(setup.spec, data.S, data.S_prime, recorder_options(c, seed, false));
        const Recorder rec = [&](const RecordPoint& pt) {
            auto s = inner(pt);
            snaps.push_back(s);
            sharp.push_back(hvp_top_eig(setup.spec, pt.w, data.S, static_cast<int>(c.eos_power_iters), c.eos_power_tol,
                                        derive_seed(seed, 0x5A4F + static_cast<std::uint64_t>(pt.t)))
                                .value);
            return s;
        };
        std::optional<long> diverged_at;
        try {
            train(setup.spec, setup.w0, data.S, data.S_prime, setup.optim, rec);
        } catch (const DivergedError& e) {
            diverged_at = e.step();
        }

        // GD compares sharpness with 2/eta; SGD with 2/eta_eff, eta_eff = (n/b) eta.
        const double eff = setup.optim.mode == OptimMode::gd
                               ? 1.0
                               : static_cast<double>(n) / static_cast<double>(setup.optim.batch_size);
        CsvTable series({"t", "epoch", "eta", "eta_effective", "F_S", "F_Sprime", "rp", "trp", "sharpness", "threshold"});
        std::vector<double> rps, trps;
        double max_sharp = 0.0, threshold = NAN;
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            const auto& s = snaps[k];
            const double eta_eff = s.eta_t * (setup.optim.mode == OptimMode::gd ? steps_per_record : eff);
            const double thr = 2.0 / eta_eff;
            if (k == 0) threshold = thr;
            if (s.rp) rps.push_back(*s.rp);
            if (s.trp) trps.push_back(*s.trp);
            max_sharp = std::max(max_sharp, sharp[k]);
            series.add_row({std::to_string(s.t), std::to_string(s.epoch), format_real(s.eta_t), format_real(eta_eff),
                            format_real(s.F_S), format_real(s.F_Sprime), format_real(s.rp), format_real(s.trp),
                            format_real(sharp[k]), format_real(thr)});
        }
        const auto dir = detail::seed_dir(c.output_dir, seed);
        detail::save(res, series, detail::join(dir, "eos.csv"));
        if (rps.size() >= 1)
            detail::plots(res, plots, series,
                          {{"epoch", {"rp", "trp"}, "relative progress ratios", "rp_trp.svg"},
                           {"epoch", {"sharpness", "threshold"}, "sharpness vs 2/eta", "sharpness.svg"}},
                          dir);
        res.table.add_row({std::to_string(seed), std::to_string(snaps.empty() ? 0 : snaps.back().epoch),
                           diverged_at ? "1" : "0", diverged_at ? std::to_string(*diverged_at) : "",
                           detail::cell(rps.empty() ? NAN : mean(rps)), detail::cell(trps.empty() ? NAN : mean(trps)),
                           detail::cell(max_sharp), detail::cell(threshold)});
    }
    detail::save(res, res.table, detail::join(c.output_dir, "eos_summary.csv"));
    return res;
}

inline CommandResult run_experiment(const ExperimentConfig& c, bool plots = false) {
    if (c.experiment == "toy_table") return cmd_toy_table(c, plots);
    if (c.experiment == "track") return cmd_track(c, plots);
    if (c.experiment == "assumption") return cmd_assumption(c, plots);
    if (c.experiment == "sweep_noise" || c.experiment == "sweep_lr") return cmd_sweep(c, plots);
    if (c.experiment == "eos") return cmd_eos(c, plots);
    fail(Errc::config_error, "unknown experiment '" + c.experiment + "'");
}

} // namespace trajbound::harness
