#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "trajbound/bounds.hpp"

using namespace trajbound;

namespace {

TrajectorySnapshot snap(long t, double C = 0.0, double delta = 0.0) {
    TrajectorySnapshot s;
    s.t = t;
    s.C_cum = C;
    s.delta_t = delta;
    return s;
}

ConstantEstimates unit_constants(std::size_t n = 100) {
    ConstantEstimates c;
    c.gamma = 1.0;
    c.gamma_prime = 1.0;
    c.V_m = 1.0;
    c.L_hat = 1.0;
    c.beta_hat = 1.0;
    c.M2_sq = 1.0;
    c.M4_fourth = 1.0;
    c.eta_m = 0.1;
    c.n = n;
    return c;
}

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return Errc::invalid_argument;
}

struct ToyRun {
    ToyData toy;
    ModelSpec spec;
    TrainResult run;
};

ToyRun toy_run(OptimConfig cfg, std::size_t n = 60, std::size_t d = 5, std::uint64_t seed = 3) {
    ToyRun r{generate_toy({n, 200, d, seed}), ModelSpec::linear(d), {}};
    TrajectoryRecorder rec(r.spec, r.toy.train, r.toy.test);
    r.run = train(r.spec, Vector(d, 0.0), r.toy.train, r.toy.test, cfg, std::ref(rec));
    return r;
}

SubsetEstimatorConfig small_estimator() {
    SubsetEstimatorConfig e;
    e.k_samples = 256;
    e.seed = 9;
    return e;
}

OptimConfig gd(double lr, long steps, long every = 1) {
    OptimConfig cfg;
    cfg.mode = OptimMode::gd;
    cfg.schedule = Schedule::constant(lr);
    cfg.max_steps = steps;
    cfg.snapshot_every = every;
    return cfg;
}

} // namespace

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

TEST(LinearBeta, TwoByTwo) {
    const Dataset d{Matrix(2, 2, {1, 0, 0, 2}), {0, 0}, "d"};
    EXPECT_NEAR(linear_beta_hat(d), 2.0, 1e-14);
    const auto ev = oracle::jacobi_eigenvalues({{0.5, 0.0}, {0.0, 2.0}});
    EXPECT_NEAR(linear_beta_hat(d), *std::max_element(ev.begin(), ev.end()), 1e-14);
}

TEST(LinearBeta, MatchesJacobiOnRandomData) {
    RngStream r(4, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 3 + trial, d = 2 + trial % 4;
        Dataset ds{Matrix(n, d), Vector(n, 0.0), "r"};
        oracle::Mat H(d, oracle::Vec(d, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = r.normal();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b) H[a][b] += ds.features(i, a) * ds.features(i, b) / n;
        const auto ev = oracle::jacobi_eigenvalues(H);
        EXPECT_NEAR(linear_beta_hat(ds), *std::max_element(ev.begin(), ev.end()), 1e-10);
    }
}

TEST(LinearBeta, HvpPowerIterationAgrees) {
    const auto toy = generate_toy({40, 1, 4, 2});
    const auto spec = ModelSpec::linear(4);
    const auto est = hvp_top_eig(spec, Vector{0.1, -0.2, 0.3, 0.0}, toy.train, 5000, 1e-12);
    EXPECT_NEAR(est.value, linear_beta_hat(toy.train), 1e-5 * linear_beta_hat(toy.train));
}

TEST(EstimateConstants, ConstantScheduleEtaM) {
    auto cfg = gd(0.05, 20, 5);
    const auto r = toy_run(cfg);
    const auto c = estimate_constants(r.spec, r.run, r.toy.train, r.toy.test, small_estimator());
    EXPECT_EQ(c.eta_m, 0.05);
    EXPECT_EQ(c.T, 20);
    EXPECT_EQ(c.n, 60u);
}

TEST(EstimateConstants, FullBatchM2IsMaxGradNormSquared) {
    const auto r = toy_run(gd(0.1, 30, 3));
    ConstantOptions opts;
    opts.batch_size = 60;
    const auto c = estimate_constants(r.spec, r.run, r.toy.train, r.toy.test, small_estimator(), opts);
    double m = 0.0;
    for (const auto& s : r.run.snapshots) m = std::max(m, s.grad_norm_S * s.grad_norm_S);
    EXPECT_NEAR(c.M2_sq, m, 1e-12 * m);
    EXPECT_NEAR(c.M4_fourth, m * m, 1e-12 * m * m);
}

TEST(EstimateConstants, LipschitzIsMaxPerSampleNorm) {
    const auto r = toy_run(gd(0.1, 10, 5));
    const auto c = estimate_constants(r.spec, r.run, r.toy.train, r.toy.test, small_estimator());
    double L = 0.0;
    for (const auto& s : r.run.snapshots) {
        const auto ps = per_sample_gradients(r.spec, s.w, r.toy.train);
        for (std::size_t i = 0; i < r.toy.train.size(); ++i) L = std::max(L, norm(ps.grads.row(i)));
    }
    EXPECT_EQ(c.L_hat, L);
    EXPECT_NEAR(c.beta_hat, linear_beta_hat(r.toy.train), 1e-14);
}

TEST(EstimateConstants, GammaPrimeDominatesGammaAndVPositive) {
    OptimConfig cfg;
    cfg.batch_size = 10;
    cfg.max_steps = 60;
    cfg.snapshot_every = 6;
    const auto r = toy_run(cfg);
    const auto c = estimate_constants(r.spec, r.run, r.toy.train, r.toy.test, small_estimator());
    EXPECT_GE(c.gamma_prime, c.gamma);
    EXPECT_GE(c.subset_ratio, 1.0);
    EXPECT_FALSE(c.V_trivial);
    EXPECT_GT(c.V_m, 0.0);
    double g = 0.0;
    for (const auto& s : r.run.snapshots)
        if (s.gamma_tilde) g = std::max(g, *s.gamma_tilde);
    EXPECT_EQ(c.gamma, g);
    EXPECT_LE(c.T0, c.T);
    EXPECT_GE(c.zeta, 0.0);
}

TEST(EstimateConstants, MlpBetaFiniteAndPositive) {
    const auto toy = generate_toy({30, 30, 4, 1});
    const auto spec = ModelSpec::mlp({4, 6, 1}, LossKind::squared);
    OptimConfig cfg = gd(0.05, 10, 5);
    TrajectoryRecorder rec(spec, toy.train, toy.test);
    RngStream ir(1, 0);
    const auto run = train(spec, init_params(spec, ir), toy.train, toy.test, cfg, std::ref(rec));
    ConstantOptions opts;
    opts.beta_snapshots = 2;
    const auto c = estimate_constants(spec, run, toy.train, toy.test, small_estimator(), opts);
    EXPECT_TRUE(std::isfinite(c.beta_hat));
    EXPECT_GT(c.beta_hat, 0.0);
}

TEST(EstimateConstants, MissingWeightsRejected) {
    const auto toy = generate_toy({20, 20, 3, 1});
    const auto spec = ModelSpec::linear(3);
    RecorderOptions ro;
    ro.store_weights = false;
    TrajectoryRecorder rec(spec, toy.train, toy.test, ro);
    const auto run = train(spec, Vector(3, 0.0), toy.train, toy.test, gd(0.1, 5), std::ref(rec));
    EXPECT_EQ(code_of([&] { estimate_constants(spec, run, toy.train, toy.test, small_estimator()); }),
              Errc::incomplete_trajectory);
    TrainResult empty;
    EXPECT_EQ(code_of([&] { estimate_constants(spec, empty, toy.train, toy.test, small_estimator()); }),
              Errc::invalid_argument);
}

TEST(EstimateConstants, DeterministicForSeed) {
    OptimConfig cfg;
    cfg.batch_size = 10;
    cfg.max_steps = 30;
    cfg.snapshot_every = 10;
    const auto r = toy_run(cfg);
    const auto a = estimate_constants(r.spec, r.run, r.toy.train, r.toy.test, small_estimator());
    const auto b = estimate_constants(r.spec, r.run, r.toy.train, r.toy.test, small_estimator());
    EXPECT_EQ(a.V_m, b.V_m);
    EXPECT_EQ(a.M2_sq, b.M2_sq);
    EXPECT_EQ(a.gamma_prime, b.gamma_prime);
}

// ---------------------------------------------------------------------------
// Quantile and relaxed parameters
// ---------------------------------------------------------------------------

TEST(Quantile, Interpolates) {
    EXPECT_EQ(quantile({4, 1, 3, 2}, 0.0), 1.0);
    EXPECT_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({5}, 0.3), 5.0);
    EXPECT_THROW(quantile({}, 0.5), Error);
    EXPECT_THROW(quantile({1}, 1.5), Error);
}

TEST(RelaxedParameters, FromHandSeries) {
    std::vector<TrajectorySnapshot> s;
    const double gt[] = {1.0, 1.2, 2.0, 3.0};
    for (int k = 0; k < 4; ++k) {
        auto x = snap(k * 10);
        x.gamma_tilde = gt[k];
        x.grad_norm_S = 1.0;
        x.grad_norm_Sprime = gt[k];
        s.push_back(x);
    }
    const auto p = relaxed_parameters(s, 1.0, 0.5);
    EXPECT_DOUBLE_EQ(p.gamma_relaxed, 1.2);
    EXPECT_EQ(p.T0, 20);
    EXPECT_DOUBLE_EQ(p.zeta, 1.8);
}

TEST(RelaxedParameters, NoGammaTildeFallsBack) {
    std::vector<TrajectorySnapshot> s{snap(0), snap(5)};
    const auto p = relaxed_parameters(s, 0.95, 0.25);
    EXPECT_EQ(p.gamma_relaxed, 1.0);
    EXPECT_EQ(p.T0, 5);
    EXPECT_EQ(p.zeta, 0.0);
    EXPECT_THROW(relaxed_parameters(s, 0.95, 0.0), Error);
}

// ---------------------------------------------------------------------------
// Main bound
// ---------------------------------------------------------------------------

TEST(MainBound, ZeroStepsIsZero) {
    const auto r = bound_trajectory_main(unit_constants(), {snap(0)});
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.method, "ours_main");
    ASSERT_TRUE(r.remainder_scale);
    EXPECT_EQ(*r.remainder_scale, 0.1);
}

TEST(MainBound, HandArithmetic) {
    EXPECT_DOUBLE_EQ(bound_trajectory_main(unit_constants(), {snap(0), snap(10, 0.04)}).value, 0.04);
    auto c = unit_constants();
    c.gamma_prime = 1.5;
    c.V_m = 2.0;
    EXPECT_DOUBLE_EQ(bound_trajectory_main(c, {snap(0), snap(10, 0.04)}).value, 0.12);
}

TEST(MainBound, RemainderNeverAdded) {
    auto c = unit_constants();
    c.eta_m = 1e6;
    EXPECT_DOUBLE_EQ(bound_trajectory_main(c, {snap(0), snap(1, 0.5)}).value, 0.5);
}

TEST(MainBound, Errors) {
    auto c = unit_constants();
    EXPECT_EQ(code_of([&] { bound_trajectory_main(c, {}); }), Errc::incomplete_trajectory);
    EXPECT_EQ(code_of([&] { bound_trajectory_main(c, {snap(1)}); }), Errc::incomplete_trajectory);
    EXPECT_EQ(code_of([&] { bound_trajectory_main(c, {snap(0), snap(3), snap(3)}); }), Errc::incomplete_trajectory);
    c.V_trivial = true;
    EXPECT_EQ(code_of([&] { bound_trajectory_main(c, {snap(0)}); }), Errc::invalid_argument);
    c = unit_constants();
    c.V_m = kMissing;
    try {
        bound_trajectory_main(c, {snap(0)});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("V_m"), std::string::npos);
    }
}

TEST(MainBound, CadenceRefinementInvariant) {
    // Left-sum error is first order in eta * cadence.
    const auto fine = toy_run(gd(0.001, 400, 1), 50, 5, 4);
    const auto coarse = toy_run(gd(0.001, 400, 5), 50, 5, 4);
    const auto c = estimate_constants(fine.spec, fine.run, fine.toy.train, fine.toy.test, small_estimator());
    const double a = bound_trajectory_main(c, fine.run.snapshots).value;
    const double b = bound_trajectory_main(c, coarse.run.snapshots).value;
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(b, a, 1e-3 * a);
}

TEST(MainBound, GdAndFullBatchSgdAgree) {
    OptimConfig sgd = gd(0.05, 50, 5);
    sgd.mode = OptimMode::sgd;
    sgd.batch_size = 60;
    const auto a = toy_run(gd(0.05, 50, 5));
    const auto b = toy_run(sgd);
    const auto c = unit_constants(60);
    EXPECT_EQ(bound_trajectory_main(c, a.run.snapshots).value, bound_trajectory_main(c, b.run.snapshots).value);
}

TEST(MainBound, MonotoneInDecreasingSteps) {
    const auto r = toy_run(gd(0.05, 200, 10));
    const auto c = unit_constants(60);
    std::vector<TrajectorySnapshot> prefix;
    double prev = -1.0;
    for (const auto& s : r.run.snapshots) {
        prefix.push_back(s);
        if (prefix.size() > 1) {
            ASSERT_LT(s.F_S, prefix[prefix.size() - 2].F_S);
        }
        const double v = bound_trajectory_main(c, prefix).value;
        EXPECT_GE(v, prev);
        prev = v;
    }
}

// ---------------------------------------------------------------------------
// Smooth bound
// ---------------------------------------------------------------------------

TEST(SmoothBound, ZeroCEqualsMain) {
    const std::vector<TrajectorySnapshot> s{snap(0), snap(10, 0.3)};
    EXPECT_EQ(bound_trajectory_smooth(unit_constants(), s, 0.0).value, bound_trajectory_main(unit_constants(), s).value);
}

TEST(SmoothBound, HandTermThree) {
    auto c = unit_constants();
    c.beta_hat = 2.0;
    c.M2_sq = 4.0;
    c.M4_fourth = 0.0;
    const std::vector<TrajectorySnapshot> s{snap(0), snap(1)};
    const auto r = bound_trajectory_smooth(c, s, 1.0);
    EXPECT_DOUBLE_EQ(r.value, 4.0);
}

TEST(SmoothBound, HandTermTwo) {
    auto c = unit_constants(4);
    c.beta_hat = 1.0;
    c.M2_sq = 0.0;
    c.M4_fourth = 16.0;
    auto s0 = snap(0);
    s0.grad_norm_S = 1.0;
    s0.trace_sigma = 3.0;
    const auto r = bound_trajectory_smooth(c, {s0, snap(1)}, 1.0);
    // smooth_sum = (1 + 3) / (4 * 1 * 1) = 1, term2 = 2 * 1 * 4 * 1
    EXPECT_DOUBLE_EQ(r.aggregate("smooth_sum"), 1.0);
    EXPECT_DOUBLE_EQ(r.value, 8.0);
}

TEST(SmoothBound, ToyTermsPositive) {
    const auto toy = generate_toy({100, 200, 5, 2});
    const auto spec = ModelSpec::linear(5);
    const double beta = linear_beta_hat(toy.train);
    OptimConfig cfg;
    cfg.batch_size = 10;
    cfg.schedule = Schedule::inverse_time(1.0, beta);
    cfg.max_steps = 200;
    cfg.snapshot_every = 10;
    TrajectoryRecorder rec(spec, toy.train, toy.test);
    const auto run = train(spec, Vector(5, 0.0), toy.train, toy.test, cfg, std::ref(rec));
    ConstantOptions opts;
    opts.m_batches = 16;
    const auto c = estimate_constants(spec, run, toy.train, toy.test, small_estimator(), opts);
    const auto main = bound_trajectory_main(c, run.snapshots);
    const auto smooth = bound_trajectory_smooth(c, run.snapshots, cfg.schedule);
    EXPECT_TRUE(std::isfinite(smooth.value));
    EXPECT_GT(smooth.aggregate("smooth_sum"), 0.0);
    EXPECT_GT(smooth.value, main.value);
    EXPECT_GT(smooth.value - main.value, 2.0 * c.M2_sq / c.beta_hat * (1.0 - 1e-12));
}

TEST(SmoothBound, ScheduleMismatchRejected) {
    auto c = unit_constants();
    c.beta_hat = 2.0;
    const std::vector<TrajectorySnapshot> s{snap(0), snap(1)};
    EXPECT_EQ(code_of([&] { bound_trajectory_smooth(c, s, Schedule::inverse_time(1.0, 3.0)); }),
              Errc::invalid_argument);
    EXPECT_EQ(code_of([&] { bound_trajectory_smooth(c, s, Schedule::constant(0.1)); }), Errc::invalid_argument);
    EXPECT_NO_THROW(bound_trajectory_smooth(c, s, Schedule::inverse_time(1.0, 2.0)));
    EXPECT_THROW(bound_trajectory_smooth(c, s, -1.0), Error);
}

// ---------------------------------------------------------------------------
// Relaxed bound
// ---------------------------------------------------------------------------

TEST(RelaxedBound, ZeroZetaEqualsMain) {
    const std::vector<TrajectorySnapshot> s{snap(0, 0, 0.2), snap(1, 0.1, 0.2), snap(2, 0.3, 0.2)};
    EXPECT_EQ(bound_trajectory_relaxed(unit_constants(), s, 0, 0.0).value,
              bound_trajectory_main(unit_constants(), s).value);
}

TEST(RelaxedBound, TwoTailSteps) {
    const std::vector<TrajectorySnapshot> s{snap(0, 0, 0.2), snap(1, 0.1, 0.2), snap(2, 0.3, 0.2)};
    const auto r = bound_trajectory_relaxed(unit_constants(), s, 1, 0.1);
    EXPECT_NEAR(r.value - 0.3, 0.02, 1e-15);
    EXPECT_EQ(r.constants.T0, 1);
    EXPECT_EQ(r.constants.zeta, 0.1);
}

TEST(RelaxedBound, T0AtEndCoversFinalStepOnly) {
    const std::vector<TrajectorySnapshot> s{snap(0, 0, 0.2), snap(1, 0.1, 0.2), snap(2, 0.3, 0.4)};
    EXPECT_NEAR(bound_trajectory_relaxed(unit_constants(), s, 2, 1.0).value - 0.3, 0.2, 1e-15);
}

TEST(RelaxedBound, Errors) {
    const std::vector<TrajectorySnapshot> s{snap(0), snap(2)};
    EXPECT_THROW(bound_trajectory_relaxed(unit_constants(), s, 3, 0.1), Error);
    EXPECT_THROW(bound_trajectory_relaxed(unit_constants(), s, -1, 0.1), Error);
    EXPECT_THROW(bound_trajectory_relaxed(unit_constants(), s, 0, -0.1), Error);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

TEST(Baselines, HardtConvex) {
    const std::vector<double> etas(10, 0.1);
    EXPECT_DOUBLE_EQ(bound_stability_baseline(BaselineKind::hardt_convex, unit_constants(), etas).value, 0.02);
}

TEST(Baselines, Zhang) {
    const std::vector<double> etas(100, 0.01);
    EXPECT_DOUBLE_EQ(bound_stability_baseline(BaselineKind::zhang, unit_constants(), etas, 1.0).value, 0.16);
}

TEST(Baselines, HardtNonconvex) {
    auto c = unit_constants(101);
    const std::vector<double> etas(100, 0.01);
    // (1 + 1) / 100 * 2^(1/2) * 100^(1/2)
    EXPECT_NEAR(bound_stability_baseline(BaselineKind::hardt_nonconvex, c, etas, 1.0).value, 0.2 * std::sqrt(2.0),
                1e-14);
    c.beta_hat = 2.0;
    c.L_hat = 3.0;
    // c_h = 0.5, beta c_h = 1: (1 + 1) / 100 * (2 * 0.5 * 9)^(1/2) * 100^(1/2)
    EXPECT_NEAR(bound_stability_baseline(BaselineKind::hardt_nonconvex, c, etas, 1.0).value, 0.2 * 3.0, 1e-14);
}

TEST(Baselines, BassilyDropsFinalStep) {
    const std::vector<double> etas{0.1, 0.1, 0.7};
    const double expect = 2.0 * std::sqrt(0.02) + 4.0 / 100.0 * 0.2;
    EXPECT_NEAR(bound_stability_baseline(BaselineKind::bassily, unit_constants(), etas).value, expect, 1e-15);
}

TEST(Baselines, MissingConstantsNamed) {
    auto c = unit_constants();
    c.L_hat = kMissing;
    const std::vector<double> etas(5, 0.1);
    try {
        bound_stability_baseline(BaselineKind::hardt_convex, c, etas);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
        EXPECT_NE(std::string(e.what()).find("L_hat"), std::string::npos);
    }
    c = unit_constants();
    c.beta_hat = kMissing;
    EXPECT_THROW(bound_stability_baseline(BaselineKind::hardt_nonconvex, c, etas, 1.0), Error);
    EXPECT_THROW(bound_stability_baseline(BaselineKind::zhang, unit_constants(), etas), Error);
    EXPECT_THROW(bound_stability_baseline(BaselineKind::zhang, unit_constants(), etas, Schedule::constant(0.1)), Error);
    EXPECT_NO_THROW(
        bound_stability_baseline(BaselineKind::zhang, unit_constants(), etas, Schedule::inverse_time(1.0, 1.0)));
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

TEST(Reports, ReEvaluationIsBitwise) {
    const auto toy = generate_toy({60, 200, 5, 5});
    const auto spec = ModelSpec::linear(5);
    const double beta = linear_beta_hat(toy.train);
    OptimConfig cfg;
    cfg.batch_size = 6;
    cfg.schedule = Schedule::inverse_time(1.0, beta);
    cfg.max_steps = 100;
    cfg.snapshot_every = 10;
    TrajectoryRecorder rec(spec, toy.train, toy.test);
    const auto run = train(spec, Vector(5, 0.0), toy.train, toy.test, cfg, std::ref(rec));
    const auto c = estimate_constants(spec, run, toy.train, toy.test, small_estimator());
    std::vector<BoundReport> reps{bound_trajectory_main(c, run.snapshots),
                                  bound_trajectory_smooth(c, run.snapshots, cfg.schedule),
                                  bound_trajectory_relaxed(c, run.snapshots, c.T0, c.zeta)};
    for (auto k : {BaselineKind::hardt_convex, BaselineKind::hardt_nonconvex, BaselineKind::zhang, BaselineKind::bassily})
        reps.push_back(bound_stability_baseline(k, c, run.step_etas, cfg.schedule));
    for (const auto& r : reps) {
        EXPECT_TRUE(std::isfinite(r.value)) << r.method;
        EXPECT_EQ(evaluate_bound(r), r.value) << r.method;
        EXPECT_FALSE(r.formula.empty());
    }

    const auto table = bounds_table(reps);
    EXPECT_EQ(table.rows().size(), reps.size());
    EXPECT_EQ(table.header().front(), "method");
    const auto values = table.numbers("value");
    for (std::size_t i = 0; i < reps.size(); ++i) ASSERT_TRUE(values[i]);
    const auto rem = table.numbers("remainder_scale");
    EXPECT_TRUE(rem[0]);
    EXPECT_FALSE(rem[3]);
}

TEST(Reports, UnknownMethodAndAggregate) {
    BoundReport r;
    r.method = "nope";
    r.constants = unit_constants();
    EXPECT_THROW(evaluate_bound(r), Error);
    EXPECT_THROW(r.aggregate("C_T"), Error);
}
