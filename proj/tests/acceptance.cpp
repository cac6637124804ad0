#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "trajbound/trajbound.hpp"

using namespace trajbound;
using namespace trajbound::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const fs::path kWork = fs::temp_directory_path() / "trajbound_acceptance";

std::string preset(const std::string& name) { return (fs::path(TRAJBOUND_SOURCE_DIR) / "configs" / (name + ".cfg")).string(); }

CommandResult run_preset(const std::string& name, const std::string& tag) {
    auto c = parse_config(preset(name), name);
    c.output_dir = (kWork / tag).string();
    fs::remove_all(c.output_dir);
    return run_experiment(c);
}

oracle::Mat rows_of(const Matrix& m) {
    oracle::Mat out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i].assign(m.row(i).begin(), m.row(i).end());
    return out;
}

Dataset random_data(RngStream& r, std::size_t n, std::size_t d, std::size_t classes) {
    Dataset data{Matrix(n, d), Vector(n), "rand"};
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : data.features.row(i)) v = r.normal();
        data.labels[i] = classes ? static_cast<double>(r.index(classes)) : r.normal();
    }
    return data;
}

Vector random_vector(RngStream& r, std::size_t d) {
    Vector v(d);
    for (double& x : v) x = r.normal();
    return v;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream o;
    o << in.rdbuf();
    return o.str();
}

Dataset quadratic(double lambda) { return Dataset{Matrix(1, 1, {std::sqrt(lambda)}), {0.0}, "quad"}; }

// ---------------------------------------------------------------------------

Outcome toy_comparison() {
    const auto t0 = Clock::now();
    const auto res = run_preset("toy_table", "toy_table");
    const double secs = seconds_since(t0);
    const auto& t = res.table;
    const std::size_t last = t.rows().size() - 1;
    if (t.rows()[last][t.column("seed")] != "mean") return {false, "no seed-mean row"};
    const double gen = *t.numbers("gen_error")[last], ours = *t.numbers("ours_main")[last];
    const double hardt = *t.numbers("hardt_nonconvex")[last], zhang = *t.numbers("zhang")[last];
    const bool ok = gen <= ours && ours <= hardt && zhang / ours > 100.0 && secs < 30.0;
    return {ok, "gen " + fmt(gen) + " <= ours " + fmt(ours) + " <= hardt " + fmt(hardt) + ", zhang/ours " +
                    fmt(zhang / ours) + ", " + fmt(secs) + " s"};
}

Outcome batch_noise_oracle() {
    const auto t0 = Clock::now();
    RngStream r(2024, 0);
    const std::size_t n = 6, d = 4;
    const auto data = random_data(r, n, d, 0);
    const auto spec = ModelSpec::linear(d);
    const auto g = per_sample_gradients(spec, random_vector(r, d), data).grads;
    const double tr = trace_sigma_from_grads(g).trace;
    double worst_mean = 0.0, worst_trace = 0.0;
    for (std::size_t b = 1; b <= 3; ++b) {
        const auto m = oracle::batch_noise_moments(rows_of(g), b);
        for (double v : m.mean) worst_mean = std::max(worst_mean, std::abs(v));
        worst_trace = std::max(worst_trace, std::abs(m.trace - noise_cov_scale(n, b) * tr));
    }
    const double secs = seconds_since(t0);
    return {worst_mean <= 1e-12 && worst_trace <= 1e-10 && secs < 1.0,
            "max |mean eps| " + fmt(worst_mean) + ", max trace error " + fmt(worst_trace) + ", " + fmt(secs) + " s"};
}

Outcome trace_identity() {
    RngStream r(31, 0);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const std::size_t n = 2 + r.index(19), d = 1 + r.index(10);
        const bool mlp = k % 2 == 1;
        const auto spec = mlp ? ModelSpec::mlp({d, 1 + r.index(4), 1}) : ModelSpec::linear(d);
        const auto data = random_data(r, n, d, 0);
        RngStream ri(k, 1);
        const auto w = mlp ? init_params(spec, ri) : random_vector(r, d);
        RngStream unused(0, 0);
        const double lib = grad_trace_sigma(spec, w, data, n, unused).trace;
        const double dense = oracle::dense_cov_trace(rows_of(per_sample_gradients(spec, w, data).grads));
        worst = std::max(worst, std::abs(lib - dense));
    }
    return {worst <= 1e-10, "max |difference| " + fmt(worst) + " over 50 cases"};
}

Outcome gradient_correctness() {
    RngStream r(99, 0);
    auto rel = [](const ModelSpec& spec, const Vector& w, std::span<const double> x, double y) {
        const auto g = grad_per_sample(spec, w, x, y);
        const auto fd = central_diff_gradient([&](std::span<const double> v) { return loss_per_sample(spec, v, x, y); },
                                              w, 1e-5);
        return norm(subtract(g, fd)) / std::max(1.0, norm(g));
    };
    double worst_lin = 0.0, worst_mlp = 0.0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t d = 1 + r.index(8);
        const auto x = random_vector(r, d);
        worst_lin = std::max(worst_lin, rel(ModelSpec::linear(d), random_vector(r, d), x, r.normal()));
        const bool ce = k % 2 == 1;
        const std::size_t out = ce ? 2 + r.index(3) : 1;
        const auto spec = ModelSpec::mlp({d, 1 + r.index(6), out}, ce ? LossKind::cross_entropy : LossKind::squared);
        RngStream ri(k, 2);
        worst_mlp = std::max(worst_mlp, rel(spec, init_params(spec, ri), x, ce ? static_cast<double>(r.index(out)) : r.normal()));
    }
    double worst_sym = 0.0;
    for (int k = 0; k < 20; ++k) {
        const std::size_t d = 2 + r.index(6);
        const auto spec = ModelSpec::linear(d);
        const auto data = random_data(r, 5 + r.index(20), d, 0);
        const auto w = random_vector(r, d), u = random_vector(r, d), v = random_vector(r, d);
        worst_sym = std::max(worst_sym, std::abs(dot(u, hessian_vector_product(spec, w, data, v)) -
                                                 dot(v, hessian_vector_product(spec, w, data, u))));
    }
    return {worst_lin <= 1e-5 && worst_mlp <= 1e-5 && worst_sym <= 1e-6,
            "linear " + fmt(worst_lin) + ", mlp " + fmt(worst_mlp) + " (relative), hvp asymmetry " + fmt(worst_sym)};
}

Outcome telescoping() {
    double worst = 0.0;
    for (int kind = 0; kind < 2; ++kind) {
        const auto toy = generate_toy({50, 200, 6, 7});
        const auto spec = kind ? ModelSpec::mlp({6, 8, 1}) : ModelSpec::linear(6);
        RngStream ri(7, 3);
        OptimConfig cfg;
        cfg.batch_size = 5;
        cfg.max_steps = 150;
        cfg.seed = 7;
        RecorderOptions ro;
        ro.store_gradients = true;
        TrajectoryRecorder rec(spec, toy.train, toy.test, ro);
        const auto run = train(spec, init_params(spec, ri), toy.train, toy.test, cfg, std::ref(rec));
        const auto dec = gen_decomposition(run.snapshots);
        double sum = dec.initial_gap;
        for (double v : dec.per_step_ii) sum += v;
        worst = std::max(worst, std::abs(sum - dec.final_gap));
        worst = std::max(worst, std::abs(dec.initial_gap + dec.gen_lin_hat + dec.gen_nl_hat - dec.final_gap));
    }
    return {worst <= 1e-10, "max reconstruction error " + fmt(worst)};
}

Outcome nonlinear_scaling() {
    auto nl = [](const ToyData& toy, double lr, long T) {
        const auto spec = ModelSpec::linear(toy.train.dim());
        OptimConfig cfg;
        cfg.mode = OptimMode::gd;
        cfg.schedule = Schedule::constant(lr);
        cfg.max_steps = T;
        RecorderOptions ro;
        ro.store_gradients = true;
        ro.progress_ratios = false;
        TrajectoryRecorder rec(spec, toy.train, toy.test, ro);
        const auto run = train(spec, Vector(toy.train.dim(), 0.0), toy.train, toy.test, cfg, std::ref(rec));
        return std::abs(gen_decomposition(run.snapshots).gen_nl_hat);
    };
    double s = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto toy = generate_toy({100, 1000, 20, seed});
        s += nl(toy, 0.05, 200) / nl(toy, 0.1, 100);
    }
    const double ratio = s / 5.0;
    return {ratio >= 0.3 && ratio <= 0.7, "mean |gen_nl| ratio " + fmt(ratio) + " (eta 0.1, T 100 vs eta 0.05, T 200)"};
}

Outcome rp_closed_form() {
    double worst = 0.0;
    bool unstable_ok = true;
    const auto spec = ModelSpec::linear(1);
    for (double lambda : {0.5, 1.0, 4.0}) {
        for (double frac : {0.1, 0.3, 0.7, 0.9, 1.2, 1.5}) {
            const double eta = frac * 2.0 / lambda;
            const auto q = quadratic(lambda);
            OptimConfig cfg;
            cfg.mode = OptimMode::gd;
            cfg.schedule = Schedule::constant(eta);
            cfg.max_steps = 20;
            TrajectoryRecorder rec(spec, q, q);
            const auto run = train(spec, Vector{1.0}, q, q, cfg, std::ref(rec));
            for (std::size_t k = 1; k < run.snapshots.size(); ++k) {
                const auto& s = run.snapshots[k];
                if (!s.rp) {
                    unstable_ok = false;
                } else if (frac < 1.0) {
                    worst = std::max(worst, std::abs(*s.rp - (-1.0 + eta * lambda / 2.0)));
                } else {
                    unstable_ok = unstable_ok && s.F_S > run.snapshots[k - 1].F_S && *s.rp > 0.0;
                }
            }
        }
    }
    return {worst <= 1e-10 && unstable_ok,
            "max |RP - (-1 + eta lambda / 2)| " + fmt(worst) + (unstable_ok ? ", eta > 2/lambda: loss up, RP > 0" : ", eta > 2/lambda violated")};
}

Outcome v_oracle() {
    RngStream gr(5, 0);
    bool ok = true;
    double worst_z = 0.0, worst_slack = -INFINITY;
    for (int trial = 0; trial < 3; ++trial) {
        for (std::size_t n = 2; n <= 6; ++n) {
            const std::size_t d = 1 + gr.index(4);
            Matrix g(n, d);
            for (std::size_t i = 0; i < n; ++i)
                for (double& v : g.row(i)) v = gr.normal();
            RngStream r(100 * trial + n, 1);
            const auto v = estimate_V_from_grads(g, 10000, r);
            const double exact = oracle::exhaustive_D(rows_of(g));
            const double z = std::abs(v.D_hat - exact) / v.D_se;
            const auto st = trace_sigma_from_grads(g);
            const double jensen = std::sqrt((st.trace + st.grad_norm * st.grad_norm) / static_cast<double>(n));
            worst_z = std::max(worst_z, z);
            worst_slack = std::max(worst_slack, v.D_hat - jensen - 3.0 * v.D_se);
            ok = ok && z <= 3.0 && v.D_hat <= jensen + 3.0 * v.D_se;
        }
    }
    return {ok, "max |D_hat - exact| / SE " + fmt(worst_z) + ", max Jensen excess " + fmt(worst_slack)};
}

Outcome assumption_probe() {
    const auto res = run_preset("assumption", "assumption");
    const auto& t = res.table;
    bool ok = true;
    std::string medians;
    for (std::size_t i = 0; i < t.rows().size(); ++i) {
        const auto& row = t.rows()[i];
        if (row[t.column("dataset")] != "holdout") continue;
        const double m = *t.numbers("early_median")[i];
        ok = ok && m >= 0.5 && m <= 2.0;
        medians += (medians.empty() ? "" : ",") + fmt(m);
    }
    const auto c = parse_config(preset("assumption"), "assumption");
    bool control = true;
    for (std::uint64_t seed : c.seeds) {
        const auto series = CsvTable::load((kWork / "assumption" / ("seed_" + std::to_string(seed)) / "assumption.csv").string());
        for (const auto& v : series.numbers("gamma_tilde_control")) control = control && v && *v == 1.0;
    }
    return {ok && control, "early median gamma-tilde per seed " + medians + (control ? ", S'=S control exactly 1" : ", control != 1")};
}

Outcome sweeps() {
    const auto t0 = Clock::now();
    const auto noise = sweep_means(run_preset("sweep_noise", "sweep_noise").table);
    const auto lr = sweep_means(run_preset("sweep_lr", "sweep_lr").table);
    const double secs = seconds_since(t0);
    auto col = [](const CsvTable& t, const char* name) {
        std::vector<double> v;
        for (const auto& x : t.numbers(name)) v.push_back(x ? *x : NAN);
        return v;
    };
    const double rg = spearman(col(noise, "value"), col(noise, "gen_error"));
    const double rc = spearman(col(noise, "value"), col(noise, "C_final"));
    const double rl = spearman(col(lr, "value"), col(lr, "C_final"));
    bool finite = true;
    for (const auto* t : {&noise, &lr})
        for (const char* name : {"gen_error", "C_final"})
            for (double v : col(*t, name)) finite = finite && std::isfinite(v);
    return {finite && rg > 0.8 && rc > 0.8 && rl < -0.8 && secs < 120.0,
            "noise: rho(gen) " + fmt(rg) + ", rho(C) " + fmt(rc) + "; lr: rho(C) " + fmt(rl) + "; " + fmt(secs) + " s"};
}

Outcome tracking() {
    const auto t = run_preset("track", "track").table;
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < t.rows().size(); ++i) {
        const double corr = *t.numbers("correlation")[i];
        const double early = *t.numbers("early_abs_dC_dF_S")[i], late = *t.numbers("late_abs_dC_dF_S")[i];
        ok = ok && corr > 0.8 && late > early;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + t.rows()[i][0] + " corr " + fmt(corr) +
                  ", |dC/dF| early " + fmt(early) + " late " + fmt(late);
    }
    return {ok, detail};
}

Outcome determinism() {
    std::size_t files = 0;
    std::vector<std::string> mismatched;
    for (const std::string name : {"toy_table", "track", "assumption", "sweep_noise", "sweep_lr", "eos"}) {
        if (name == "eos") run_preset(name, name);
        const auto again = run_preset(name, name + "_rerun");
        for (const auto& f : again.files) {
            if (fs::path(f).extension() != ".csv") continue;
            const auto original = kWork / name / fs::relative(f, kWork / (name + "_rerun"));
            ++files;
            if (slurp(f) != slurp(original.string())) mismatched.push_back(f);
        }
    }
    std::string detail = std::to_string(files) + " CSV files compared";
    if (!mismatched.empty()) detail += ", first mismatch " + mismatched.front();
    return {mismatched.empty() && files > 0, detail};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"toy comparison ordering", toy_comparison},
        {"batch-noise covariance oracle", batch_noise_oracle},
        {"trace identity", trace_identity},
        {"gradient correctness", gradient_correctness},
        {"telescoping decomposition", telescoping},
        {"nonlinear remainder scaling", nonlinear_scaling},
        {"progress-ratio closed form", rp_closed_form},
        {"V estimator oracle", v_oracle},
        {"assumption probe", assumption_probe},
        {"sweeps", sweeps},
        {"tracking", tracking},
        {"determinism", determinism},
    };
    fs::create_directories(kWork);
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
