#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trajbound/csv.hpp"
#include "trajbound/error.hpp"

namespace trajbound::harness {

inline const std::vector<std::string> kExperiments = {"toy_table", "track", "assumption", "sweep_noise", "sweep_lr", "eos"};

struct DatasetConfig {
    std::string kind = "toy";        // toy | csv
    std::size_t n_train = 100;
    std::size_t n_test = 1000;
    std::size_t dim = 20;
    std::string path;                // csv only
    std::string label_column = "label";
    double holdout_fraction = 0.5;   // csv only
    double label_noise = 0.0;        // flip fraction applied to the training labels

    friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct ModelConfig {
    std::string kind = "linear";     // linear | mlp
    std::vector<std::size_t> hidden = {32};
    std::string loss = "squared";    // squared | cross_entropy

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct OptimSection {
    std::string mode = "sgd";        // gd | sgd
    std::size_t batch_size = 10;
    std::string schedule = "constant";  // constant | inverse_time | cosine
    double lr = 0.05;                // eta0 for constant and cosine
    double c = 1.0;                  // inverse_time
    std::optional<double> beta;      // inverse_time; unset means beta_hat of the training set
    double eta_min = 0.0;            // cosine
    long t_max = 0;                  // cosine; 0 means the step budget
    long epochs = 200;
    long max_steps = 0;              // overrides epochs when > 0
    std::optional<double> stop_train_loss;
    long snapshot_every = 0;         // 0 means once per epoch
    std::string sampling = "uniform_subsets";  // uniform_subsets | epoch_permutation

    friend bool operator==(const OptimSection&, const OptimSection&) = default;
};

struct EstimatorSection {
    std::size_t k_samples = 1024;
    std::optional<std::size_t> n_sp;
    std::string distribution = "rademacher";  // rademacher | uniform_size
    std::size_t m_batches = 64;
    std::size_t max_snapshots = 0;
    double gamma_quantile = 0.95;
    std::size_t beta_snapshots = 8;
    long power_iters = 1000;
    double power_tol = 1e-10;

    friend bool operator==(const EstimatorSection&, const EstimatorSection&) = default;
};

struct ExperimentConfig {
    std::string experiment;
    DatasetConfig dataset;
    ModelConfig model;
    OptimSection optim;
    EstimatorSection estimators;
    std::vector<double> sweep_values;  // label-noise fractions or learning rates
    long eos_power_iters = 300;
    double eos_power_tol = 1e-9;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string output_dir = "out";

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline const std::vector<double> kDefaultNoiseGrid = {0.0, 0.1, 0.2, 0.3};
inline const std::vector<double> kDefaultLrGrid = {0.005, 0.01, 0.02, 0.05, 0.1};

namespace detail {

[[noreturn]] inline void config_fail(std::size_t line, const std::string& key, const std::string& what) {
    std::string where = line ? "line " + std::to_string(line) + ": " : std::string{};
    fail(Errc::config_error, where + "key '" + key + "': " + what);
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream in(v);
    for (std::string item; std::getline(in, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct ValueParser {
    std::size_t line;
    std::string key;
    std::string text;

    double real() const {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (text.empty() || used != text.size() || !std::isfinite(v)) config_fail(line, key, "expected a number, got '" + text + "'");
        return v;
    }

    long integer() const {
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (text.empty() || used != text.size()) config_fail(line, key, "expected an integer, got '" + text + "'");
        return v;
    }

    std::size_t count() const {
        const long v = integer();
        if (v < 0) config_fail(line, key, "must be >= 0");
        return static_cast<std::size_t>(v);
    }

    std::uint64_t u64() const {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (text.empty() || used != text.size() || text[0] == '-') config_fail(line, key, "expected a seed, got '" + text + "'");
        return v;
    }

    std::string choice(const std::vector<std::string>& allowed) const {
        if (std::find(allowed.begin(), allowed.end(), text) == allowed.end()) {
            std::string opts;
            for (const auto& a : allowed) opts += (opts.empty() ? "" : "|") + a;
            config_fail(line, key, "expected one of " + opts + ", got '" + text + "'");
        }
        return text;
    }

    std::vector<double> reals() const {
        std::vector<double> out;
        for (const auto& item : split_list(text)) out.push_back(ValueParser{line, key, item}.real());
        return out;
    }

    std::vector<std::size_t> counts() const {
        std::vector<std::size_t> out;
        for (const auto& item : split_list(text)) out.push_back(ValueParser{line, key, item}.count());
        return out;
    }

    std::vector<std::uint64_t> seeds() const {
        std::vector<std::uint64_t> out;
        for (const auto& item : split_list(text)) out.push_back(ValueParser{line, key, item}.u64());
        return out;
    }
};

inline void set_key(ExperimentConfig& c, const ValueParser& v) {
    const std::string& k = v.key;
    if (k == "experiment") c.experiment = v.choice(kExperiments);
    else if (k == "seeds") c.seeds = v.seeds();
    else if (k == "output_dir") c.output_dir = v.text;
    else if (k == "dataset.kind") c.dataset.kind = v.choice({"toy", "csv"});
    else if (k == "dataset.n_train") c.dataset.n_train = v.count();
    else if (k == "dataset.n_test") c.dataset.n_test = v.count();
    else if (k == "dataset.dim") c.dataset.dim = v.count();
    else if (k == "dataset.path") c.dataset.path = v.text;
    else if (k == "dataset.label_column") c.dataset.label_column = v.text;
    else if (k == "dataset.holdout_fraction") c.dataset.holdout_fraction = v.real();
    else if (k == "dataset.label_noise") c.dataset.label_noise = v.real();
    else if (k == "model.kind") c.model.kind = v.choice({"linear", "mlp"});
    else if (k == "model.hidden") c.model.hidden = v.counts();
    else if (k == "model.loss") c.model.loss = v.choice({"squared", "cross_entropy"});
    else if (k == "optim.mode") c.optim.mode = v.choice({"gd", "sgd"});
    else if (k == "optim.batch_size") c.optim.batch_size = v.count();
    else if (k == "optim.schedule") c.optim.schedule = v.choice({"constant", "inverse_time", "cosine"});
    else if (k == "optim.lr") c.optim.lr = v.real();
    else if (k == "optim.c") c.optim.c = v.real();
    else if (k == "optim.beta") c.optim.beta = v.text == "auto" ? std::nullopt : std::optional<double>(v.real());
    else if (k == "optim.eta_min") c.optim.eta_min = v.real();
    else if (k == "optim.t_max") c.optim.t_max = v.integer();
    else if (k == "optim.epochs") c.optim.epochs = v.integer();
    else if (k == "optim.max_steps") c.optim.max_steps = v.integer();
    else if (k == "optim.stop_train_loss") c.optim.stop_train_loss = v.text == "none" ? std::nullopt : std::optional<double>(v.real());
    else if (k == "optim.snapshot_every") c.optim.snapshot_every = v.text == "epoch" ? 0 : v.integer();
    else if (k == "optim.sampling") c.optim.sampling = v.choice({"uniform_subsets", "epoch_permutation"});
    else if (k == "estimators.k_samples") c.estimators.k_samples = v.count();
    else if (k == "estimators.n_sp") c.estimators.n_sp = v.text == "all" ? std::nullopt : std::optional<std::size_t>(v.count());
    else if (k == "estimators.distribution") c.estimators.distribution = v.choice({"rademacher", "uniform_size"});
    else if (k == "estimators.m_batches") c.estimators.m_batches = v.count();
    else if (k == "estimators.max_snapshots") c.estimators.max_snapshots = v.count();
    else if (k == "estimators.gamma_quantile") c.estimators.gamma_quantile = v.real();
    else if (k == "estimators.beta_snapshots") c.estimators.beta_snapshots = v.count();
    else if (k == "estimators.power_iters") c.estimators.power_iters = v.integer();
    else if (k == "estimators.power_tol") c.estimators.power_tol = v.real();
    else if (k == "sweep.values") c.sweep_values = v.reals();
    else if (k == "eos.power_iters") c.eos_power_iters = v.integer();
    else if (k == "eos.power_tol") c.eos_power_tol = v.real();
    else config_fail(v.line, k, "unknown key");
}

} // namespace detail

/// Fills experiment-dependent defaults and checks every field.
inline void finalize_config(ExperimentConfig& c) {
    using detail::config_fail;
    if (c.experiment.empty()) config_fail(0, "experiment", "missing");
    if (c.seeds.empty()) config_fail(0, "seeds", "must list at least one seed");
    if (c.dataset.kind == "csv" && c.dataset.path.empty()) config_fail(0, "dataset.path", "required when dataset.kind = csv");
    if (c.dataset.kind == "toy") {
        if (c.dataset.n_train < 2) config_fail(0, "dataset.n_train", "must be >= 2");
        if (c.dataset.n_test < 1) config_fail(0, "dataset.n_test", "must be >= 1");
        if (c.dataset.dim < 1) config_fail(0, "dataset.dim", "must be >= 1");
    }
    if (!(c.dataset.holdout_fraction > 0.0 && c.dataset.holdout_fraction < 1.0))
        config_fail(0, "dataset.holdout_fraction", "must lie in (0, 1)");
    if (c.dataset.label_noise < 0.0 || c.dataset.label_noise > 1.0) config_fail(0, "dataset.label_noise", "must lie in [0, 1]");
    if (c.model.kind == "linear" && c.model.loss != "squared") config_fail(0, "model.loss", "the linear model uses squared loss");
    if (c.model.kind == "mlp") {
        if (c.model.hidden.empty()) config_fail(0, "model.hidden", "mlp needs at least one hidden width");
        for (std::size_t h : c.model.hidden)
            if (h == 0) config_fail(0, "model.hidden", "widths must be >= 1");
    }
    if (c.optim.batch_size < 1) config_fail(0, "optim.batch_size", "must be >= 1");
    if (!(c.optim.lr > 0.0)) config_fail(0, "optim.lr", "must be > 0");
    if (!(c.optim.c > 0.0)) config_fail(0, "optim.c", "must be > 0");
    if (c.optim.beta && !(*c.optim.beta > 0.0)) config_fail(0, "optim.beta", "must be > 0");
    if (c.optim.eta_min < 0.0 || c.optim.eta_min > c.optim.lr) config_fail(0, "optim.eta_min", "must lie in [0, optim.lr]");
    if (c.optim.t_max < 0) config_fail(0, "optim.t_max", "must be >= 0");
    if (c.optim.epochs < 0) config_fail(0, "optim.epochs", "must be >= 0");
    if (c.optim.max_steps < 0) config_fail(0, "optim.max_steps", "must be >= 0");
    if (c.optim.snapshot_every < 0) config_fail(0, "optim.snapshot_every", "must be >= 1 or 'epoch'");
    if (c.estimators.k_samples < 1) config_fail(0, "estimators.k_samples", "must be >= 1");
    if (c.estimators.n_sp && *c.estimators.n_sp < 1) config_fail(0, "estimators.n_sp", "must be >= 1");
    if (c.estimators.m_batches < 1) config_fail(0, "estimators.m_batches", "must be >= 1");
    if (c.estimators.gamma_quantile < 0.0 || c.estimators.gamma_quantile > 1.0)
        config_fail(0, "estimators.gamma_quantile", "must lie in [0, 1]");
    if (c.estimators.power_iters < 1) config_fail(0, "estimators.power_iters", "must be >= 1");
    if (c.eos_power_iters < 1) config_fail(0, "eos.power_iters", "must be >= 1");
    if (c.experiment == "sweep_noise" || c.experiment == "sweep_lr") {
        if (c.sweep_values.empty()) c.sweep_values = c.experiment == "sweep_noise" ? kDefaultNoiseGrid : kDefaultLrGrid;
        for (double v : c.sweep_values) {
            if (c.experiment == "sweep_noise" && (v < 0.0 || v > 1.0)) config_fail(0, "sweep.values", "noise levels must lie in [0, 1]");
            if (c.experiment == "sweep_lr" && !(v > 0.0)) config_fail(0, "sweep.values", "learning rates must be > 0");
        }
    }
}

/// key = value lines; '#' starts a comment. Later lines override earlier ones.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& experiment_override = {}) {
    ExperimentConfig c;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) fail(Errc::config_error, "line " + std::to_string(line) + ": expected 'key = value'");
        detail::set_key(c, {line, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1))});
    }
    if (!experiment_override.empty()) {
        const auto chosen = detail::ValueParser{0, "experiment", experiment_override}.choice(kExperiments);
        if (!c.experiment.empty() && c.experiment != chosen)
            detail::config_fail(0, "experiment", "config is for '" + c.experiment + "', command asked for '" + chosen + "'");
        c.experiment = chosen;
    }
    finalize_config(c);
    return c;
}

inline ExperimentConfig parse_config(const std::string& path, const std::string& experiment_override = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config_text(buf.str(), experiment_override);
    } catch (const Error& e) {
        if (e.code() != Errc::config_error) throw;
        fail(Errc::config_error, path + ": " + std::string(e.what()).substr(std::string(to_string(Errc::config_error)).size() + 2));
    }
}

/// Canonical text form; parse_config_text(emit_config(c)) == c for any finalized c.
inline std::string emit_config(const ExperimentConfig& c) {
    std::ostringstream o;
    auto list = [](const auto& xs, auto fmt) {
        std::string s;
        for (const auto& x : xs) s += (s.empty() ? "" : ",") + fmt(x);
        return s;
    };
    auto real = [](double v) { return format_real(v); };
    auto count = [](auto v) { return std::to_string(v); };
    o << "experiment = " << c.experiment << '\n'
      << "seeds = " << list(c.seeds, count) << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "dataset.kind = " << c.dataset.kind << '\n'
      << "dataset.n_train = " << c.dataset.n_train << '\n'
      << "dataset.n_test = " << c.dataset.n_test << '\n'
      << "dataset.dim = " << c.dataset.dim << '\n';
    if (!c.dataset.path.empty()) o << "dataset.path = " << c.dataset.path << '\n';
    o << "dataset.label_column = " << c.dataset.label_column << '\n'
      << "dataset.holdout_fraction = " << real(c.dataset.holdout_fraction) << '\n'
      << "dataset.label_noise = " << real(c.dataset.label_noise) << '\n'
      << "model.kind = " << c.model.kind << '\n'
      << "model.hidden = " << list(c.model.hidden, count) << '\n'
      << "model.loss = " << c.model.loss << '\n'
      << "optim.mode = " << c.optim.mode << '\n'
      << "optim.batch_size = " << c.optim.batch_size << '\n'
      << "optim.schedule = " << c.optim.schedule << '\n'
      << "optim.lr = " << real(c.optim.lr) << '\n'
      << "optim.c = " << real(c.optim.c) << '\n'
      << "optim.beta = " << (c.optim.beta ? real(*c.optim.beta) : "auto") << '\n'
      << "optim.eta_min = " << real(c.optim.eta_min) << '\n'
      << "optim.t_max = " << c.optim.t_max << '\n'
      << "optim.epochs = " << c.optim.epochs << '\n'
      << "optim.max_steps = " << c.optim.max_steps << '\n'
      << "optim.stop_train_loss = " << (c.optim.stop_train_loss ? real(*c.optim.stop_train_loss) : "none") << '\n'
      << "optim.snapshot_every = " << (c.optim.snapshot_every == 0 ? "epoch" : std::to_string(c.optim.snapshot_every)) << '\n'
      << "optim.sampling = " << c.optim.sampling << '\n'
      << "estimators.k_samples = " << c.estimators.k_samples << '\n'
      << "estimators.n_sp = " << (c.estimators.n_sp ? std::to_string(*c.estimators.n_sp) : "all") << '\n'
      << "estimators.distribution = " << c.estimators.distribution << '\n'
      << "estimators.m_batches = " << c.estimators.m_batches << '\n'
      << "estimators.max_snapshots = " << c.estimators.max_snapshots << '\n'
      << "estimators.gamma_quantile = " << real(c.estimators.gamma_quantile) << '\n'
      << "estimators.beta_snapshots = " << c.estimators.beta_snapshots << '\n'
      << "estimators.power_iters = " << c.estimators.power_iters << '\n'
      << "estimators.power_tol = " << real(c.estimators.power_tol) << '\n';
    if (!c.sweep_values.empty()) o << "sweep.values = " << list(c.sweep_values, real) << '\n';
    o << "eos.power_iters = " << c.eos_power_iters << '\n' << "eos.power_tol = " << real(c.eos_power_tol) << '\n';
    return o.str();
}

} // namespace trajbound::harness
