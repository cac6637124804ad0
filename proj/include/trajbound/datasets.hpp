#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "trajbound/error.hpp"
#include "trajbound/numerics.hpp"

namespace trajbound {

/// n samples of dimension d with one real label each.
struct Dataset {
    Matrix features;
    Vector labels;
    std::string name;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return features.cols(); }
    std::span<const double> x(std::size_t i) const noexcept { return features.row(i); }
    double y(std::size_t i) const noexcept { return labels[i]; }

    void validate() const {
        require(size() >= 1 && dim() >= 1, Errc::invalid_argument, "dataset '" + name + "' must have n >= 1 and d >= 1");
        require(features.rows() == labels.size(), Errc::dimension_mismatch,
                "dataset '" + name + "': feature rows and label count differ");
        require(all_finite(features.data()) && all_finite(labels), Errc::numeric_domain,
                "dataset '" + name + "' contains non-finite entries");
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Rows of `data` at `indices`, in the given order.
inline Dataset subset(const Dataset& data, std::span<const std::size_t> indices, std::string name) {
    Dataset out;
    out.name = std::move(name);
    out.features = Matrix(indices.size(), data.dim());
    out.labels.resize(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto src = data.x(indices[k]);
        std::copy(src.begin(), src.end(), out.features.row(k).begin());
        out.labels[k] = data.y(indices[k]);
    }
    return out;
}

struct ToyConfig {
    std::size_t n_train = 100;
    std::size_t n_test = 1000;
    std::size_t dim = 20;
    std::uint64_t seed = 0;

    void validate() const {
        require(n_train >= 2, Errc::invalid_argument, "toy n_train must be >= 2");
        require(n_test >= 1, Errc::invalid_argument, "toy n_test must be >= 1");
        require(dim >= 1, Errc::invalid_argument, "toy dim must be >= 1");
    }
};

struct ToyData {
    Dataset train;
    Dataset test;
    Vector teacher;
};

/// Label of x under the linear teacher; ties (w.x == 0) map to 0.
inline double teacher_label(std::span<const double> teacher, std::span<const double> x) {
    return dot(teacher, x) > 0.0 ? 1.0 : 0.0;
}

namespace detail {

inline Dataset gaussian_teacher_set(std::size_t n, std::span<const double> teacher, RngStream rng, std::string name) {
    Dataset d;
    d.name = std::move(name);
    d.features = Matrix(n, teacher.size());
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : d.features.row(i)) v = rng.normal();
        d.labels[i] = teacher_label(teacher, d.features.row(i));
    }
    return d;
}

} // namespace detail

/// Gaussian inputs labelled by the sign of a random Gaussian teacher. Teacher,
/// train and test each use their own substream of `cfg.seed`.
inline ToyData generate_toy(const ToyConfig& cfg) {
    cfg.validate();
    RngStream teacher_rng(cfg.seed, 0);
    Vector teacher(cfg.dim);
    for (double& v : teacher) v = teacher_rng.normal();
    ToyData out;
    out.train = detail::gaussian_teacher_set(cfg.n_train, teacher, RngStream(cfg.seed, 1), "toy-train");
    out.test = detail::gaussian_teacher_set(cfg.n_test, teacher, RngStream(cfg.seed, 2), "toy-test");
    out.teacher = std::move(teacher);
    return out;
}

/// First k entries of a uniform random permutation of [0, n) (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(RngStream& rng, std::size_t n, std::size_t k) {
    require(k <= n, Errc::invalid_argument, "cannot draw more items than available");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

/// Flips exactly round(flip_fraction * n) distinct binary labels.
inline Dataset inject_label_noise(const Dataset& data, double flip_fraction, RngStream& rng) {
    require(flip_fraction >= 0.0 && flip_fraction <= 1.0, Errc::invalid_argument,
            "flip_fraction must lie in [0, 1]");
    for (double y : data.labels)
        require(y == 0.0 || y == 1.0, Errc::invalid_argument, "label noise needs binary {0,1} labels");
    Dataset out = data;
    const auto count = static_cast<std::size_t>(std::llround(flip_fraction * static_cast<double>(data.size())));
    for (std::size_t i : sample_without_replacement(rng, data.size(), count)) out.labels[i] = 1.0 - out.labels[i];
    return out;
}

struct Split {
    Dataset train;
    Dataset holdout;
};

/// Uniform random partition; the holdout gets round(holdout_fraction * n) rows.
/// Both sides keep the original row order.
inline Split split_train_holdout(const Dataset& data, double holdout_fraction, RngStream& rng) {
    require(holdout_fraction > 0.0 && holdout_fraction < 1.0, Errc::invalid_argument,
            "holdout_fraction must lie in (0, 1)");
    const std::size_t n = data.size();
    const auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));
    require(n_hold >= 1 && n_hold < n, Errc::invalid_argument,
            "split of " + std::to_string(n) + " rows would leave one side empty");
    auto hold = sample_without_replacement(rng, n, n_hold);
    std::sort(hold.begin(), hold.end());
    std::vector<std::size_t> keep;
    keep.reserve(n - n_hold);
    for (std::size_t i = 0, h = 0; i < n; ++i) {
        if (h < hold.size() && hold[h] == i) {
            ++h;
            continue;
        }
        keep.push_back(i);
    }
    return {subset(data, keep, data.name + "-train"), subset(data, hold, data.name + "-holdout")};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (cell.empty() || used != cell.size() || !std::isfinite(v))
        fail(Errc::parse_error, "row " + std::to_string(row) + ", column '" + column + "': not a number: '" + cell + "'");
    return v;
}

} // namespace detail

/// Comma-separated file with a header row; every column except `label_column`
/// becomes a feature, in header order. Row numbers in errors are 1-based file lines.
inline Dataset load_csv_dataset(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail(Errc::schema_error, "'" + path + "' has no header row");
    const auto header = detail::split_csv_line(line);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end()) fail(Errc::schema_error, "label column '" + label_column + "' not found in '" + path + "'");
    const auto label_idx = static_cast<std::size_t>(label_it - header.begin());
    require(header.size() >= 2, Errc::schema_error, "'" + path + "' needs at least one feature column");

    Dataset d;
    d.name = path;
    std::size_t line_no = 1;
    Vector row(header.size() - 1);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            fail(Errc::parse_error, "row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                        " cells, found " + std::to_string(cells.size()));
        std::size_t f = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const double v = detail::parse_cell(cells[c], line_no, header[c]);
            if (c == label_idx)
                d.labels.push_back(v);
            else
                row[f++] = v;
        }
        d.features.append_row(row);
    }
    if (d.labels.empty()) fail(Errc::schema_error, "'" + path + "' contains no data rows");
    d.validate();
    return d;
}

} // namespace trajbound
