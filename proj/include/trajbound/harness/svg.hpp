#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trajbound/csv.hpp"
#include "trajbound/error.hpp"

namespace trajbound::harness {

struct PlotSpec {
    std::string x;
    std::vector<std::string> y;
    std::string title;
    std::string file;  // output name, relative to the output directory
};

namespace detail {

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace detail

/// Fixed-size line plot of the y columns against x. Rows where either value is
/// missing are dropped per series.
inline std::string render_svg(const CsvTable& table, const PlotSpec& spec) {
    require(!spec.y.empty(), Errc::invalid_argument, "plot '" + spec.title + "' has no y columns");
    const auto xs = table.numbers(spec.x);
    std::vector<std::vector<std::pair<double, double>>> series;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& name : spec.y) {
        const auto ys = table.numbers(name);
        auto& pts = series.emplace_back();
        for (std::size_t r = 0; r < xs.size(); ++r) {
            if (!xs[r] || !ys[r] || !std::isfinite(*xs[r]) || !std::isfinite(*ys[r])) continue;
            pts.emplace_back(*xs[r], *ys[r]);
            xmin = std::min(xmin, *xs[r]);
            xmax = std::max(xmax, *xs[r]);
            ymin = std::min(ymin, *ys[r]);
            ymax = std::max(ymax, *ys[r]);
        }
        if (pts.empty()) fail(Errc::invalid_argument, "plot '" + spec.title + "': series '" + name + "' is empty");
    }
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }

    constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
    const double pw = W - L - R, ph = H - T - B;
    auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return T + ph - (y - ymin) / (ymax - ymin) * ph; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    s += "<text x=\"" + detail::fmt_coord(L + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::xml_escape(spec.title) + "</text>\n";
    s += "<rect x=\"" + detail::fmt_coord(L) + "\" y=\"" + detail::fmt_coord(T) + "\" width=\"" + detail::fmt_coord(pw) +
         "\" height=\"" + detail::fmt_coord(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0, fy = ymin + (ymax - ymin) * i / 4.0;
        s += "<text x=\"" + detail::fmt_coord(sx(fx)) + "\" y=\"" + detail::fmt_coord(T + ph + 18) +
             "\" text-anchor=\"middle\" font-size=\"11\">" + detail::fmt_tick(fx) + "</text>\n";
        s += "<text x=\"" + detail::fmt_coord(L - 6) + "\" y=\"" + detail::fmt_coord(sy(fy) + 4) +
             "\" text-anchor=\"end\" font-size=\"11\">" + detail::fmt_tick(fy) + "</text>\n";
    }
    s += "<text x=\"" + detail::fmt_coord(L + pw / 2) + "\" y=\"" + detail::fmt_coord(H - 10) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + detail::xml_escape(spec.x) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* col = colors[k % 6];
        s += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].size(); ++i) {
            if (i) s += ' ';
            s += detail::fmt_coord(sx(series[k][i].first)) + "," + detail::fmt_coord(sy(series[k][i].second));
        }
        s += "\"/>\n";
        const double ly = T + 14 + 18.0 * static_cast<double>(k);
        s += "<line x1=\"" + detail::fmt_coord(W - R + 10) + "\" y1=\"" + detail::fmt_coord(ly) + "\" x2=\"" +
             detail::fmt_coord(W - R + 30) + "\" y2=\"" + detail::fmt_coord(ly) + "\" stroke=\"" + col + "\"/>\n";
        s += "<text x=\"" + detail::fmt_coord(W - R + 36) + "\" y=\"" + detail::fmt_coord(ly + 4) + "\" font-size=\"11\">" +
             detail::xml_escape(spec.y[k]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

/// Renders every plot before writing any file, so a bad spec leaves no output.
inline std::vector<std::string> emit_svg_plots(const CsvTable& table, const std::vector<PlotSpec>& specs,
                                               const std::string& out_dir) {
    std::vector<std::string> docs;
    for (const auto& p : specs) docs.push_back(render_svg(table, p));
    std::vector<std::string> written;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto path = (std::filesystem::path(out_dir) / specs[i].file).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(Errc::io_error, "cannot write '" + path + "'");
        out << docs[i];
        written.push_back(path);
    }
    return written;
}

inline std::vector<std::string> emit_svg_plots(const std::string& csv_path, const std::vector<PlotSpec>& specs,
                                               const std::string& out_dir) {
    return emit_svg_plots(CsvTable::load(csv_path), specs, out_dir);
}

} // namespace trajbound::harness
