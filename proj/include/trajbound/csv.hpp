#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trajbound/error.hpp"

namespace trajbound {

/// Shortest text that parses back to the same double.
inline std::string format_real(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string format_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string{}; }

inline std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

/// In-memory table with a fixed header; rows are written in insertion order.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> cells) {
        require(cells.size() == header_.size(), Errc::dimension_mismatch,
                "csv row has " + std::to_string(cells.size()) + " cells, header has " + std::to_string(header_.size()));
        rows_.push_back(std::move(cells));
    }

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == name) return i;
        fail(Errc::schema_error, "csv has no column '" + name + "'");
    }

    /// Numeric column; empty cells become nullopt.
    std::vector<std::optional<double>> numbers(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<std::optional<double>> out;
        out.reserve(rows_.size());
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const std::string& cell = rows_[r][c];
            if (cell.empty()) {
                out.emplace_back();
                continue;
            }
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size())
                fail(Errc::parse_error, "row " + std::to_string(r + 2) + ", column '" + name + "': not a number: '" + cell + "'");
            out.push_back(v);
        }
        return out;
    }

    std::string str() const {
        std::ostringstream out;
        write_line(out, header_);
        for (const auto& r : rows_) write_line(out, r);
        return out.str();
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(Errc::io_error, "cannot write '" + path + "'");
        out << str();
        if (!out) fail(Errc::io_error, "write to '" + path + "' failed");
    }

    static CsvTable parse(std::istream& in) {
        std::string line;
        if (!std::getline(in, line)) fail(Errc::schema_error, "csv input has no header row");
        CsvTable t(split(line));
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto cells = split(line);
            if (cells.size() != t.header_.size())
                fail(Errc::parse_error, "row " + std::to_string(line_no) + ": expected " +
                                            std::to_string(t.header_.size()) + " cells, found " + std::to_string(cells.size()));
            t.rows_.push_back(std::move(cells));
        }
        return t;
    }

    static CsvTable load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail(Errc::io_error, "cannot open '" + path + "'");
        return parse(in);
    }

private:
    static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(cells[i]);
        }
        out << '\n';
    }

    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> cells(1);
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cells.back() += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cells.back() += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                cells.emplace_back();
            } else if (c != '\r') {
                cells.back() += c;
            }
        }
        return cells;
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace trajbound
