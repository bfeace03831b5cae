#pragma once

// CSV dialect: comma separator, '.' decimal point, mandatory header row, LF
// line endings, no quoting. Doubles are written in shortest round-trip form.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "invset/core.hpp"
#include "invset/error.hpp"

namespace invset::csv {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw Error(ErrorCode::Internal, "cannot format double");
    return std::string(buf, ptr);
}

struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw Error(ErrorCode::Parse, source + ": missing column '" + std::string(name) + "'");
    }
    bool has_column(std::string_view name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }

    /// Numeric cell; errors name the file and 1-based line.
    double number(std::size_t row, std::size_t col) const {
        const std::string& cell = rows.at(row).at(col);
        double v = 0.0;
        const char* first = cell.data();
        const char* last = cell.data() + cell.size();
        if (first != last && *first == '+') ++first;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || cell.empty())
            throw Error(ErrorCode::Parse, source + ":" + std::to_string(row + 2) + ": '" + cell + "' in column '" +
                                              header[col] + "' is not a number");
        return v;
    }

    bool numeric_column(std::size_t col) const {
        for (const auto& r : rows) {
            double v = 0.0;
            const std::string& cell = r[col];
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return false;
        }
        return true;
    }
};

inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline Table parse(std::istream& in, std::string source) {
    Table t;
    t.source = std::move(source);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw Error(ErrorCode::Parse, t.source + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(t.header.size()) + " fields, found " +
                                              std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw Error(ErrorCode::Parse, t.source + ": missing header row");
    return t;
}

inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path + "'");
    return parse(in, path);
}

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    Writer& row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        return *this;
    }

private:
    std::ostream& out_;
};

/// Coordinate (or label) cells of one domain point.
inline std::vector<std::string> point_cells(const Domain& d, std::size_t i) {
    if (d.is_labeled()) return {d.label(i)};
    std::vector<std::string> cells;
    for (double v : d.point(i)) cells.push_back(format_double(v));
    return cells;
}

inline void write_field(std::ostream& out, const Field& f, const std::string& value_name = "value") {
    Writer w(out);
    auto header = f.domain()->axis_names();
    header.push_back(value_name);
    w.row(header);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto cells = point_cells(*f.domain(), i);
        cells.push_back(format_double(f[i]));
        w.row(cells);
    }
}

inline void write_index_set(std::ostream& out, const IndexSet& s, const std::string& value_name = "member") {
    Writer w(out);
    auto header = s.domain()->axis_names();
    header.push_back(value_name);
    w.row(header);
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto cells = point_cells(*s.domain(), i);
        cells.push_back(s.contains(i) ? "1" : "0");
        w.row(cells);
    }
}

/// Domain from the first `count` columns: a labeled domain when the single
/// leading column is non-numeric, coordinates otherwise.
inline DomainPtr domain_from_columns(const Table& t, std::size_t count) {
    if (count == 0) throw Error(ErrorCode::Parse, t.source + ": no coordinate columns");
    if (t.rows.empty()) throw Error(ErrorCode::Parse, t.source + ": no data rows");
    std::vector<std::string> names(t.header.begin(), t.header.begin() + static_cast<std::ptrdiff_t>(count));
    if (count == 1 && !t.numeric_column(0)) {
        std::vector<std::string> labels;
        for (const auto& r : t.rows) labels.push_back(r[0]);
        return Domain::labeled(std::move(labels), names[0]);
    }
    std::vector<double> coords;
    coords.reserve(t.rows.size() * count);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < count; ++c) coords.push_back(t.number(r, c));
    return Domain::from_coordinates(std::move(names), std::move(coords));
}

inline std::vector<double> numeric_column(const Table& t, std::size_t col) {
    std::vector<double> v(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) v[r] = t.number(r, col);
    return v;
}

}  // namespace invset::csv
