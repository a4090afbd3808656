#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dielkit/detail/text.hpp"
#include "dielkit/trace.hpp"

namespace dielkit {

/// Names the CSV columns holding the trace. Exactly one of the two pairs
/// (real/imag) or (magnitude_db/phase_deg) must be set.
struct CsvColumnMap {
    std::string frequency = "f";
    std::optional<std::string> real;
    std::optional<std::string> imag;
    std::optional<std::string> magnitude_db;
    std::optional<std::string> phase_deg;

    static CsvColumnMap rectangular(std::string f = "f", std::string re = "re",
                                    std::string im = "im") {
        CsvColumnMap m;
        m.frequency = std::move(f);
        m.real = std::move(re);
        m.imag = std::move(im);
        return m;
    }
    static CsvColumnMap polar_db(std::string f = "f", std::string mag = "mag_db",
                                 std::string phase = "phase_deg") {
        CsvColumnMap m;
        m.frequency = std::move(f);
        m.magnitude_db = std::move(mag);
        m.phase_deg = std::move(phase);
        return m;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double csv_cell_double(const std::vector<std::string>& row, std::size_t col,
                              const std::string& col_name, std::size_t row_no,
                              const std::string& src) {
    if (col >= row.size())
        throw ParseError(src + ": row " + std::to_string(row_no) + " has no column '" +
                         col_name + "'");
    double v = 0.0;
    if (!parse_double(row[col], v))
        throw ParseError(src + ": row " + std::to_string(row_no) + ", column '" + col_name +
                         "': unparsable cell '" + row[col] + "'");
    return v;
}

} // namespace detail

/// Parse a comma-separated trace with a header row. dB/degree columns are
/// converted to rectangular values.
inline ComplexTrace parse_csv_trace(const std::string& text, const CsvColumnMap& map,
                                    const std::string& source_name = "<csv>",
                                    const std::string& parameter_label = "S21") {
    const bool rect = map.real.has_value() && map.imag.has_value();
    const bool polar = map.magnitude_db.has_value() && map.phase_deg.has_value();
    if (rect == polar)
        throw std::invalid_argument(
            "csv column map: set exactly one of (real,imag) or (magnitude_db,phase_deg)");

    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(source_name + ": empty input, header row required");
    auto header = detail::split_csv_row(line);

    auto col_of = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ParseError(source_name + ": missing column '" + name + "' in header");
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t fc = col_of(map.frequency);
    const std::size_t ac = col_of(rect ? *map.real : *map.magnitude_db);
    const std::size_t bc = col_of(rect ? *map.imag : *map.phase_deg);

    std::vector<double> freq;
    std::vector<Complex> values;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto row = detail::split_csv_row(line);
        double f = detail::csv_cell_double(row, fc, map.frequency, row_no, source_name);
        double a = detail::csv_cell_double(row, ac, rect ? *map.real : *map.magnitude_db,
                                           row_no, source_name);
        double b = detail::csv_cell_double(row, bc, rect ? *map.imag : *map.phase_deg,
                                           row_no, source_name);
        if (!freq.empty() && !(f > freq.back()))
            throw ParseError(source_name + ": row " + std::to_string(row_no) +
                             ": frequency not strictly increasing");
        freq.push_back(f);
        if (rect)
            values.emplace_back(a, b);
        else
            values.push_back(std::polar(std::pow(10.0, a / 20.0),
                                        b * std::numbers::pi / 180.0));
    }
    TraceMetadata meta;
    meta.source_file = source_name;
    meta.source_format = rect ? "RI" : "DB";
    return ComplexTrace(std::move(freq), std::move(values), parameter_label,
                        std::move(meta));
}

} // namespace dielkit
