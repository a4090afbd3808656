#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dielkit/detail/text.hpp"
#include "dielkit/trace.hpp"

namespace dielkit {

enum class FrequencyUnit { hz, khz, mhz, ghz };
enum class DataFormat { ri, ma, db };

inline double unit_scale(FrequencyUnit u) {
    switch (u) {
    case FrequencyUnit::hz: return 1.0;
    case FrequencyUnit::khz: return 1e3;
    case FrequencyUnit::mhz: return 1e6;
    case FrequencyUnit::ghz: return 1e9;
    }
    return 1.0;
}

inline std::string_view unit_name(FrequencyUnit u) {
    switch (u) {
    case FrequencyUnit::hz: return "Hz";
    case FrequencyUnit::khz: return "kHz";
    case FrequencyUnit::mhz: return "MHz";
    case FrequencyUnit::ghz: return "GHz";
    }
    return "Hz";
}

inline std::string_view format_name(DataFormat f) {
    switch (f) {
    case DataFormat::ri: return "RI";
    case DataFormat::ma: return "MA";
    case DataFormat::db: return "DB";
    }
    return "RI";
}

/// Option-line settings (defaults match the v1 standard: GHz S MA R 50).
struct TouchstoneOptions {
    FrequencyUnit unit = FrequencyUnit::ghz;
    DataFormat format = DataFormat::ma;
    double reference_ohm = 50.0;
};

/// One frequency point of a two-port network, entries in file order
/// S11 S21 S12 S22.
struct NetworkRow {
    double frequency_hz = 0.0;
    std::array<Complex, 4> s{};
};

/// Touchstone v1 two-port container. Values are stored rectangular
/// regardless of the source format; the option line is kept so the
/// writer can scale frequencies back to the declared unit.
struct TouchstoneDocument {
    TouchstoneOptions options;
    std::vector<NetworkRow> network_data;
    std::vector<std::string> comments;  // whole-line "!" comments, in order
    std::string source_name;

    static constexpr std::array<std::string_view, 4> labels = {"S11", "S21",
                                                               "S12", "S22"};

    static int label_index(std::string_view label) {
        for (int i = 0; i < 4; ++i)
            if (labels[static_cast<std::size_t>(i)] == label) return i;
        return -1;
    }
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& src, std::size_t line_no,
                                    const std::string& what) {
    throw ParseError(src + ":" + std::to_string(line_no) + ": " + what);
}

inline TouchstoneOptions parse_option_line(const std::string& line,
                                           const std::string& src,
                                           std::size_t line_no) {
    // "# <unit> S <fmt> R <ohm>"; tokens may appear in any order and any
    // subset, missing ones keep their defaults.
    TouchstoneOptions opt;
    auto toks = split_ws(std::string_view(line).substr(1));
    std::size_t i = 0;
    while (i < toks.size()) {
        std::string t = upper(toks[i]);
        if (t == "HZ") opt.unit = FrequencyUnit::hz;
        else if (t == "KHZ") opt.unit = FrequencyUnit::khz;
        else if (t == "MHZ") opt.unit = FrequencyUnit::mhz;
        else if (t == "GHZ") opt.unit = FrequencyUnit::ghz;
        else if (t == "S") { /* scattering parameters, the only supported type */ }
        else if (t == "Y" || t == "Z" || t == "H" || t == "G")
            parse_fail(src, line_no, "unsupported parameter type '" + toks[i] +
                                         "' (only S is supported)");
        else if (t == "RI") opt.format = DataFormat::ri;
        else if (t == "MA") opt.format = DataFormat::ma;
        else if (t == "DB") opt.format = DataFormat::db;
        else if (t == "R") {
            if (i + 1 >= toks.size())
                parse_fail(src, line_no, "option line: R without a resistance value");
            double r = 0.0;
            if (!parse_double(toks[i + 1], r) || r <= 0.0)
                parse_fail(src, line_no,
                           "option line: bad reference resistance '" + toks[i + 1] + "'");
            opt.reference_ohm = r;
            ++i;
        } else {
            parse_fail(src, line_no, "option line: unrecognized token '" + toks[i] + "'");
        }
        ++i;
    }
    return opt;
}

inline Complex decode_pair(DataFormat fmt, double a, double b) {
    constexpr double deg = std::numbers::pi / 180.0;
    switch (fmt) {
    case DataFormat::ri: return {a, b};
    case DataFormat::ma: return std::polar(a, b * deg);
    case DataFormat::db: return std::polar(std::pow(10.0, a / 20.0), b * deg);
    }
    return {a, b};
}

} // namespace detail

/// Parse Touchstone v1 text for a 2-port network. Frequencies come out in
/// Hz and all values rectangular. Whole-line comments are preserved.
inline TouchstoneDocument parse_touchstone(std::istream& in,
                                           const std::string& source_name = "<stream>") {
    TouchstoneDocument doc;
    doc.source_name = source_name;
    bool have_options = false;
    bool have_data = false;
    double scale = unit_scale(doc.options.unit);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        auto bang = line.find('!');
        if (bang != std::string::npos) {
            std::string comment = line.substr(bang + 1);
            line.resize(bang);
            if (detail::split_ws(line).empty()) {
                doc.comments.push_back(comment);
                continue;
            }
            // trailing comment on a data/option line: dropped
        }
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;

        if (line[line.find_first_not_of(" \t")] == '#') {
            if (have_data)
                detail::parse_fail(source_name, line_no, "option line after network data");
            if (have_options)
                detail::parse_fail(source_name, line_no, "duplicate option line");
            doc.options = detail::parse_option_line(line, source_name, line_no);
            scale = unit_scale(doc.options.unit);
            have_options = true;
            continue;
        }

        if (toks.size() != 9)
            detail::parse_fail(source_name, line_no,
                               "expected 9 numeric fields (frequency + 4 complex pairs), got " +
                                   std::to_string(toks.size()));
        double v[9];
        for (std::size_t k = 0; k < 9; ++k)
            if (!detail::parse_double(toks[k], v[k]))
                detail::parse_fail(source_name, line_no,
                                   "field " + std::to_string(k + 1) + " is not a number: '" +
                                       toks[k] + "'");

        NetworkRow row;
        row.frequency_hz = v[0] * scale;
        for (int p = 0; p < 4; ++p)
            row.s[static_cast<std::size_t>(p)] =
                detail::decode_pair(doc.options.format, v[1 + 2 * p], v[2 + 2 * p]);

        if (!doc.network_data.empty() &&
            !(row.frequency_hz > doc.network_data.back().frequency_hz))
            detail::parse_fail(source_name, line_no,
                               "frequency not strictly increasing (duplicate or "
                               "out-of-order sweep point)");
        doc.network_data.push_back(row);
        have_data = true;
    }
    return doc;
}

inline TouchstoneDocument parse_touchstone(const std::string& text,
                                           const std::string& source_name = "<string>") {
    std::istringstream in(text);
    return parse_touchstone(in, source_name);
}

/// Serialize a document in RI format, frequencies scaled to the declared
/// unit, 16 significant digits so a parse round-trip is lossless well past
/// the 1e-12 contract.
inline std::string write_touchstone(const TouchstoneDocument& doc) {
    std::string out;
    for (const auto& c : doc.comments) {
        out += '!';
        out += c;
        out += '\n';
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "# %s S RI R %.15g\n",
                  std::string(unit_name(doc.options.unit)).c_str(),
                  doc.options.reference_ohm);
    out += buf;
    const double scale = unit_scale(doc.options.unit);
    for (const auto& row : doc.network_data) {
        std::snprintf(buf, sizeof buf, "%.16e", row.frequency_hz / scale);
        out += buf;
        for (const auto& s : row.s) {
            std::snprintf(buf, sizeof buf, " %.16e %.16e", s.real(), s.imag());
            out += buf;
        }
        out += '\n';
    }
    return out;
}

/// Pull one S-parameter across frequency out of a document.
inline ComplexTrace extract_trace(const TouchstoneDocument& doc, std::string_view label) {
    int idx = TouchstoneDocument::label_index(label);
    if (idx < 0)
        throw std::invalid_argument("unknown S-parameter label '" + std::string(label) +
                                    "' (two-port: S11, S21, S12, S22)");
    std::vector<double> f;
    std::vector<Complex> v;
    f.reserve(doc.network_data.size());
    v.reserve(doc.network_data.size());
    for (const auto& row : doc.network_data) {
        f.push_back(row.frequency_hz);
        v.push_back(row.s[static_cast<std::size_t>(idx)]);
    }
    TraceMetadata meta;
    meta.source_file = doc.source_name;
    meta.frequency_unit = std::string(unit_name(doc.options.unit));
    meta.source_format = std::string(format_name(doc.options.format));
    meta.reference_ohm = doc.options.reference_ohm;
    return ComplexTrace(std::move(f), std::move(v), std::string(label), std::move(meta));
}

/// Build a two-port document carrying a forward-transmission trace; the
/// remaining entries are zero. Used by the synthetic-trace emitter.
inline TouchstoneDocument make_s21_document(const std::vector<double>& frequencies_hz,
                                            const std::vector<Complex>& s21,
                                            FrequencyUnit unit = FrequencyUnit::ghz,
                                            std::vector<std::string> comments = {}) {
    if (frequencies_hz.size() != s21.size())
        throw std::invalid_argument("make_s21_document: size mismatch");
    TouchstoneDocument doc;
    doc.options.unit = unit;
    doc.options.format = DataFormat::ri;
    doc.comments = std::move(comments);
    doc.network_data.resize(frequencies_hz.size());
    for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
        doc.network_data[i].frequency_hz = frequencies_hz[i];
        doc.network_data[i].s[1] = s21[i];
    }
    return doc;
}

} // namespace dielkit
