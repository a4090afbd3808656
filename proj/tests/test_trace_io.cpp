#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "dielkit/csv_trace.hpp"
#include "dielkit/resonance.hpp"
#include "dielkit/touchstone.hpp"

using namespace dielkit;

namespace {

double rel_diff(const Complex& a, const Complex& b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// Encode a set of rows in the requested format, high precision.
std::string encode_document(const std::vector<NetworkRow>& rows, FrequencyUnit unit,
                            DataFormat fmt, double r_ohm = 50.0) {
    std::ostringstream out;
    out.precision(17);
    out << "# " << unit_name(unit) << " S " << format_name(fmt) << " R " << r_ohm << "\n";
    for (const auto& row : rows) {
        out << row.frequency_hz / unit_scale(unit);
        for (const auto& s : row.s) {
            switch (fmt) {
            case DataFormat::ri:
                out << " " << s.real() << " " << s.imag();
                break;
            case DataFormat::ma:
                out << " " << std::abs(s) << " " << std::arg(s) * 180.0 / std::numbers::pi;
                break;
            case DataFormat::db:
                out << " " << 20.0 * std::log10(std::abs(s)) << " "
                    << std::arg(s) * 180.0 / std::numbers::pi;
                break;
            }
        }
        out << "\n";
    }
    return out.str();
}

std::vector<NetworkRow> random_rows(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> step(1e3, 1e6);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    std::vector<NetworkRow> rows(n);
    double f = 1e9;
    for (auto& row : rows) {
        f += step(rng);
        row.frequency_hz = f;
        for (auto& s : row.s) s = Complex(val(rng), val(rng));
    }
    return rows;
}

} // namespace

TEST_CASE("single rectangular row", "[trace_io]") {
    auto doc = parse_touchstone(std::string("# GHz S RI R 50\n7.2 0 0 0.5 0 0 0 0 0\n"));
    REQUIRE(doc.network_data.size() == 1);
    CHECK(doc.network_data[0].frequency_hz == Catch::Approx(7.2e9).epsilon(1e-15));
    CHECK(doc.network_data[0].s[1] == Complex(0.5, 0.0));
    CHECK(doc.options.reference_ohm == 50.0);
}

TEST_CASE("polar-to-rectangular identity", "[trace_io]") {
    auto doc = parse_touchstone(std::string("# MHz S MA R 50\n100 0 0 1 90 0 0 0 0\n"));
    REQUIRE(doc.network_data.size() == 1);
    const Complex s21 = doc.network_data[0].s[1];
    CHECK(std::abs(s21.real()) < 1e-15);
    CHECK(s21.imag() == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(doc.network_data[0].frequency_hz == Catch::Approx(100e6));
}

TEST_CASE("option-line defaults applied when absent", "[trace_io]") {
    auto doc = parse_touchstone(std::string("1.0 0.5 10 0.5 10 0.5 10 0.5 10\n"));
    CHECK(doc.options.unit == FrequencyUnit::ghz);
    CHECK(doc.options.format == DataFormat::ma);
    CHECK(doc.options.reference_ohm == 50.0);
    CHECK(doc.network_data[0].frequency_hz == Catch::Approx(1e9));
}

TEST_CASE("comments preserved, parse errors carry line numbers", "[trace_io]") {
    SECTION("comments") {
        auto doc = parse_touchstone(
            std::string("! first\n# Hz S RI R 50\n! second\n1 0 0 0 0 0 0 0 0\n"));
        REQUIRE(doc.comments.size() == 2);
        CHECK(doc.comments[0] == " first");
        CHECK(doc.comments[1] == " second");
    }
    SECTION("wrong field count") {
        try {
            parse_touchstone(std::string("# Hz S RI R 50\n1 0 0\n"), "bad.s2p");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("bad.s2p:2") != std::string::npos);
        }
    }
    SECTION("malformed option line") {
        CHECK_THROWS_AS(parse_touchstone(std::string("# GHz S XY R 50\n")), ParseError);
        CHECK_THROWS_AS(parse_touchstone(std::string("# GHz Z RI R 50\n")), ParseError);
        CHECK_THROWS_AS(parse_touchstone(std::string("# GHz S RI R\n")), ParseError);
    }
    SECTION("non-monotone frequency") {
        try {
            parse_touchstone(
                std::string("# Hz S RI R 50\n2 0 0 0 0 0 0 0 0\n1 0 0 0 0 0 0 0 0\n"),
                "mono.s2p");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("mono.s2p:3") != std::string::npos);
        }
    }
    SECTION("duplicate frequency rejected") {
        CHECK_THROWS_AS(
            parse_touchstone(
                std::string("# Hz S RI R 50\n1 0 0 0 0 0 0 0 0\n1 0 0 0 0 0 0 0 0\n")),
            ParseError);
    }
    SECTION("duplicate option line") {
        CHECK_THROWS_AS(parse_touchstone(std::string("# Hz S RI R 50\n# Hz S RI R 50\n")),
                        ParseError);
    }
}

TEST_CASE("writer golden output", "[trace_io]") {
    TouchstoneDocument doc;
    doc.options.unit = FrequencyUnit::ghz;
    doc.options.format = DataFormat::ri;
    NetworkRow row;
    row.frequency_hz = 7.2e9;
    row.s = {Complex(0.0, 0.0), Complex(0.5, 0.0), Complex(0.0, 0.0), Complex(0.0, 0.0)};
    doc.network_data.push_back(row);
    const std::string expected =
        "# GHz S RI R 50\n"
        "7.2000000000000002e+00 0.0000000000000000e+00 0.0000000000000000e+00 "
        "5.0000000000000000e-01 0.0000000000000000e+00 0.0000000000000000e+00 "
        "0.0000000000000000e+00 0.0000000000000000e+00 0.0000000000000000e+00\n";
    CHECK(write_touchstone(doc) == expected);
}

TEST_CASE("round-trip through writer on a synthetic trace", "[trace_io]") {
    ResonatorModel model{7.2e9, 1e5, 0.8, 0.2, Complex(0.01, -0.02)};
    auto trace = synth_s21(model, resonance_grid(7.2e9, 1e5, 6.0, 1001), 1e-4, 7);
    auto doc = make_s21_document(trace.frequencies(), trace.values(), FrequencyUnit::ghz);
    auto back = parse_touchstone(write_touchstone(doc));
    REQUIRE(back.network_data.size() == trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        CHECK(std::abs(back.network_data[i].frequency_hz - trace.frequency(i)) <=
              1e-12 * trace.frequency(i));
        CHECK(rel_diff(back.network_data[i].s[1], trace.value(i)) < 1e-12);
    }
}

TEST_CASE("round-trip property over random documents", "[trace_io]") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> unit_pick(0, 3);
    for (int iter = 0; iter < 200; ++iter) {
        TouchstoneDocument doc;
        doc.options.unit = static_cast<FrequencyUnit>(unit_pick(rng));
        doc.network_data = random_rows(rng, 20);
        auto back = parse_touchstone(write_touchstone(doc));
        REQUIRE(back.network_data.size() == doc.network_data.size());
        CHECK(back.options.unit == doc.options.unit);
        for (std::size_t i = 0; i < doc.network_data.size(); ++i) {
            CHECK(std::abs(back.network_data[i].frequency_hz -
                           doc.network_data[i].frequency_hz) <=
                  1e-12 * doc.network_data[i].frequency_hz);
            for (int p = 0; p < 4; ++p)
                CHECK(rel_diff(back.network_data[i].s[static_cast<std::size_t>(p)],
                               doc.network_data[i].s[static_cast<std::size_t>(p)]) < 1e-12);
        }
    }
}

TEST_CASE("unit and format equivariance", "[trace_io]") {
    std::mt19937_64 rng(99);
    auto rows = random_rows(rng, 12);

    SECTION("GHz vs Hz declarations parse identically") {
        auto a = parse_touchstone(encode_document(rows, FrequencyUnit::ghz, DataFormat::ri));
        auto b = parse_touchstone(encode_document(rows, FrequencyUnit::hz, DataFormat::ri));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(std::abs(a.network_data[i].frequency_hz - b.network_data[i].frequency_hz) <=
                  1e-9);
            for (int p = 0; p < 4; ++p)
                CHECK(a.network_data[i].s[static_cast<std::size_t>(p)] ==
                      b.network_data[i].s[static_cast<std::size_t>(p)]);
        }
    }
    SECTION("RI vs MA vs DB encodings agree within 1e-10") {
        auto ri = parse_touchstone(encode_document(rows, FrequencyUnit::mhz, DataFormat::ri));
        auto ma = parse_touchstone(encode_document(rows, FrequencyUnit::mhz, DataFormat::ma));
        auto db = parse_touchstone(encode_document(rows, FrequencyUnit::mhz, DataFormat::db));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int p = 0; p < 4; ++p) {
                const auto pi = static_cast<std::size_t>(p);
                CHECK(rel_diff(ri.network_data[i].s[pi], ma.network_data[i].s[pi]) < 1e-10);
                CHECK(rel_diff(ri.network_data[i].s[pi], db.network_data[i].s[pi]) < 1e-10);
            }
    }
    SECTION("DB input re-emitted as RI preserves values") {
        auto db = parse_touchstone(encode_document(rows, FrequencyUnit::khz, DataFormat::db));
        auto back = parse_touchstone(write_touchstone(db));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int p = 0; p < 4; ++p)
                CHECK(rel_diff(back.network_data[i].s[static_cast<std::size_t>(p)],
                               rows[i].s[static_cast<std::size_t>(p)]) < 1e-12);
    }
}

TEST_CASE("extract_trace selects matrix entries", "[trace_io]") {
    std::string text = "# Hz S RI R 50\n";
    text += "1 11 0 21 0 12 0 22 0\n";
    text += "2 11 1 21 1 12 1 22 1\n";
    text += "3 11 2 21 2 12 2 22 2\n";
    auto doc = parse_touchstone(text, "sel.s2p");

    auto s21 = extract_trace(doc, "S21");
    CHECK(s21.value(0) == Complex(21.0, 0.0));
    CHECK(s21.parameter_label() == "S21");
    CHECK(s21.metadata().source_file == "sel.s2p");

    auto s11 = extract_trace(doc, "S11");
    CHECK(s11.value(2) == Complex(11.0, 2.0));

    CHECK_THROWS_AS(extract_trace(doc, "S31"), std::invalid_argument);
}

TEST_CASE("csv trace parsing", "[trace_io]") {
    SECTION("rectangular columns") {
        auto tr = parse_csv_trace("f,re,im\n7.2e9,0.5,0\n7.3e9,0.4,0.1\n7.4e9,0.3,0.2\n",
                                  CsvColumnMap::rectangular());
        REQUIRE(tr.size() == 3);
        CHECK(tr.value(0) == Complex(0.5, 0.0));
        CHECK(tr.frequency(0) == 7.2e9);
    }
    SECTION("dB/degree columns") {
        auto tr = parse_csv_trace(
            "f,mag_db,phase_deg\n1e9,-6.0206,0\n2e9,-6.0206,90\n3e9,0,0\n",
            CsvColumnMap::polar_db());
        CHECK(tr.value(0).real() == Catch::Approx(0.5).margin(1e-6));
        CHECK(tr.value(1).imag() == Catch::Approx(0.5).margin(1e-6));
        CHECK(tr.value(2) == Complex(1.0, 0.0));
    }
    SECTION("shuffled rows rejected") {
        CHECK_THROWS_AS(parse_csv_trace("f,re,im\n2e9,0,0\n1e9,0,0\n3e9,0,0\n",
                                        CsvColumnMap::rectangular()),
                        ParseError);
    }
    SECTION("missing column named in error") {
        try {
            parse_csv_trace("f,re\n1e9,0\n", CsvColumnMap::rectangular());
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("'im'") != std::string::npos);
        }
    }
    SECTION("unparsable cell reports row and column") {
        try {
            parse_csv_trace("f,re,im\n1e9,0,0\n2e9,oops,0\n3e9,0,0\n",
                            CsvColumnMap::rectangular(), "vals.csv");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 3") != std::string::npos);
            CHECK(msg.find("'re'") != std::string::npos);
        }
    }
}

TEST_CASE("trace invariants enforced", "[trace_io]") {
    std::vector<double> f{1.0, 2.0, 3.0};
    std::vector<Complex> v{{0, 0}, {0, 0}, {0, 0}};
    CHECK_NOTHROW(ComplexTrace(f, v, "S21"));
    CHECK_THROWS_AS(ComplexTrace({1.0, 2.0}, {{0, 0}, {0, 0}}, "S21"),
                    std::invalid_argument);
    CHECK_THROWS_AS(ComplexTrace({1.0, 1.0, 2.0}, v, "S21"), std::invalid_argument);
    std::vector<Complex> bad{{0, 0}, {std::nan(""), 0}, {0, 0}};
    CHECK_THROWS_AS(ComplexTrace(f, bad, "S21"), std::invalid_argument);
}
