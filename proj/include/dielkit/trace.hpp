#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dielkit {

using Complex = std::complex<double>;

/// Raised by the file parsers; the message carries file/line context.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Where a trace came from, including the option-line settings of the
/// source file when it was a Touchstone document.
struct TraceMetadata {
    std::string source_file;
    std::string frequency_unit = "Hz";
    std::string source_format = "RI";
    double reference_ohm = 50.0;
};

/// Frequency-ordered complex S-parameter samples.
///
/// Invariants enforced on construction: at least 3 points, strictly
/// increasing frequencies, all values finite.
class ComplexTrace {
public:
    ComplexTrace(std::vector<double> frequencies_hz,
                 std::vector<Complex> values,
                 std::string parameter_label,
                 TraceMetadata metadata = {})
        : freq_(std::move(frequencies_hz)),
          values_(std::move(values)),
          label_(std::move(parameter_label)),
          meta_(std::move(metadata))
    {
        if (freq_.size() != values_.size())
            throw std::invalid_argument("trace: frequency/value count mismatch");
        if (freq_.size() < 3)
            throw std::invalid_argument("trace: needs at least 3 points, got " +
                                        std::to_string(freq_.size()));
        for (std::size_t i = 0; i < freq_.size(); ++i) {
            if (!std::isfinite(freq_[i]) || !std::isfinite(values_[i].real()) ||
                !std::isfinite(values_[i].imag()))
                throw std::invalid_argument("trace: non-finite sample at index " +
                                            std::to_string(i));
            if (i > 0 && !(freq_[i] > freq_[i - 1]))
                throw std::invalid_argument(
                    "trace: frequencies not strictly increasing at index " +
                    std::to_string(i));
        }
    }

    std::size_t size() const { return freq_.size(); }
    const std::vector<double>& frequencies() const { return freq_; }
    const std::vector<Complex>& values() const { return values_; }
    double frequency(std::size_t i) const { return freq_[i]; }
    const Complex& value(std::size_t i) const { return values_[i]; }
    const std::string& parameter_label() const { return label_; }
    const TraceMetadata& metadata() const { return meta_; }

    double min_frequency() const { return freq_.front(); }
    double max_frequency() const { return freq_.back(); }

    /// Same frequencies, transformed values.
    template <class Fn>
    ComplexTrace map_values(Fn&& fn) const {
        std::vector<Complex> out(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i)
            out[i] = fn(values_[i]);
        return ComplexTrace(freq_, std::move(out), label_, meta_);
    }

private:
    std::vector<double> freq_;
    std::vector<Complex> values_;
    std::string label_;
    TraceMetadata meta_;
};

} // namespace dielkit
