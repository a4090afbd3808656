#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "dielkit/q_budget.hpp"

namespace dielkit {

/// A central value with an absolute uncertainty.
struct UncertainValue {
    double value = 0.0;
    double abs_unc = 0.0;

    UncertainValue() = default;
    UncertainValue(double v, double unc) : value(v), abs_unc(unc) {
        if (unc < 0.0)
            throw std::invalid_argument("uncertain value: abs_unc must be >= 0");
    }

    double rel_unc() const {
        if (value == 0.0)
            throw std::domain_error("relative uncertainty undefined for value = 0");
        return abs_unc / std::abs(value);
    }
};

/// Two extreme determinations of the same quantity (e.g. simulated vs
/// measured external quality factors).
struct ExtremeCasePair {
    double case_a = 0.0;
    double case_b = 0.0;

    ExtremeCasePair(double a, double b) : case_a(a), case_b(b) {
        if (!(a > 0.0) || !(b > 0.0))
            throw std::invalid_argument("extreme-case pair: both values must be > 0");
    }

    UncertainValue interval() const {
        return UncertainValue(0.5 * (case_a + case_b), 0.5 * std::abs(case_a - case_b));
    }
};

/// Dielectric quality factor with the coupling calibration treated as a
/// two-extreme-case interval: q_d is computed for both coupling sets and
/// reported as midpoint +- half the spread.
inline UncertainValue qd_interval(double q_loaded, const CouplingSet& couplings_case_a,
                                  const CouplingSet& couplings_case_b,
                                  bool assume_walls_lossless = true,
                                  std::optional<double> q0_intrinsic = std::nullopt) {
    const double qd_a = dielectric_q(unloaded_q(q_loaded, couplings_case_a),
                                     assume_walls_lossless, q0_intrinsic);
    const double qd_b = dielectric_q(unloaded_q(q_loaded, couplings_case_b),
                                     assume_walls_lossless, q0_intrinsic);
    return ExtremeCasePair(qd_a, qd_b).interval();
}

/// Filling-factor uncertainty bounded by the misaligned-sample extreme
/// case: nominal value +- the offset-case deviation. Unit-agnostic
/// (fractions or percent, as long as both inputs agree).
inline UncertainValue filling_uncertainty(double p_nominal, double p_offset_case) {
    if (p_nominal < 0.0 || p_offset_case < 0.0)
        throw std::invalid_argument("filling_uncertainty: inputs must be >= 0");
    return UncertainValue(p_nominal, std::abs(p_nominal - p_offset_case));
}

/// Quadrature combination of the two relative contributions to the loss
/// tangent: sqrt(rel_p^2 + rel_qd^2).
inline double combine_rel(double rel_p, double rel_qd) {
    if (rel_p < 0.0 || rel_qd < 0.0)
        throw std::invalid_argument("combine_rel: inputs must be >= 0");
    return std::hypot(rel_p, rel_qd);
}

/// Attach the combined relative uncertainty to a loss-tangent value.
inline UncertainValue tan_with_uncertainty(double tan_value, double rel_tan) {
    if (!(tan_value > 0.0))
        throw std::invalid_argument("tan_with_uncertainty: tan value must be > 0");
    if (rel_tan < 0.0)
        throw std::invalid_argument("tan_with_uncertainty: rel_tan must be >= 0");
    return UncertainValue(tan_value, tan_value * rel_tan);
}

} // namespace dielkit
