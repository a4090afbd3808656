#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dielkit {

/// One coupler port: a finite external quality factor, or disengaged
/// entirely. A decoupled port contributes exactly zero to the loss sum.
using PortCoupling = std::optional<double>;

constexpr PortCoupling decoupled_port() { return std::nullopt; }

enum class CouplingSource { measured, simulated };

/// External quality factors of up to four coupler ports.
struct CouplingSet {
    std::vector<PortCoupling> q_ext;
    CouplingSource source = CouplingSource::measured;

    CouplingSet() = default;
    CouplingSet(std::vector<PortCoupling> ports, CouplingSource src = CouplingSource::measured)
        : q_ext(std::move(ports)), source(src) {
        if (q_ext.size() > 4)
            throw std::invalid_argument("coupling set: at most 4 ports, got " +
                                        std::to_string(q_ext.size()));
        for (const auto& q : q_ext)
            if (q && !(*q > 0.0))
                throw std::invalid_argument("coupling set: finite q_ext must be > 0");
    }

    /// Sum of 1/q_ext over the coupled ports.
    double inverse_sum() const {
        double s = 0.0;
        for (const auto& q : q_ext)
            if (q) s += 1.0 / *q;
        return s;
    }
};

struct QBudget {
    double q_loaded = 0.0;
    double q_unloaded = 0.0;
    double q_dielectric = 0.0;
    bool q_intrinsic_assumed_infinite = true;
};

/// Remove the external-coupling losses from the loaded quality factor:
/// 1/q_unloaded = 1/q_loaded - sum_i 1/q_ext_i. The cavity must be
/// undercoupled; anything else indicates a calibration fault and is a hard
/// error.
inline double unloaded_q(double q_loaded, const CouplingSet& couplings) {
    if (!(q_loaded > 0.0))
        throw std::invalid_argument("unloaded_q: q_loaded must be > 0");
    const double inv = 1.0 / q_loaded - couplings.inverse_sum();
    if (!(inv > 0.0))
        throw std::domain_error(
            "unloaded_q: external losses exceed or equal the total (overcoupled or "
            "degenerate input); check the coupling calibration");
    return 1.0 / inv;
}

/// Dielectric quality factor. When the cavity walls are superconducting the
/// intrinsic loss is negligible and q_d equals q_unloaded; otherwise an
/// explicit intrinsic q_0 must be supplied and its loss is subtracted.
inline double dielectric_q(double q_unloaded, bool assume_walls_lossless,
                           std::optional<double> q0_intrinsic = std::nullopt) {
    if (!(q_unloaded > 0.0))
        throw std::invalid_argument("dielectric_q: q_unloaded must be > 0");
    if (assume_walls_lossless) return q_unloaded;
    if (!q0_intrinsic)
        throw std::invalid_argument(
            "dielectric_q: q_0 required when walls are not assumed lossless");
    if (!(*q0_intrinsic > 0.0))
        throw std::invalid_argument("dielectric_q: q_0 must be > 0");
    const double inv = 1.0 / q_unloaded - 1.0 / *q0_intrinsic;
    if (!(inv > 0.0))
        throw std::domain_error("dielectric_q: wall losses exceed or equal the total");
    return 1.0 / inv;
}

/// Coupling coefficient beta_i = q_unloaded / q_ext_i; a decoupled port has
/// beta = 0. Undercoupled means beta < 1.
inline double coupling_coefficient(double q_unloaded, const PortCoupling& q_ext) {
    if (!(q_unloaded > 0.0))
        throw std::invalid_argument("coupling_coefficient: q_unloaded must be > 0");
    if (!q_ext) return 0.0;
    if (!(*q_ext > 0.0))
        throw std::invalid_argument("coupling_coefficient: q_ext must be > 0");
    return q_unloaded / *q_ext;
}

/// Loaded quality factor assembled from its channels; the forward direction
/// of the budget, used for consistency checks and synthetic data.
inline double loaded_q_from_channels(double q_dielectric, const CouplingSet& couplings,
                                     std::optional<double> q0_intrinsic = std::nullopt) {
    if (!(q_dielectric > 0.0))
        throw std::invalid_argument("loaded_q_from_channels: q_dielectric must be > 0");
    double inv = 1.0 / q_dielectric + couplings.inverse_sum();
    if (q0_intrinsic) {
        if (!(*q0_intrinsic > 0.0))
            throw std::invalid_argument("loaded_q_from_channels: q_0 must be > 0");
        inv += 1.0 / *q0_intrinsic;
    }
    return 1.0 / inv;
}

} // namespace dielkit
