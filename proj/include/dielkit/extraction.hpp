#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dielkit/q_budget.hpp"

namespace dielkit {

/// Diagonal relative-permittivity tensor diag(eps_perp, eps_perp, eps_par)
/// of a uniaxial crystal.
struct PermittivityTensor {
    double eps_perp = 1.0;
    double eps_par = 1.0;

    PermittivityTensor() = default;
    PermittivityTensor(double perp, double par) : eps_perp(perp), eps_par(par) {
        if (!(perp > 1.0) || !(par > 1.0))
            throw std::domain_error("permittivity tensor: components must be > 1 "
                                    "(nonphysical result)");
    }
};

/// Change of the two tensor components, e.g. between temperature points.
struct PermittivityShift {
    double d_perp = 0.0;
    double d_par = 0.0;
};

enum class ModeKind { te, tm, hom };

inline std::string mode_kind_name(ModeKind k) {
    switch (k) {
    case ModeKind::te: return "TE";
    case ModeKind::tm: return "TM";
    case ModeKind::hom: return "HOM";
    }
    return "?";
}

/// Frequency sensitivity to the tensor components, Hz per unit relative
/// permittivity. These are calibration inputs obtained elsewhere, not
/// computed here.
struct ModeSensitivity {
    double df_deps_perp_hz = 0.0;
    double df_deps_par_hz = 0.0;
};

/// Energy filling factors of the sample per field axis, in [0, 1].
struct FillingFactors {
    double p_perp = 0.0;
    double p_par = 0.0;
};

/// Static description of one monitored cavity mode.
struct ModeSpec {
    std::string name;
    ModeKind kind = ModeKind::te;
    double f_reference_hz = 0.0;  // frequency at the reference permittivity
    ModeSensitivity sensitivity;
    FillingFactors filling;
    FillingFactors filling_offset_case;  // misaligned-sample extreme for uncertainty
    CouplingSet couplings_measured;
    CouplingSet couplings_simulated;

    void validate() const {
        if (name.empty()) throw std::invalid_argument("mode: name must not be empty");
        if (!(f_reference_hz > 0.0))
            throw std::invalid_argument("mode " + name + ": f_reference_hz must be > 0");
        auto check_filling = [&](const FillingFactors& p, const char* what) {
            if (p.p_perp < 0.0 || p.p_perp > 1.0 || p.p_par < 0.0 || p.p_par > 1.0)
                throw std::invalid_argument("mode " + name + ": " + what +
                                            " filling factors must be in [0,1]");
        };
        check_filling(filling, "nominal");
        check_filling(filling_offset_case, "offset-case");
        switch (kind) {
        case ModeKind::te:
            if (filling.p_par != 0.0)
                throw std::invalid_argument("mode " + name +
                                            ": TE mode must have p_par = 0");
            break;
        case ModeKind::tm:
            if (filling.p_perp != 0.0)
                throw std::invalid_argument("mode " + name +
                                            ": TM mode must have p_perp = 0");
            break;
        case ModeKind::hom:
            if (filling.p_perp + filling.p_par > 1.0)
                throw std::invalid_argument("mode " + name +
                                            ": HOM fillings must satisfy "
                                            "p_perp + p_par <= 1");
            break;
        }
    }
};

/// Tensor loss tangent. Components must be non-negative; the sanity window
/// for this material class is checked by callers as a warning, not an
/// error.
struct LossTangent {
    double tan_perp = 0.0;
    double tan_par = 0.0;

    LossTangent() = default;
    LossTangent(double perp, double par) : tan_perp(perp), tan_par(par) {
        if (perp < 0.0 || par < 0.0)
            throw std::domain_error("loss tangent: components must be >= 0");
    }
};

/// Soft sanity window for loss tangents of low-loss dielectrics.
struct LossTangentBounds {
    double lo = 1e-8;
    double hi = 1e-2;
    bool contains(double t) const { return t >= lo && t <= hi; }
};

struct DeltaEpsSolution {
    PermittivityShift shift;
    double residual_norm = 0.0;     // Hz, of the least-squares solve
    double condition_number = 0.0;  // of the sensitivity matrix
};

/// Invert the frequency-shift calibration: solve
///   df_m = (df/d eps_perp)_m * d_eps_perp + (df/d eps_par)_m * d_eps_par
/// over the given modes. Exactly determined with two modes, least squares
/// with more. Shifts are keyed by mode name.
inline DeltaEpsSolution delta_eps_from_shifts(const std::map<std::string, double>& shifts_hz,
                                              const std::vector<ModeSpec>& modes) {
    std::vector<const ModeSpec*> used;
    for (const auto& m : modes)
        if (shifts_hz.count(m.name)) used.push_back(&m);
    if (used.size() < 2)
        throw std::invalid_argument(
            "delta_eps_from_shifts: need shifts for at least 2 modes, got " +
            std::to_string(used.size()));
    for (const auto& [name, df] : shifts_hz) {
        bool known = false;
        for (const auto* m : used)
            if (m->name == name) known = true;
        if (!known)
            throw std::invalid_argument("delta_eps_from_shifts: shift for unknown mode '" +
                                        name + "'");
    }

    Eigen::MatrixXd A(static_cast<Eigen::Index>(used.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(used.size()));
    for (std::size_t i = 0; i < used.size(); ++i) {
        A(static_cast<Eigen::Index>(i), 0) = used[i]->sensitivity.df_deps_perp_hz;
        A(static_cast<Eigen::Index>(i), 1) = used[i]->sensitivity.df_deps_par_hz;
        b[static_cast<Eigen::Index>(i)] = shifts_hz.at(used[i]->name);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    DeltaEpsSolution sol;
    sol.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smin > 0.0) || sol.condition_number > 1e8)
        throw std::domain_error(
            "delta_eps_from_shifts: sensitivity matrix singular or ill-conditioned "
            "(condition number > 1e8); need one TE-like and one TM-like mode");

    const Eigen::Vector2d x = svd.solve(b);
    sol.shift.d_perp = x[0];
    sol.shift.d_par = x[1];
    sol.residual_norm = (A * x - b).norm();
    return sol;
}

/// Componentwise application of a permittivity change to a reference
/// tensor. Throws if the result is nonphysical (a component <= 1).
inline PermittivityTensor eps_at_condition(const PermittivityTensor& reference,
                                           const PermittivityShift& delta) {
    return PermittivityTensor(reference.eps_perp + delta.d_perp,
                              reference.eps_par + delta.d_par);
}

/// TE-mode loss tangent: 1/q_d = p_perp * tan_perp.
inline double loss_tangent_te(double q_dielectric, double p_perp) {
    if (!(q_dielectric > 0.0))
        throw std::invalid_argument("loss_tangent_te: q_d must be > 0");
    if (!(p_perp > 0.0) || p_perp > 1.0)
        throw std::invalid_argument("loss_tangent_te: p_perp must be in (0,1]");
    return 1.0 / (p_perp * q_dielectric);
}

/// TM-mode loss tangent: 1/q_d = p_par * tan_par.
inline double loss_tangent_tm(double q_dielectric, double p_par) {
    if (!(q_dielectric > 0.0))
        throw std::invalid_argument("loss_tangent_tm: q_d must be > 0");
    if (!(p_par > 0.0) || p_par > 1.0)
        throw std::invalid_argument("loss_tangent_tm: p_par must be in (0,1]");
    return 1.0 / (p_par * q_dielectric);
}

/// Forward dielectric quality factor of a mode with field components on
/// both axes: 1/q_d = p_perp * tan_perp + p_par * tan_par.
inline double mixed_mode_q(const LossTangent& tan, double p_perp, double p_par) {
    if (p_perp < 0.0 || p_perp > 1.0 || p_par < 0.0 || p_par > 1.0)
        throw std::invalid_argument("mixed_mode_q: fillings must be in [0,1]");
    const double inv = p_perp * tan.tan_perp + p_par * tan.tan_par;
    if (!(inv > 0.0))
        throw std::domain_error("mixed_mode_q: zero total dielectric loss");
    return 1.0 / inv;
}

/// Single-number loss tangent attributed to a mixed mode,
/// 1/((p_perp + p_par) * q_d); the filling-weighted mean of the two tensor
/// tangents, so it always lies between them.
inline double effective_loss_tangent(double q_dielectric, double p_perp, double p_par) {
    if (!(q_dielectric > 0.0))
        throw std::invalid_argument("effective_loss_tangent: q_d must be > 0");
    const double total = p_perp + p_par;
    if (!(total > 0.0))
        throw std::invalid_argument("effective_loss_tangent: zero total filling");
    return 1.0 / (total * q_dielectric);
}

/// Smallest permittivity change resolvable with the given frequency
/// readout resolution and the least sensitive calibration constant.
inline double permittivity_resolution(double readout_resolution_hz,
                                      const std::vector<ModeSpec>& modes) {
    double min_sens = std::numeric_limits<double>::infinity();
    for (const auto& m : modes) {
        const double s = std::max(std::abs(m.sensitivity.df_deps_perp_hz),
                                  std::abs(m.sensitivity.df_deps_par_hz));
        if (s > 0.0) min_sens = std::min(min_sens, s);
    }
    if (!std::isfinite(min_sens))
        throw std::invalid_argument("permittivity_resolution: no mode has a nonzero "
                                    "sensitivity");
    return readout_resolution_hz / min_sens;
}

} // namespace dielkit
