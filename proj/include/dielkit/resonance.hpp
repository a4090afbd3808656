#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "dielkit/detail/levmar.hpp"
#include "dielkit/trace.hpp"

namespace dielkit {

/// Raised when a fitting stage cannot proceed (degenerate geometry,
/// insufficient sweep span, ambiguous orientation).
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Algebraic circle fit of the in-phase/quadrature samples.
struct CircleFit {
    Complex center;
    double radius = 0.0;
    double rms = 0.0;  // perpendicular residual
};

/// One-pole transmission model:
///   S21(f) = amplitude * exp(i*detuning_angle) / (1 + 2i*q_loaded*(f-f_res)/f_res)
///            + background
struct ResonatorModel {
    double f_res = 0.0;
    double q_loaded = 0.0;
    double amplitude = 1.0;
    double detuning_angle = 0.0;
    Complex background{0.0, 0.0};

    Complex evaluate(double f) const {
        const Complex num = std::polar(amplitude, detuning_angle);
        const Complex den(1.0, 2.0 * q_loaded * (f - f_res) / f_res);
        return num / den + background;
    }

    double bandwidth() const { return f_res / q_loaded; }
};

/// Values from the circle + half-power stage, kept as diagnostics next to
/// the refined parameters.
struct GeometricEstimate {
    double f_res = 0.0;
    double bandwidth = 0.0;
    double q_loaded = 0.0;
    double detuning_angle = 0.0;
    double f_minus = 0.0;
    double f_plus = 0.0;
};

struct ResonanceFit {
    double f_res = 0.0;
    double bandwidth = 0.0;
    double q_loaded = 0.0;        // = f_res / bandwidth by construction
    double detuning_angle = 0.0;  // in (-pi, pi]
    Complex s21_peak{0.0, 0.0};
    double residual_rms = 0.0;
    double f_minus = 0.0;
    double f_plus = 0.0;

    bool degraded = false;  // refinement failed; values are the geometric ones
    int refine_iterations = 0;
    CircleFit circle;
    GeometricEstimate geometric;
    ResonatorModel model;
};

namespace detail {

inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

} // namespace detail

/// Least-squares circle through the IQ samples (Kasa method, solved on
/// mean-centered data). rms is the perpendicular residual.
inline CircleFit fit_iq_circle(const ComplexTrace& trace) {
    const auto& z = trace.values();
    const std::size_t n = z.size();
    if (n < 5)
        throw std::invalid_argument("fit_iq_circle: needs at least 5 points, got " +
                                    std::to_string(n));

    Complex mean{0.0, 0.0};
    for (const auto& v : z) mean += v;
    mean /= static_cast<double>(n);

    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (const auto& v : z) {
        const double x = v.real() - mean.real();
        const double y = v.imag() - mean.imag();
        const Eigen::Vector3d row(2.0 * x, 2.0 * y, 1.0);
        A += row * row.transpose();
        rhs += row * (x * x + y * y);
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    lu.setThreshold(1e-10);
    if (lu.rank() < 3)
        throw FitError("fit_iq_circle: degenerate (collinear) samples");
    const Eigen::Vector3d sol = lu.solve(rhs);
    const double r2 = sol[2] + sol[0] * sol[0] + sol[1] * sol[1];
    if (!(r2 > 0.0) || !std::isfinite(r2))
        throw FitError("fit_iq_circle: degenerate circle");

    CircleFit fit;
    fit.center = Complex(sol[0] + mean.real(), sol[1] + mean.imag());
    fit.radius = std::sqrt(r2);
    double ss = 0.0;
    for (const auto& v : z) {
        const double d = std::abs(v - fit.center) - fit.radius;
        ss += d * d;
    }
    fit.rms = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

/// Rotation that brings the off-resonant limit onto the real axis with the
/// resonance point at the farthest real position. The off-resonant limit is
/// taken as the average of the sweep endpoints; for a sweep that brackets
/// the resonance symmetrically its residual lies along the circle diameter
/// and does not bias the angle.
inline double estimate_detuning_angle(const ComplexTrace& trace, const CircleFit& circle) {
    const auto& z = trace.values();
    const Complex p_off = 0.5 * (z.front() + z.back());
    const Complex dir = circle.center - p_off;
    if (std::abs(dir) < 1e-9 * circle.radius)
        throw FitError("estimate_detuning_angle: off-resonant reference coincides "
                       "with circle center; orientation ambiguous");
    const double delta = std::arg(dir);

    // The sweep must actually reach the resonance side of the circle.
    double closest = std::numbers::pi;
    for (const auto& v : z) {
        const double a = std::abs(detail::wrap_angle(std::arg(v - circle.center) - delta));
        closest = std::min(closest, a);
    }
    if (closest > std::numbers::pi / 4.0)
        throw FitError("estimate_detuning_angle: trace does not cross the resonance; "
                       "orientation ambiguous");
    return delta;
}

/// Multiply every sample by exp(-i*delta); frequencies unchanged.
inline ComplexTrace phase_correct(const ComplexTrace& trace, double detuning_angle) {
    const Complex rot = std::polar(1.0, -detuning_angle);
    return trace.map_values([rot](const Complex& v) { return v * rot; });
}

/// Locate the half-power frequencies of a phase-corrected trace.
///
/// The half-power points are where |Im S21| peaks; seen from the fitted
/// circle center those two loci sit at angles +-pi/2 from the resonance
/// direction. The angle-vs-frequency curve crosses those levels steeply, so
/// the sub-sample position is taken from the linear crossing of the
/// center-referenced angle nearest each discrete |Im| extremum. This stays
/// accurate at noise levels where interpolating the flat |Im| extremum
/// directly does not.
inline std::pair<double, double> find_half_power_points(const ComplexTrace& corrected) {
    const auto& z = corrected.values();
    const auto& f = corrected.frequencies();
    const std::size_t n = z.size();
    const CircleFit circle = fit_iq_circle(corrected);

    // lightly smoothed Im for locating the two extrema
    const std::size_t w = std::max<std::size_t>(1, n / 200);
    std::vector<double> sm(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > w ? i - w : 0;
        const std::size_t hi = std::min(n - 1, i + w);
        double s = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) s += z[k].imag();
        sm[i] = s / static_cast<double>(hi - lo + 1);
    }
    const std::size_t i_max =
        static_cast<std::size_t>(std::max_element(sm.begin(), sm.end()) - sm.begin());
    const std::size_t i_min =
        static_cast<std::size_t>(std::min_element(sm.begin(), sm.end()) - sm.begin());
    if (i_max == 0 || i_max == n - 1 || i_min == 0 || i_min == n - 1)
        throw FitError("find_half_power_points: |Im S21| extremum at sweep boundary; "
                       "span too narrow");

    std::vector<double> theta(n);
    for (std::size_t i = 0; i < n; ++i) theta[i] = std::arg(z[i] - circle.center);

    auto crossing = [&](std::size_t near_idx, double target) -> double {
        bool found = false;
        std::size_t best_dist = n;
        double best_f = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double d0 = detail::wrap_angle(theta[i] - target);
            const double d1 = detail::wrap_angle(theta[i + 1] - target);
            if (std::abs(d0) >= 1.0 || std::abs(d1) >= 1.0) continue;
            if (d0 * d1 > 0.0) continue;
            const double fr =
                d1 == d0 ? f[i] : f[i] + (f[i + 1] - f[i]) * (-d0) / (d1 - d0);
            const std::size_t dist =
                std::min(i > near_idx ? i - near_idx : near_idx - i,
                         i + 1 > near_idx ? i + 1 - near_idx : near_idx - i - 1);
            if (!found || dist < best_dist) {
                found = true;
                best_dist = dist;
                best_f = fr;
            }
        }
        if (!found)
            throw FitError("find_half_power_points: half-power angle crossing not "
                           "bracketed; sweep span insufficient");
        return best_f;
    };

    double f_lo = crossing(i_max, std::numbers::pi / 2.0);
    double f_hi = crossing(i_min, -std::numbers::pi / 2.0);
    if (f_lo > f_hi) std::swap(f_lo, f_hi);
    if (!(f_lo < f_hi))
        throw FitError("find_half_power_points: half-power points coincide");
    return {f_lo, f_hi};
}

/// Uniform grid of n points spanning the given number of bandwidths around
/// f_res.
inline std::vector<double> resonance_grid(double f_res, double q_loaded,
                                          double span_bandwidths, std::size_t n_points) {
    if (n_points < 2) throw std::invalid_argument("resonance_grid: need >= 2 points");
    const double half = 0.5 * span_bandwidths * f_res / q_loaded;
    std::vector<double> f(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        f[i] = f_res - half +
               2.0 * half * static_cast<double>(i) / static_cast<double>(n_points - 1);
    return f;
}

/// Evaluate the one-pole model on a grid and add complex Gaussian noise of
/// standard deviation sigma per quadrature. Deterministic for a fixed seed.
inline ComplexTrace synth_s21(const ResonatorModel& model, const std::vector<double>& grid,
                              double noise_sigma = 0.0, std::uint64_t seed = 0) {
    if (noise_sigma < 0.0)
        throw std::invalid_argument("synth_s21: noise sigma must be >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Complex> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Complex s = model.evaluate(grid[i]);
        if (noise_sigma > 0.0) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            s += noise_sigma * Complex(re, im);
        }
        v[i] = s;
    }
    TraceMetadata meta;
    meta.source_file = "<synthetic>";
    return ComplexTrace(grid, std::move(v), "S21", std::move(meta));
}

namespace detail {

// Parameter order for the model refinement.
enum { kF0, kQ, kAmp, kDelta, kBgRe, kBgIm, kNumParams };

inline Eigen::VectorXd model_residuals(const Eigen::VectorXd& p, const ComplexTrace& tr) {
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(tr.size()));
    ResonatorModel m{p[kF0], p[kQ], p[kAmp], p[kDelta], Complex(p[kBgRe], p[kBgIm])};
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const Complex d = m.evaluate(tr.frequency(i)) - tr.value(i);
        r[2 * static_cast<Eigen::Index>(i)] = d.real();
        r[2 * static_cast<Eigen::Index>(i) + 1] = d.imag();
    }
    return r;
}

inline Eigen::MatrixXd model_jacobian(const Eigen::VectorXd& p, const ComplexTrace& tr) {
    Eigen::MatrixXd J(2 * static_cast<Eigen::Index>(tr.size()), kNumParams);
    const double f0 = p[kF0], q = p[kQ], a = p[kAmp], delta = p[kDelta];
    const Complex E = std::polar(1.0, delta);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double f = tr.frequency(i);
        const double t = 2.0 * q * (f - f0) / f0;
        const Complex D = 1.0 / Complex(1.0, t);
        const Complex D2 = D * D;
        const Complex dS_dt = Complex(0.0, -1.0) * a * E * D2;
        const Complex cols[kNumParams] = {
            dS_dt * (-2.0 * q * f / (f0 * f0)),  // d/d f0
            dS_dt * (2.0 * (f - f0) / f0),       // d/d Q
            E * D,                               // d/d amplitude
            Complex(0.0, 1.0) * a * E * D,       // d/d delta
            Complex(1.0, 0.0),                   // d/d Re(bg)
            Complex(0.0, 1.0),                   // d/d Im(bg)
        };
        for (int c = 0; c < kNumParams; ++c) {
            J(2 * static_cast<Eigen::Index>(i), c) = cols[c].real();
            J(2 * static_cast<Eigen::Index>(i) + 1, c) = cols[c].imag();
        }
    }
    return J;
}

inline double trace_residual_rms(const ResonatorModel& m, const ComplexTrace& tr) {
    double ss = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i)
        ss += std::norm(m.evaluate(tr.frequency(i)) - tr.value(i));
    return std::sqrt(ss / static_cast<double>(tr.size()));
}

} // namespace detail

/// Full fitting pipeline: circle fit -> detuning estimate -> phase
/// correction -> half-power points -> Q_L = f_res/BW, followed by a
/// Levenberg-Marquardt refinement of the one-pole model. The reported fit
/// uses the refined parameters; the geometric values stay in diagnostics.
/// If the refinement does not converge the geometric estimate is returned
/// with the degraded flag set.
inline ResonanceFit fit_resonance(const ComplexTrace& trace) {
    const CircleFit circle = fit_iq_circle(trace);
    const double delta0 = estimate_detuning_angle(trace, circle);
    const ComplexTrace corrected = phase_correct(trace, delta0);
    const auto [f_lo, f_hi] = find_half_power_points(corrected);

    GeometricEstimate geo;
    geo.f_minus = f_lo;
    geo.f_plus = f_hi;
    geo.bandwidth = f_hi - f_lo;
    geo.f_res = 0.5 * (f_lo + f_hi);
    geo.q_loaded = geo.f_res / geo.bandwidth;
    geo.detuning_angle = delta0;

    // Initial model: amplitude from the circle diameter, background from the
    // endpoint average with the model tail removed.
    const double a0 = 2.0 * circle.radius;
    const Complex p_off = 0.5 * (trace.values().front() + trace.values().back());
    auto tail = [&](double f) {
        return 1.0 / Complex(1.0, 2.0 * geo.q_loaded * (f - geo.f_res) / geo.f_res);
    };
    const Complex bg0 = p_off - a0 * std::polar(1.0, delta0) *
                                    0.5 * (tail(trace.min_frequency()) +
                                           tail(trace.max_frequency()));

    Eigen::VectorXd p(detail::kNumParams);
    p[detail::kF0] = geo.f_res;
    p[detail::kQ] = geo.q_loaded;
    p[detail::kAmp] = a0;
    p[detail::kDelta] = delta0;
    p[detail::kBgRe] = bg0.real();
    p[detail::kBgIm] = bg0.imag();

    Eigen::VectorXd scales(detail::kNumParams);
    const double bscale = std::max({a0, std::abs(bg0), 1e-30});
    scales << geo.f_res, std::max(geo.q_loaded, 1.0), std::max(a0, 1e-30), 1.0, bscale,
        bscale;

    detail::LevMarOptions opt;  // 200 iterations, relative step 1e-10
    auto res = detail::levenberg_marquardt(
        [&](const Eigen::VectorXd& q) { return detail::model_residuals(q, trace); },
        [&](const Eigen::VectorXd& q) { return detail::model_jacobian(q, trace); }, p,
        scales, opt);

    // Normalize the sign/angle gauge: amplitude >= 0, angle in (-pi, pi].
    if (res.params[detail::kAmp] < 0.0) {
        res.params[detail::kAmp] = -res.params[detail::kAmp];
        res.params[detail::kDelta] += std::numbers::pi;
    }
    res.params[detail::kDelta] = detail::wrap_angle(res.params[detail::kDelta]);

    const bool refined_valid = res.converged && res.params[detail::kQ] > 0.0 &&
                               res.params[detail::kAmp] > 0.0 &&
                               res.params[detail::kF0] >= trace.min_frequency() &&
                               res.params[detail::kF0] <= trace.max_frequency();

    ResonanceFit fit;
    fit.circle = circle;
    fit.geometric = geo;
    fit.refine_iterations = res.iterations;
    if (refined_valid) {
        fit.model = ResonatorModel{res.params[detail::kF0], res.params[detail::kQ],
                                   res.params[detail::kAmp], res.params[detail::kDelta],
                                   Complex(res.params[detail::kBgRe],
                                           res.params[detail::kBgIm])};
        fit.degraded = false;
    } else {
        fit.model = ResonatorModel{geo.f_res, geo.q_loaded, a0, delta0, bg0};
        fit.degraded = true;
    }
    fit.f_res = fit.model.f_res;
    fit.bandwidth = fit.model.bandwidth();
    fit.q_loaded = fit.f_res / fit.bandwidth;
    fit.detuning_angle = detail::wrap_angle(fit.model.detuning_angle);
    fit.f_minus = fit.f_res - 0.5 * fit.bandwidth;
    fit.f_plus = fit.f_minus + fit.bandwidth;
    fit.s21_peak = fit.model.evaluate(fit.f_res);
    fit.residual_rms = detail::trace_residual_rms(fit.model, trace);
    return fit;
}

} // namespace dielkit
