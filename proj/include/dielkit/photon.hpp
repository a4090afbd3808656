#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dielkit/csv_trace.hpp"
#include "dielkit/detail/levmar.hpp"
#include "dielkit/uncertainty.hpp"

namespace dielkit {

/// Reduced Planck constant, J*s (2018 CODATA, fixed).
inline constexpr double k_hbar = 1.054571817e-34;

inline double dbm_to_watts(double p_dbm) {
    return 1e-3 * std::pow(10.0, p_dbm / 10.0);
}

inline double watts_to_dbm(double p_watts) {
    if (!(p_watts > 0.0))
        throw std::invalid_argument("watts_to_dbm: power must be > 0");
    return 10.0 * std::log10(p_watts / 1e-3);
}

/// P_t = P_in - P_r - P_loss, all in watts.
inline double transmitted_power(double p_in_w, double p_reflected_w, double p_loss_w) {
    if (p_in_w < 0.0 || p_reflected_w < 0.0 || p_loss_w < 0.0)
        throw std::invalid_argument("transmitted_power: powers must be >= 0");
    const double p_t = p_in_w - p_reflected_w - p_loss_w;
    if (p_t < 0.0)
        throw std::domain_error("transmitted_power: inconsistent power accounting "
                                "(P_in < P_r + P_loss)");
    return p_t;
}

/// Average number of photons stored in the mode, from the transmitted
/// power: <n> = P_t * Q_ext2 / (hbar * omega^2).
inline double avg_photon_number(double p_transmitted_w, double q_ext2, double f_res_hz) {
    if (!(p_transmitted_w > 0.0) || !(q_ext2 > 0.0) || !(f_res_hz > 0.0))
        throw std::invalid_argument("avg_photon_number: all inputs must be > 0");
    const double omega = 2.0 * std::numbers::pi * f_res_hz;
    return p_transmitted_w * q_ext2 / (k_hbar * omega * omega);
}

/// Power bookkeeping of one sweep point, stored in linear units.
struct PowerPoint {
    double p_in_w = 0.0;
    double p_reflected_w = 0.0;
    double p_loss_w = 0.0;
    double temperature_k = 0.0;

    double p_transmitted_w() const {
        return transmitted_power(p_in_w, p_reflected_w, p_loss_w);
    }
};

enum class SweepKind { photons, temperature };

struct SweepPoint {
    double abscissa = 0.0;  // average photon number, or temperature in K
    UncertainValue q_d;
};

/// q_d values against a strictly increasing abscissa.
struct SweepSeries {
    SweepKind kind = SweepKind::photons;
    std::vector<SweepPoint> points;

    SweepSeries() = default;
    SweepSeries(SweepKind k, std::vector<SweepPoint> pts)
        : kind(k), points(std::move(pts)) {
        for (std::size_t i = 1; i < points.size(); ++i)
            if (!(points[i].abscissa > points[i - 1].abscissa))
                throw std::invalid_argument(
                    "sweep series: abscissa must be strictly increasing (index " +
                    std::to_string(i) + ")");
    }
};

/// Read a sweep series from CSV. The first column must be named
/// "avg_photons" or "temperature_K" (which sets the kind), followed by
/// "q_d" and optionally "q_d_unc".
inline SweepSeries parse_sweep_csv(const std::string& text,
                                   const std::string& source_name = "<csv>") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(source_name + ": empty input, header row required");
    auto header = detail::split_csv_row(line);
    if (header.empty())
        throw ParseError(source_name + ": empty header row");

    SweepKind kind;
    if (header[0] == "avg_photons")
        kind = SweepKind::photons;
    else if (header[0] == "temperature_K")
        kind = SweepKind::temperature;
    else
        throw ParseError(source_name + ": first column must be 'avg_photons' or "
                                       "'temperature_K', got '" + header[0] + "'");
    auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    auto qd_col = find_col("q_d");
    if (!qd_col) throw ParseError(source_name + ": missing column 'q_d' in header");
    auto unc_col = find_col("q_d_unc");

    std::vector<SweepPoint> pts;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto row = detail::split_csv_row(line);
        SweepPoint p;
        p.abscissa = detail::csv_cell_double(row, 0, header[0], row_no, source_name);
        const double qd =
            detail::csv_cell_double(row, *qd_col, "q_d", row_no, source_name);
        const double unc =
            unc_col ? detail::csv_cell_double(row, *unc_col, "q_d_unc", row_no, source_name)
                    : 0.0;
        p.q_d = UncertainValue(qd, unc);
        pts.push_back(p);
    }
    return SweepSeries(kind, std::move(pts));
}

struct TemperatureTrend {
    double slope = 0.0;      // q_d per kelvin
    double intercept = 0.0;  // q_d at T = 0
    double variation_fraction = 0.0;  // |slope| * span / mean(q_d)
    double threshold = 0.1;
    bool weak_dependence = false;
};

/// Weighted linear regression of q_d against temperature. The dependence is
/// flagged weak when the fitted total variation over the measured range
/// stays below the threshold fraction of the mean q_d.
inline TemperatureTrend temperature_trend(const SweepSeries& series,
                                          double weak_threshold = 0.1) {
    if (series.kind != SweepKind::temperature)
        throw std::invalid_argument("temperature_trend: series must be over temperature");
    const auto& pts = series.points;
    if (pts.size() < 3)
        throw std::invalid_argument("temperature_trend: need at least 3 points, got " +
                                    std::to_string(pts.size()));
    const double span = pts.back().abscissa - pts.front().abscissa;
    if (!(span > 0.0))
        throw std::invalid_argument("temperature_trend: degenerate abscissa");

    bool all_weighted = true;
    for (const auto& p : pts)
        if (!(p.q_d.abs_unc > 0.0)) all_weighted = false;

    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double w = all_weighted ? 1.0 / (p.q_d.abs_unc * p.q_d.abs_unc) : 1.0;
        sw += w;
        sx += w * p.abscissa;
        sy += w * p.q_d.value;
        sxx += w * p.abscissa * p.abscissa;
        sxy += w * p.abscissa * p.q_d.value;
    }
    const double det = sw * sxx - sx * sx;
    if (!(std::abs(det) > 0.0))
        throw std::invalid_argument("temperature_trend: degenerate abscissa");

    TemperatureTrend out;
    out.slope = (sw * sxy - sx * sy) / det;
    out.intercept = (sxx * sy - sx * sxy) / det;
    out.threshold = weak_threshold;
    const double mean = sy / sw;
    out.variation_fraction = std::abs(out.slope) * span / std::abs(mean);
    out.weak_dependence = out.variation_fraction < weak_threshold;
    return out;
}

/// Phenomenological TLS saturation curve for the inverse quality factor:
///   1/q_d(n) = l_tls / sqrt(1 + n/n_c) + l_0
struct SaturationModel {
    double l_tls = 0.0;
    double n_c = 1.0;
    double l_0 = 0.0;

    double inverse_q(double n) const {
        return l_tls / std::sqrt(1.0 + n / n_c) + l_0;
    }
};

/// Generate a sweep series from the saturation model on the given photon
/// numbers (strictly increasing).
inline SweepSeries saturation_series(const SaturationModel& model,
                                     const std::vector<double>& photon_numbers) {
    std::vector<SweepPoint> pts;
    pts.reserve(photon_numbers.size());
    for (double n : photon_numbers) {
        const double inv = model.inverse_q(n);
        if (!(inv > 0.0))
            throw std::invalid_argument("saturation_series: model loss must be > 0");
        pts.push_back({n, UncertainValue(1.0 / inv, 0.0)});
    }
    return SweepSeries(SweepKind::photons, std::move(pts));
}

struct SaturationFit {
    SaturationModel model;
    double residual_rms = 0.0;  // relative, on 1/q_d
    bool converged = false;
    int iterations = 0;
};

struct PowerTrend {
    double spearman = 0.0;  // rank correlation of q_d against <n>
    std::optional<SaturationFit> saturation;
};

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return v[a] < v[b];
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;  // a constant series has no trend
    return sxy / std::sqrt(sxx * syy);
}

// Saturation fit parameters: (l_tls, log n_c, l_0). Loss amplitudes stay
// linear so a flat series can settle at l_tls = 0; n_c is kept positive via
// the log.
inline SaturationFit fit_saturation_once(const std::vector<double>& n,
                                         const std::vector<double>& y,
                                         double l_tls0, double n_c0, double l_00) {
    Eigen::VectorXd p(3);
    p << l_tls0, std::log(n_c0), l_00;
    const double yscale = *std::max_element(y.begin(), y.end());

    auto residuals = [&](const Eigen::VectorXd& q) {
        SaturationModel m{q[0], std::exp(q[1]), q[2]};
        Eigen::VectorXd r(static_cast<Eigen::Index>(n.size()));
        for (std::size_t i = 0; i < n.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = (m.inverse_q(n[i]) - y[i]) / y[i];
        return r;
    };
    auto jacobian = [&](const Eigen::VectorXd& q) {
        const double nc = std::exp(q[1]);
        Eigen::MatrixXd J(static_cast<Eigen::Index>(n.size()), 3);
        for (std::size_t i = 0; i < n.size(); ++i) {
            const double u = 1.0 + n[i] / nc;
            const double s = std::sqrt(u);
            J(static_cast<Eigen::Index>(i), 0) = (1.0 / s) / y[i];
            J(static_cast<Eigen::Index>(i), 1) =
                (q[0] * (n[i] / nc) / (2.0 * u * s)) / y[i];
            J(static_cast<Eigen::Index>(i), 2) = 1.0 / y[i];
        }
        return J;
    };

    Eigen::VectorXd scales(3);
    scales << std::max(yscale, 1e-300), 1.0, std::max(yscale, 1e-300);
    auto res = levenberg_marquardt(residuals, jacobian, p, scales);

    SaturationFit fit;
    fit.model = SaturationModel{res.params[0], std::exp(res.params[1]), res.params[2]};
    fit.residual_rms = std::sqrt(2.0 * res.cost / static_cast<double>(n.size()));
    fit.converged = res.converged;
    fit.iterations = res.iterations;
    return fit;
}

} // namespace detail

/// Monotonicity of q_d against the average photon number, plus an optional
/// fit of the phenomenological saturation curve. The fit is labeled
/// phenomenological on purpose: the data alone cannot separate TLS from
/// other loss channels.
inline PowerTrend power_trend(const SweepSeries& series, bool fit_saturation = true) {
    if (series.kind != SweepKind::photons)
        throw std::invalid_argument("power_trend: series must be over photon number");
    const auto& pts = series.points;
    if (pts.size() < 4)
        throw std::invalid_argument("power_trend: need at least 4 points, got " +
                                    std::to_string(pts.size()));

    std::vector<double> n, q, y;
    for (const auto& p : pts) {
        if (!(p.abscissa > 0.0))
            throw std::invalid_argument("power_trend: photon numbers must be > 0");
        if (!(p.q_d.value > 0.0))
            throw std::invalid_argument("power_trend: q_d must be > 0");
        n.push_back(p.abscissa);
        q.push_back(p.q_d.value);
        y.push_back(1.0 / p.q_d.value);
    }

    PowerTrend out;
    out.spearman = detail::spearman_rho(n, q);
    if (!fit_saturation) return out;

    // Starting values from the series ends; n_c additionally multi-started
    // across the abscissa range since it can sit anywhere within it.
    const double y_low = y.front();
    const double y_high = y.back();
    const double l_00 = std::max(0.5 * y_high, 1e-3 * y_low);
    const double l_tls0 = std::max(y_low - l_00, 0.1 * y_low);

    SaturationFit best;
    bool have = false;
    for (int k = 0; k <= 4; ++k) {
        const double n_c0 =
            n.front() * std::pow(n.back() / n.front(), static_cast<double>(k) / 4.0);
        auto fit = detail::fit_saturation_once(n, y, l_tls0, n_c0, l_00);
        if (!have || (fit.converged && !best.converged) ||
            (fit.converged == best.converged && fit.residual_rms < best.residual_rms)) {
            best = fit;
            have = true;
        }
    }
    out.saturation = best;
    return out;
}

} // namespace dielkit
