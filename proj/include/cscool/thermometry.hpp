#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cscool/levmar.hpp"
#include "cscool/spectra.hpp"
#include "cscool/units.hpp"

namespace cscool {

struct PeaksUnresolvable : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnphysicalAsymmetry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LorentzianFit {
    double center_hz = 0.0;
    double width_hz = 0.0;     ///< FWHM
    double amplitude = 0.0;    ///< peak height above the offset, shot-noise units
    double offset = 1.0;
};

/// One mode's sideband pair: Stokes and anti-Stokes Lorentzians share a
/// width but have independent amplitudes. The 2x2 amplitude covariance
/// block (stokes, antistokes) feeds uncertainty propagation.
struct ModeSidebandFit {
    LorentzianFit stokes;
    LorentzianFit antistokes;
    Eigen::Matrix2d amplitude_covariance = Eigen::Matrix2d::Zero();
};

struct SidebandFitResult {
    std::vector<ModeSidebandFit> modes;
    double chi2 = 0.0;
    int dof = 0;
};

struct FitOptions {
    bool float_offset = false;  ///< fit the noise floor instead of pinning it at 1
    LevMarOptions levmar;
};

namespace detail {

inline double lorentzian(double f, double center, double fwhm, double amp) {
    const double hw = fwhm / 2.0;
    const double d = f - center;
    return amp * hw * hw / (d * d + hw * hw);
}

struct PeakInit {
    double center, width, amp;
};

/// Data-driven start: center from argmax inside the window (ties -> lowest
/// frequency), amplitude from peak height above 1, width from the half-max
/// crossing scan.
inline PeakInit init_peak(const Spectrum& s, double window_lo, double window_hi) {
    std::size_t best = s.freqs.size();
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.freqs.size(); ++i) {
        if (s.freqs[i] < window_lo || s.freqs[i] > window_hi) continue;
        if (s.psd[i] > best_val) {
            best_val = s.psd[i];
            best = i;
        }
    }
    if (best == s.freqs.size())
        throw std::invalid_argument("spectrum does not cover the requested sideband window");
    PeakInit init;
    init.center = s.freqs[best];
    init.amp = best_val - 1.0;

    const double half = 1.0 + init.amp / 2.0;
    double lo = window_lo, hi = window_hi;
    for (std::size_t i = best; i-- > 0;) {
        if (s.freqs[i] < window_lo) break;
        if (s.psd[i] < half) { lo = s.freqs[i]; break; }
    }
    for (std::size_t i = best + 1; i < s.freqs.size(); ++i) {
        if (s.freqs[i] > window_hi) break;
        if (s.psd[i] < half) { hi = s.freqs[i]; break; }
    }
    init.width = std::max(hi - lo, 2.0 * (s.freqs[1] - s.freqs[0]));
    return init;
}

} // namespace detail

/// Joint nonlinear least squares of 1 + sum of Lorentzians over the whole
/// spectrum. Per mode: one shared width, independent Stokes / anti-Stokes
/// amplitudes and centers. Throws FitDiverged on a featureless spectrum and
/// PeaksUnresolvable when fitted centers of two modes overlap within the sum
/// of their half-widths.
inline SidebandFitResult fit_sidebands(const Spectrum& s,
                                       const std::vector<double>& center_guesses_hz,
                                       const FitOptions& opt = {}) {
    const int n_modes = static_cast<int>(center_guesses_hz.size());
    if (n_modes < 1) throw std::invalid_argument("need at least one center guess");
    const int n_bins = static_cast<int>(s.freqs.size());
    if (n_bins < 16) throw std::invalid_argument("spectrum too short to fit");

    // Window half-width per mode: half the distance to the nearest other guess,
    // never wider than 40% of the guess itself (keeps windows on one side of 0).
    std::vector<double> halfwin(static_cast<std::size_t>(n_modes));
    for (int m = 0; m < n_modes; ++m) {
        double hw = 0.4 * std::abs(center_guesses_hz[static_cast<std::size_t>(m)]);
        for (int k = 0; k < n_modes; ++k) {
            if (k == m) continue;
            hw = std::min(hw, 0.5 * std::abs(center_guesses_hz[static_cast<std::size_t>(k)] -
                                             center_guesses_hz[static_cast<std::size_t>(m)]));
        }
        halfwin[static_cast<std::size_t>(m)] = std::max(hw, 4.0 * (s.freqs[1] - s.freqs[0]));
    }

    // Parameter layout: per mode [c_stokes, c_antistokes, width, A_stokes,
    // A_antistokes]; optional trailing offset.
    const int per_mode = 5;
    const int n_params = per_mode * n_modes + (opt.float_offset ? 1 : 0);
    Eigen::VectorXd p0(n_params);
    double max_amp = 0.0;
    for (int m = 0; m < n_modes; ++m) {
        const double c = std::abs(center_guesses_hz[static_cast<std::size_t>(m)]);
        const double hw = halfwin[static_cast<std::size_t>(m)];
        const auto st = detail::init_peak(s, -c - hw, -c + hw);
        const auto as = detail::init_peak(s, c - hw, c + hw);
        p0[per_mode * m + 0] = st.center;
        p0[per_mode * m + 1] = as.center;
        p0[per_mode * m + 2] = 0.5 * (st.width + as.width);
        p0[per_mode * m + 3] = st.amp;
        p0[per_mode * m + 4] = as.amp;
        max_amp = std::max({max_amp, st.amp, as.amp});
    }
    if (opt.float_offset) p0[n_params - 1] = 1.0;
    if (!(max_amp > 1e-6))
        throw FitDiverged("no sideband visible above the shot-noise floor");

    const auto model_at = [&](const Eigen::VectorXd& p, double f) {
        double y = opt.float_offset ? p[n_params - 1] : 1.0;
        for (int m = 0; m < n_modes; ++m) {
            const double w = std::abs(p[per_mode * m + 2]);
            y += detail::lorentzian(f, p[per_mode * m + 0], w, p[per_mode * m + 3]);
            y += detail::lorentzian(f, p[per_mode * m + 1], w, p[per_mode * m + 4]);
        }
        return y;
    };
    const auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (int i = 0; i < n_bins; ++i)
            r[i] = model_at(p, s.freqs[static_cast<std::size_t>(i)]) -
                   s.psd[static_cast<std::size_t>(i)];
    };
    const auto jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& J) {
        J.setZero();
        for (int i = 0; i < n_bins; ++i) {
            const double f = s.freqs[static_cast<std::size_t>(i)];
            for (int m = 0; m < n_modes; ++m) {
                const double w = std::abs(p[per_mode * m + 2]);
                const double hw = w / 2.0;
                const double sgn_w = p[per_mode * m + 2] < 0.0 ? -1.0 : 1.0;
                for (int side = 0; side < 2; ++side) {
                    const double c = p[per_mode * m + side];
                    const double a = p[per_mode * m + 3 + side];
                    const double d = f - c;
                    const double den = d * d + hw * hw;
                    const double shape = hw * hw / den;
                    J(i, per_mode * m + side) = a * 2.0 * d * hw * hw / (den * den);
                    J(i, per_mode * m + 2) +=
                        sgn_w * a * (hw * d * d / (den * den));  // d shape / d fwhm
                    J(i, per_mode * m + 3 + side) = shape;
                }
            }
            if (opt.float_offset) J(i, n_params - 1) = 1.0;
        }
    };

    const auto fit = levmar(residual, jacobian, p0, n_bins, opt.levmar);

    SidebandFitResult out;
    out.chi2 = fit.chi2;
    out.dof = fit.dof;
    const double floor = opt.float_offset ? fit.params[n_params - 1] : 1.0;
    for (int m = 0; m < n_modes; ++m) {
        ModeSidebandFit mf;
        const double w = std::abs(fit.params[per_mode * m + 2]);
        mf.stokes = {fit.params[per_mode * m + 0], w, fit.params[per_mode * m + 3], floor};
        mf.antistokes = {fit.params[per_mode * m + 1], w, fit.params[per_mode * m + 4], floor};
        mf.amplitude_covariance(0, 0) = fit.covariance(per_mode * m + 3, per_mode * m + 3);
        mf.amplitude_covariance(1, 1) = fit.covariance(per_mode * m + 4, per_mode * m + 4);
        mf.amplitude_covariance(0, 1) = mf.amplitude_covariance(1, 0) =
            fit.covariance(per_mode * m + 3, per_mode * m + 4);
        out.modes.push_back(mf);
    }

    // Degeneracy check on the fitted anti-Stokes centers (Stokes side agrees
    // by symmetry): two modes whose peaks overlap cannot be told apart.
    for (int a = 0; a < n_modes; ++a) {
        for (int b = a + 1; b < n_modes; ++b) {
            const auto& fa = out.modes[static_cast<std::size_t>(a)].antistokes;
            const auto& fb = out.modes[static_cast<std::size_t>(b)].antistokes;
            if (std::abs(fa.center_hz - fb.center_hz) <
                0.5 * (fa.width_hz + fb.width_hz))
                throw PeaksUnresolvable("fitted sideband centers of two modes overlap");
        }
    }
    return out;
}

/// Sideband thermometry inversion: with R the anti-Stokes/Stokes amplitude
/// ratio and L the cavity gain, n/(n+1) = R L(-Omega)/L(+Omega), so
/// n_est = r / (1 - r). Throws UnphysicalAsymmetry for r >= 1.
inline double occupation_from_asymmetry(double ratio, double omega, const TransferFunction& tf) {
    if (!(ratio >= 0.0)) throw std::invalid_argument("asymmetry ratio must be >= 0");
    const double r = ratio * cavity_gain(tf, -omega) / cavity_gain(tf, omega);
    if (!(r < 1.0))
        throw UnphysicalAsymmetry("corrected asymmetry >= 1: occupation unbounded");
    return r / (1.0 - r);
}

struct ThermometryResult {
    std::string label;
    ModeSidebandFit fit;
    double asymmetry = 0.0;   ///< R = A_antistokes / A_stokes
    double n_est = 0.0;
    double n_sigma = 0.0;
    bool unphysical = false;  ///< corrected ratio >= 1, n_est meaningless
};

/// First-order propagation of the fitted amplitude covariance through
/// R = A_as / A_s and n = r/(1-r).
inline double propagate_uncertainty(const ModeSidebandFit& fit, double ratio_gain,
                                    double n_est) {
    const double a_s = fit.stokes.amplitude;
    const double a_as = fit.antistokes.amplitude;
    if (a_s == 0.0) return 0.0;
    const double r = ratio_gain * a_as / a_s;
    // dR/dA_as = 1/A_s, dR/dA_s = -A_as/A_s^2
    const double d_as = 1.0 / a_s;
    const double d_s = -a_as / (a_s * a_s);
    const double var_r = d_as * d_as * fit.amplitude_covariance(1, 1) +
                         d_s * d_s * fit.amplitude_covariance(0, 0) +
                         2.0 * d_as * d_s * fit.amplitude_covariance(0, 1);
    if (!(var_r > 0.0)) return 0.0;
    const double dn_dr = 1.0 / ((1.0 - r) * (1.0 - r));
    (void)n_est;
    return dn_dr * ratio_gain * std::sqrt(var_r);
}

/// Full inverse pipeline on one spectrum: joint fit, asymmetry, cavity
/// correction (using the *fitted* centers, as on real data), uncertainty.
inline std::vector<ThermometryResult> run_thermometry(
    const Spectrum& s, const std::vector<double>& center_guesses_hz,
    const TransferFunction& tf, const std::vector<std::string>& labels = {},
    const FitOptions& opt = {}) {
    const auto fits = fit_sidebands(s, center_guesses_hz, opt);
    std::vector<ThermometryResult> out;
    for (std::size_t m = 0; m < fits.modes.size(); ++m) {
        ThermometryResult r;
        r.label = m < labels.size() ? labels[m] : std::to_string(m);
        r.fit = fits.modes[m];
        const double a_s = r.fit.stokes.amplitude;
        const double a_as = r.fit.antistokes.amplitude;
        r.asymmetry = a_s != 0.0 ? std::max(a_as / a_s, 0.0) : 0.0;
        const double omega = hz_to_rad(r.fit.antistokes.center_hz);
        const double gain = cavity_gain(tf, -omega) / cavity_gain(tf, omega);
        try {
            r.n_est = occupation_from_asymmetry(r.asymmetry, omega, tf);
            r.n_sigma = propagate_uncertainty(r.fit, gain, r.n_est);
        } catch (const UnphysicalAsymmetry&) {
            r.unphysical = true;
            r.n_est = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(std::move(r));
    }
    return out;
}

enum class CellMask { Ok, Degenerate, Unstable };

struct ErrorMapCell {
    double spacing_hz = 0.0;
    double g_hz = 0.0;
    double dn_x = 0.0;  ///< |(n_model - n_est)/n_model| for the lower mode
    double dn_y = 0.0;
    double n_model_x = 0.0, n_model_y = 0.0;
    double n_est_x = 0.0, n_est_y = 0.0;
    CellMask mask = CellMask::Ok;
};

struct ErrorMap {
    std::vector<double> spacing_grid_hz;
    std::vector<double> g_grid_hz;
    std::vector<ErrorMapCell> cells;  ///< row-major: spacing outer, g inner

    const ErrorMapCell& at(std::size_t i_spacing, std::size_t i_g) const {
        return cells[i_spacing * g_grid_hz.size() + i_g];
    }
};

struct ErrorMapOptions {
    double mean_omega = 0.0;  ///< rad/s; 0 -> mean of the base params' x,y modes
    double grid_pad_hz = 8e4;
    double min_resolution_hz = 2.0;
    double max_resolution_hz = 50.0;
};

/// Forward-model one error-map cell: true occupations from the Lyapunov
/// steady state, then sideband thermometry on the noiseless model PSD of the
/// same system. Never throws for per-cell failures; they land in the mask.
inline ErrorMapCell error_map_cell(const SystemParams& base, double spacing_hz,
                                   double g_hz, const ErrorMapOptions& opt = {}) {
    ErrorMapCell cell;
    cell.spacing_hz = spacing_hz;
    cell.g_hz = g_hz;

    SystemParams p = base;
    if (p.modes.size() < 2)
        throw std::invalid_argument("error map needs two mechanical modes");
    double mean_omega = opt.mean_omega;
    if (mean_omega == 0.0) mean_omega = 0.5 * (p.modes[0].omega + p.modes[1].omega);
    p.modes[0].omega = mean_omega - hz_to_rad(spacing_hz) / 2.0;
    p.modes[1].omega = mean_omega + hz_to_rad(spacing_hz) / 2.0;
    p.modes[0].g = p.modes[1].g = hz_to_rad(g_hz);

    try {
        const auto model = build_model(p);
        const auto ss = solve_steady_state(model);
        cell.n_model_x = ss.occupations[0];
        cell.n_model_y = ss.occupations[1];

        // Resolution follows the narrowest expected sideband (optical damping
        // in the weak-coupling picture), clamped to keep grids tractable.
        double min_lw_hz = std::numeric_limits<double>::infinity();
        for (const auto& m : p.modes) {
            const double hw = p.cavity.kappa / 2.0;
            const double am = m.g * m.g * p.cavity.kappa /
                              (hw * hw + std::pow(p.cavity.detuning - m.omega, 2));
            const double ap = m.g * m.g * p.cavity.kappa /
                              (hw * hw + std::pow(p.cavity.detuning + m.omega, 2));
            min_lw_hz = std::min(min_lw_hz, rad_to_hz(std::abs(am - ap) + m.gamma));
        }
        const double res = std::clamp(min_lw_hz / 8.0, opt.min_resolution_hz,
                                      opt.max_resolution_hz);
        const double span = rad_to_hz(std::max(p.modes[0].omega, p.modes[1].omega)) +
                            opt.grid_pad_hz;
        const auto n_pts = static_cast<std::size_t>(2.0 * span / res) + 1;
        auto spec = heterodyne_psd(model, p, linspace_hz(-span, span, n_pts));

        const TransferFunction tf{p.cavity.kappa, p.cavity.detuning};
        const std::vector<double> guesses = {rad_to_hz(p.modes[0].omega),
                                             rad_to_hz(p.modes[1].omega)};
        const auto results = run_thermometry(spec, guesses, tf);
        if (results[0].unphysical || results[1].unphysical) {
            cell.mask = CellMask::Degenerate;
            return cell;
        }
        cell.n_est_x = results[0].n_est;
        cell.n_est_y = results[1].n_est;
        cell.dn_x = std::abs((cell.n_model_x - cell.n_est_x) / cell.n_model_x);
        cell.dn_y = std::abs((cell.n_model_y - cell.n_est_y) / cell.n_model_y);
    } catch (const UnstableError&) {
        cell.mask = CellMask::Unstable;
    } catch (const SolverFailure&) {
        cell.mask = CellMask::Unstable;
    } catch (const PeaksUnresolvable&) {
        cell.mask = CellMask::Degenerate;
    } catch (const FitDiverged&) {
        cell.mask = CellMask::Degenerate;
    }
    return cell;
}

/// Systematic-error map of the thermometry estimator over mode spacing and
/// coupling strength. Sequential version; the CLI layer parallelizes cells.
inline ErrorMap error_map(const SystemParams& base, std::vector<double> spacing_grid_hz,
                          std::vector<double> g_grid_hz, const ErrorMapOptions& opt = {}) {
    ErrorMap map;
    map.spacing_grid_hz = std::move(spacing_grid_hz);
    map.g_grid_hz = std::move(g_grid_hz);
    for (double s : map.spacing_grid_hz)
        for (double g : map.g_grid_hz)
            map.cells.push_back(error_map_cell(base, s, g, opt));
    return map;
}

} // namespace cscool
