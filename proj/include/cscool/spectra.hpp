#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cscool/dynamics.hpp"
#include "cscool/params.hpp"
#include "cscool/units.hpp"

namespace cscool {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Lorentzian intensity gain of the cavity at offset omega from the tweezer
/// frequency: L(omega) = (kappa/2)^2 / ((kappa/2)^2 + (Delta - omega)^2).
/// Peak value 1 at omega = Delta.
struct TransferFunction {
    double kappa;     ///< rad/s, > 0
    double detuning;  ///< rad/s
};

inline double cavity_gain(const TransferFunction& tf, double omega) {
    const double hw = tf.kappa / 2.0;
    const double d = tf.detuning - omega;
    return hw * hw / (hw * hw + d * d);
}

/// Shot-noise-normalized heterodyne spectrum. Frequencies are offsets from
/// the carrier in Hz, signed: anti-Stokes sidebands sit at +Omega_j/2pi.
struct Spectrum {
    std::vector<double> freqs;  ///< Hz, strictly increasing
    std::vector<double> psd;    ///< dimensionless, floor = 1
    std::string params_hash;    ///< provenance (hex)
    double rbw_hz = 0.0;
    int n_averages = 0;
    std::uint64_t seed = 0;
};

inline std::vector<double> linspace_hz(double f_min, double f_max, std::size_t n) {
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i)
        f[i] = f_min + (f_max - f_min) * static_cast<double>(i) / static_cast<double>(n - 1);
    return f;
}

namespace detail {

/// Drift of the Langevin equations in the ladder basis
/// (a, a+, b_1, b_1+, ..., b_N, b_N+).
inline CMat ladder_drift(const SystemParams& p) {
    const int n = static_cast<int>(p.modes.size());
    const int dim = 2 + 2 * n;
    const std::complex<double> I(0.0, 1.0);
    CMat A = CMat::Zero(dim, dim);
    A(0, 0) = -(I * p.cavity.detuning + p.cavity.kappa / 2.0);
    A(1, 1) = I * p.cavity.detuning - p.cavity.kappa / 2.0;
    for (int j = 0; j < n; ++j) {
        const auto& m = p.modes[static_cast<std::size_t>(j)];
        const int ib = 2 + 2 * j;
        A(ib, ib) = -(I * m.omega + m.gamma / 2.0);
        A(ib + 1, ib + 1) = I * m.omega - m.gamma / 2.0;
        A(0, ib) = A(0, ib + 1) = -I * m.g;
        A(1, ib) = A(1, ib + 1) = I * m.g;
        A(ib, 0) = A(ib, 1) = -I * m.g;
        A(ib + 1, 0) = A(ib + 1, 1) = I * m.g;
    }
    return A;
}

/// Unsymmetrized input correlators <n_i(t) n_j(t')> = N_ij delta(t - t').
/// Optical input is vacuum; mechanical noise carries the recoil limit
/// <xi+ xi> = <xi xi+> = Gamma (plus the gamma vacuum part on the normal side).
inline CMat ladder_noise(const SystemParams& p) {
    const int n = static_cast<int>(p.modes.size());
    const int dim = 2 + 2 * n;
    CMat N = CMat::Zero(dim, dim);
    N(0, 1) = p.cavity.kappa;
    for (int j = 0; j < n; ++j) {
        const auto& m = p.modes[static_cast<std::size_t>(j)];
        const int ib = 2 + 2 * j;
        N(ib, ib + 1) = m.heating + m.gamma;
        N(ib + 1, ib) = m.heating;
    }
    return N;
}

/// Normal-ordered cavity spectrum S_{a+a}(omega) for the stationary linear
/// system: entry (a+, a) of chi(omega) N chi(omega)^H-like product with
/// chi = (-i omega I - A)^-1.
inline double normal_ordered_cavity_spectrum(const CMat& A, const CMat& N, double omega) {
    const int dim = static_cast<int>(A.rows());
    const std::complex<double> I(0.0, 1.0);
    CMat left = -I * omega * CMat::Identity(dim, dim) - A;
    // row a+ of left^-1
    CVec u = left.transpose().partialPivLu().solve(CVec::Unit(dim, 1));
    // column a of (i omega I - A^T)^-1
    CMat right_t = I * omega * CMat::Identity(dim, dim) - A;
    CVec v = right_t.transpose().partialPivLu().solve(CVec::Unit(dim, 0));
    const std::complex<double> s = u.transpose() * N * v;
    return s.real();
}

} // namespace detail

/// Heterodyne PSD of the cavity output, shot-noise units:
/// PSD(f) = 1 + eta kappa S_{a+a}, mapped so anti-Stokes sidebands of mode j
/// appear at +Omega_j/2pi. Rejects unstable models.
inline Spectrum heterodyne_psd(const LinearModel& model, const SystemParams& p,
                               std::vector<double> freqs_hz) {
    if (!is_hurwitz(model.drift, model.drift.cwiseAbs().maxCoeff()))
        throw UnstableError("cannot compute steady-state spectrum of an unstable model");
    for (std::size_t i = 1; i < freqs_hz.size(); ++i)
        if (!(freqs_hz[i] > freqs_hz[i - 1]))
            throw std::invalid_argument("frequency grid must be strictly increasing");

    const CMat A = detail::ladder_drift(p);
    const CMat N = detail::ladder_noise(p);
    Spectrum s;
    s.psd.resize(freqs_hz.size());
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        const double omega = hz_to_rad(freqs_hz[i]);
        const double val =
            detail::normal_ordered_cavity_spectrum(A, N, -omega);
        s.psd[i] = 1.0 + p.cavity.eta * p.cavity.kappa * val;
    }
    s.freqs = std::move(freqs_hz);
    s.params_hash = params_hash_hex(p);
    return s;
}

/// Welch-averaged periodogram statistics: each bin is multiplied by an
/// independent Gamma(shape = n_averages, mean 1) factor. Deterministic under
/// a fixed seed.
inline Spectrum synthesize_measurement(const Spectrum& noiseless, int n_averages,
                                       double rbw_hz, std::uint64_t seed) {
    if (n_averages < 1)
        throw std::invalid_argument("n_averages must be >= 1");
    Spectrum out = noiseless;
    out.n_averages = n_averages;
    out.rbw_hz = rbw_hz;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(static_cast<double>(n_averages),
                                          1.0 / static_cast<double>(n_averages));
    for (auto& v : out.psd) v *= gamma(rng);
    return out;
}

/// Trapezoid integral of (psd - 1) over [center - half_window, center + half_window],
/// in Hz units. Used for the sideband-weight consistency checks.
inline double sideband_weight(const Spectrum& s, double center_hz, double half_window_hz) {
    double w = 0.0;
    for (std::size_t i = 1; i < s.freqs.size(); ++i) {
        const double f0 = s.freqs[i - 1];
        const double f1 = s.freqs[i];
        if (f1 < center_hz - half_window_hz || f0 > center_hz + half_window_hz) continue;
        w += 0.5 * ((s.psd[i - 1] - 1.0) + (s.psd[i] - 1.0)) * (f1 - f0);
    }
    return w;
}

} // namespace cscool
