#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "cscool/dynamics.hpp"
#include "cscool/params.hpp"

namespace cscool {

struct ZeroCoupling : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Collective-mode basis of a two-mode system: the bright superposition
/// (g_x x + g_y y)/g couples to the cavity with the full rate g, the
/// orthogonal dark superposition does not couple at all. For Omega_x !=
/// Omega_y the two collective modes mix at the residual rate below; at
/// degeneracy the dark mode decouples exactly.
struct BrightDarkBasis {
    double bright_x, bright_y;  ///< (g_x/g, g_y/g)
    double dark_x, dark_y;      ///< (-g_y/g, g_x/g)
    double g_total;             ///< sqrt(g_x^2 + g_y^2), rad/s
    double bright_omega;        ///< rad/s, coupling-weighted
    double dark_omega;
    double mixing_rate;         ///< |Omega_y - Omega_x| |g_x g_y| / g^2, rad/s
};

inline BrightDarkBasis bright_dark_decompose(double g_x, double g_y, double omega_x,
                                             double omega_y) {
    const double g2 = g_x * g_x + g_y * g_y;
    if (!(g2 > 0.0)) throw ZeroCoupling("bright/dark basis undefined for g_x = g_y = 0");
    BrightDarkBasis b;
    b.g_total = std::sqrt(g2);
    b.bright_x = g_x / b.g_total;
    b.bright_y = g_y / b.g_total;
    b.dark_x = -b.bright_y;
    b.dark_y = b.bright_x;
    b.bright_omega = (g_x * g_x * omega_x + g_y * g_y * omega_y) / g2;
    b.dark_omega = (g_y * g_y * omega_x + g_x * g_x * omega_y) / g2;
    b.mixing_rate = std::abs(omega_y - omega_x) * std::abs(g_x * g_y) / g2;
    return b;
}

/// Occupations of the collective bright/dark modes of the first two
/// mechanical modes: rotate the steady-state covariance into the collective
/// quadratures and read off (V_xx + V_pp - 1)/2. Propagates UnstableError
/// at exact degeneracy (the dark mode has no dissipation channel there).
inline std::pair<double, double> dark_mode_occupation(const SystemParams& p) {
    if (p.modes.size() < 2)
        throw std::invalid_argument("dark-mode analysis needs two mechanical modes");
    const auto& mx = p.modes[0];
    const auto& my = p.modes[1];
    const auto basis = bright_dark_decompose(mx.g, my.g, mx.omega, my.omega);

    const auto model = build_model(p);
    const auto ss = solve_steady_state(model);
    const Mat& V = ss.covariance;

    const auto collective_occupation = [&](double cx, double cy) {
        // same rotation on x and p quadratures of modes 0 and 1
        double vxx = 0.0, vpp = 0.0;
        const int ix0 = 2, ix1 = 4;
        vxx = cx * cx * V(ix0, ix0) + cy * cy * V(ix1, ix1) + 2.0 * cx * cy * V(ix0, ix1);
        vpp = cx * cx * V(ix0 + 1, ix0 + 1) + cy * cy * V(ix1 + 1, ix1 + 1) +
              2.0 * cx * cy * V(ix0 + 1, ix1 + 1);
        return (vxx + vpp - 1.0) / 2.0;
    };
    return {collective_occupation(basis.bright_x, basis.bright_y),
            collective_occupation(basis.dark_x, basis.dark_y)};
}

struct AngularMomentumStats {
    double lz_sq;   ///< <Lz^2>/hbar^2
    double lz_rms;  ///< sqrt of the above, units of hbar
};

/// Orbital angular momentum variance of two uncorrelated thermal transverse
/// modes: <Lz^2>/hbar^2 = (n_x + 1/2)(n_y + 1/2)(O_x/O_y + O_y/O_x) - 1/2.
inline AngularMomentumStats lz_variance(double n_x, double n_y, double omega_x,
                                        double omega_y) {
    if (!(n_x >= 0.0 && n_y >= 0.0))
        throw std::invalid_argument("occupations must be >= 0");
    if (!(omega_x > 0.0 && omega_y > 0.0))
        throw std::invalid_argument("frequencies must be > 0");
    AngularMomentumStats out;
    out.lz_sq = (n_x + 0.5) * (n_y + 0.5) * (omega_x / omega_y + omega_y / omega_x) - 0.5;
    out.lz_rms = std::sqrt(out.lz_sq);
    return out;
}

} // namespace cscool
