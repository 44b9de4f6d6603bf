#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cscool/units.hpp"

namespace cscool {

/// One mechanical centre-of-mass mode. All rates in rad/s except
/// `heating`, which is a phonon heating rate in phonons/s.
struct MechMode {
    double omega = 0.0;    ///< mechanical frequency (rad/s), > 0
    double g = 0.0;        ///< optomechanical coupling (rad/s), may be signed
    double gamma = 0.0;    ///< intrinsic (gas) damping (rad/s), >= 0
    double heating = 0.0;  ///< recoil heating rate (phonons/s), >= 0
    std::string label;     ///< e.g. "x", "y", "z"
};

struct CavityParams {
    double kappa = 0.0;    ///< full linewidth (rad/s), > 0
    double detuning = 0.0; ///< Delta = omega_c - omega_0 (rad/s), signed
    double eta = 1.0;      ///< detection efficiency in [0, 1]
};

struct SystemParams {
    CavityParams cavity;
    std::vector<MechMode> modes;
    double if_freq = 0.0;  ///< heterodyne IF omega_LO - omega_0 (rad/s)

    const MechMode& mode(const std::string& label) const {
        for (const auto& m : modes)
            if (m.label == label) return m;
        throw std::out_of_range("no mode labelled '" + label + "'");
    }
    MechMode& mode(const std::string& label) {
        return const_cast<MechMode&>(std::as_const(*this).mode(label));
    }
};

/// Throws std::invalid_argument on hard invariant breaches. Soft cooling
/// conditions are reported by validate() below, never thrown.
inline void check_invariants(const SystemParams& p) {
    if (!(p.cavity.kappa > 0.0))
        throw std::invalid_argument("cavity linewidth kappa must be > 0");
    if (!(p.cavity.eta >= 0.0 && p.cavity.eta <= 1.0))
        throw std::invalid_argument("detection efficiency eta must be in [0, 1]");
    if (p.modes.empty())
        throw std::invalid_argument("at least one mechanical mode required");
    for (const auto& m : p.modes) {
        if (!(m.omega > 0.0))
            throw std::invalid_argument("mode '" + m.label + "': omega must be > 0");
        if (!(m.gamma >= 0.0))
            throw std::invalid_argument("mode '" + m.label + "': gamma must be >= 0");
        if (!(m.heating >= 0.0))
            throw std::invalid_argument("mode '" + m.label + "': heating must be >= 0");
    }
    for (std::size_t i = 0; i < p.modes.size(); ++i)
        for (std::size_t j = i + 1; j < p.modes.size(); ++j)
            if (p.modes[i].label == p.modes[j].label)
                throw std::invalid_argument("duplicate mode label '" + p.modes[i].label + "'");
}

/// Soft cooling-condition check. `condition` names which of the three
/// requirements failed; `margin` is the offending ratio.
struct Violation {
    enum class Condition {
        SidebandResolution,  // |O_k - O_j| <~ kappa <~ O_j, O_k
        WeakCoupling,        // |g_j| << kappa
        ModeSeparation,      // |O_k - O_j| >~ |g_j|
    };
    Condition condition;
    std::string detail;
    double margin;  ///< the ratio that crossed its threshold
};

struct ValidationThresholds {
    double much_less = 0.2;    ///< "<<" means ratio below this
    double less_sim = 2.0;     ///< "<~" tolerates same-order ratios up to this
    double greater_sim = 1.0;  ///< ">~" means ratio above this
};

/// Evaluates the cooling conditions for every ordered mode pair:
/// sideband resolution |O_k - O_j| <~ kappa <~ O_j, O_k; weak coupling
/// |g_j| << kappa; mode separation |O_k - O_j| >~ |g_j|.
/// Returns warnings only; hard invariant breaches throw.
inline std::vector<Violation> validate(const SystemParams& p,
                                       const ValidationThresholds& th = {}) {
    check_invariants(p);
    std::vector<Violation> out;
    const double kappa = p.cavity.kappa;

    for (const auto& m : p.modes) {
        const double g_ratio = std::abs(m.g) / kappa;
        if (!(g_ratio < th.much_less))
            out.push_back({Violation::Condition::WeakCoupling,
                           "|g_" + m.label + "|/kappa = " + std::to_string(g_ratio), g_ratio});
        const double k_ratio = kappa / m.omega;
        if (!(k_ratio <= th.less_sim))
            out.push_back({Violation::Condition::SidebandResolution,
                           "kappa/Omega_" + m.label + " = " + std::to_string(k_ratio), k_ratio});
    }
    for (std::size_t j = 0; j < p.modes.size(); ++j) {
        for (std::size_t k = 0; k < p.modes.size(); ++k) {
            if (j == k) continue;
            const auto& mj = p.modes[j];
            const auto& mk = p.modes[k];
            const double spacing = std::abs(mk.omega - mj.omega);
            const double s_ratio = spacing / kappa;
            if (!(s_ratio <= th.less_sim))
                out.push_back({Violation::Condition::SidebandResolution,
                               "|Omega_" + mk.label + " - Omega_" + mj.label +
                                   "|/kappa = " + std::to_string(s_ratio),
                               s_ratio});
            if (mj.g != 0.0) {
                const double ratio = spacing / std::abs(mj.g);
                if (!(ratio > th.greater_sim))
                    out.push_back({Violation::Condition::ModeSeparation,
                                   "|Omega_" + mk.label + " - Omega_" + mj.label +
                                       "|/|g_" + mj.label + "| = " + std::to_string(ratio),
                                   ratio});
            }
        }
    }
    return out;
}

/// g_x = g cos(theta), g_y = g sin(theta): polarisation angle theta between
/// the trap polarisation axis and the cavity axis sets how the total
/// scattering rate splits between the two transverse modes.
inline std::pair<double, double> coupling_from_polarisation(double theta, double g_total) {
    if (!(g_total >= 0.0))
        throw std::invalid_argument("g_total must be >= 0");
    return {g_total * std::cos(theta), g_total * std::sin(theta)};
}

} // namespace cscool
