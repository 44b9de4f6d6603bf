#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cscool/analysis.hpp"
#include "cscool/config.hpp"
#include "cscool/csv.hpp"
#include "cscool/dynamics.hpp"
#include "cscool/params.hpp"
#include "cscool/thermometry.hpp"

namespace cscool {

inline const char* tool_version = "0.1.0";

/// Index-ordered parallel map: results land at their own index, so output
/// ordering never depends on scheduling.
inline void parallel_for(std::size_t n, unsigned n_threads,
                         const std::function<void(std::size_t)>& fn) {
    if (n_threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const unsigned workers = std::min<unsigned>(n_threads, static_cast<unsigned>(n));
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Per-mode occupations that tolerate decoupled free-heating modes: a mode
/// with g = 0 and gamma = 0 but Gamma > 0 has no steady state of its own,
/// while the rest of the system still does. Such modes report nullopt.
struct ModeOccupations {
    std::vector<std::optional<double>> n;  ///< per mode, base order
    bool stable = false;                   ///< true if the coupled subsystem is stable
};

inline ModeOccupations per_mode_occupations(const SystemParams& p) {
    ModeOccupations out;
    out.n.assign(p.modes.size(), std::nullopt);

    SystemParams reduced = p;
    reduced.modes.clear();
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < p.modes.size(); ++j) {
        const auto& m = p.modes[j];
        // |g| far below any dynamical scale is numerically zero (cos(pi/2)
        // rounding and the like); such a mode is decoupled, not coupled-weakly.
        if (std::abs(m.g) > 1e-12 * m.omega || m.gamma > 0.0) {
            reduced.modes.push_back(m);
            kept.push_back(j);
        }
    }
    if (reduced.modes.empty()) return out;
    try {
        const auto ss = solve_steady_state(build_model(reduced));
        out.stable = true;
        for (std::size_t k = 0; k < kept.size(); ++k) out.n[kept[k]] = ss.occupations[k];
    } catch (const UnstableError&) {
    } catch (const SolverFailure&) {
    }
    return out;
}

inline std::string provenance_header(const std::string& scenario, const SystemParams& p,
                                     std::uint64_t seed) {
    std::ostringstream os;
    os << "# cscool " << scenario << " v1\n";
    os << "# tool_version: " << tool_version << "\n";
    os << "# config_hash: " << params_hash_hex(p) << "\n";
    os << "# seed: " << seed << "\n";
    return os.str();
}

struct SweepSpec {
    double start = 0.0;  ///< I/O units of the swept quantity (kHz or rad)
    double stop = 0.0;
    int steps = 1;

    double at(int i) const {
        if (steps == 1) return start;
        return start + (stop - start) * static_cast<double>(i) / (steps - 1);
    }
};

/// Detuning sweep (one row per Delta): full Lyapunov occupations next to the
/// weak-coupling rate-equation prediction. Unstable or non-cooling points are
/// flagged, never fatal.
inline std::string run_detuning_sweep(SystemParams base, const SweepSpec& delta_khz,
                                      unsigned n_threads = 1, std::uint64_t seed = 0) {
    std::vector<std::string> rows(static_cast<std::size_t>(delta_khz.steps));
    parallel_for(rows.size(), n_threads, [&](std::size_t i) {
        SystemParams p = base;
        p.cavity.detuning = khz_to_rad(delta_khz.at(static_cast<int>(i)));
        const auto occ = per_mode_occupations(p);
        std::ostringstream row;
        row << format_double(rad_to_khz(p.cavity.detuning));
        for (std::size_t j = 0; j < p.modes.size(); ++j)
            row << "," << (occ.n[j] ? format_double(*occ.n[j]) : "nan");
        for (std::size_t j = 0; j < p.modes.size(); ++j) {
            row << ",";
            try {
                row << format_double(rate_equation_occupation(p, p.modes[j].label));
            } catch (const NoNetCooling&) {
                row << "inf";
            }
        }
        row << "," << (occ.stable ? 1 : 0) << "\n";
        rows[i] = row.str();
    });

    std::ostringstream os;
    os << provenance_header("detuning-sweep", base, seed);
    os << "delta_khz";
    for (const auto& m : base.modes) os << ",n_" << m.label;
    for (const auto& m : base.modes) os << ",n_" << m.label << "_rate";
    os << ",stable\n";
    for (const auto& r : rows) os << r;
    return os.str();
}

struct PolarisationSweepOptions {
    double g_total = 0.0;           ///< rad/s; 0 -> sqrt(g_x^2 + g_y^2) of base
    double residual_coupling = 0.0; ///< rad/s floor on |g_j| (alignment imperfections)
};

/// Polarisation-angle sweep: g_x = g cos(theta), g_y = g sin(theta) on the
/// first two modes. theta in radians in the CSV.
inline std::string run_polarisation_sweep(SystemParams base, const SweepSpec& theta_rad,
                                          const PolarisationSweepOptions& opt = {},
                                          unsigned n_threads = 1, std::uint64_t seed = 0) {
    if (base.modes.size() < 2)
        throw std::invalid_argument("polarisation sweep needs two mechanical modes");
    double g_total = opt.g_total;
    if (g_total == 0.0)
        g_total = std::hypot(base.modes[0].g, base.modes[1].g);

    std::vector<std::string> rows(static_cast<std::size_t>(theta_rad.steps));
    parallel_for(rows.size(), n_threads, [&](std::size_t i) {
        const double theta = theta_rad.at(static_cast<int>(i));
        auto [gx, gy] = coupling_from_polarisation(theta, g_total);
        if (std::abs(gx) < opt.residual_coupling)
            gx = std::copysign(opt.residual_coupling, gx == 0.0 ? 1.0 : gx);
        if (std::abs(gy) < opt.residual_coupling)
            gy = std::copysign(opt.residual_coupling, gy == 0.0 ? 1.0 : gy);
        SystemParams p = base;
        p.modes[0].g = gx;
        p.modes[1].g = gy;
        const auto occ = per_mode_occupations(p);
        std::ostringstream row;
        row << format_double(theta) << "," << format_double(rad_to_khz(gx)) << ","
            << format_double(rad_to_khz(gy));
        for (int j = 0; j < 2; ++j)
            row << "," << (occ.n[static_cast<std::size_t>(j)]
                               ? format_double(*occ.n[static_cast<std::size_t>(j)])
                               : "nan");
        row << "," << (occ.stable ? 1 : 0) << "\n";
        rows[i] = row.str();
    });

    std::ostringstream os;
    os << provenance_header("polarisation-sweep", base, seed);
    os << "theta_rad,g_x_khz,g_y_khz,n_" << base.modes[0].label << ",n_"
       << base.modes[1].label << ",stable\n";
    for (const auto& r : rows) os << r;
    return os.str();
}

/// Mode-spacing sweep at fixed mean frequency: tracks individual and
/// bright/dark collective occupations as the modes approach degeneracy.
inline std::string run_degeneracy_sweep(SystemParams base, const SweepSpec& spacing_khz,
                                        unsigned n_threads = 1, std::uint64_t seed = 0) {
    if (base.modes.size() < 2)
        throw std::invalid_argument("degeneracy sweep needs two mechanical modes");
    const double mean_omega = 0.5 * (base.modes[0].omega + base.modes[1].omega);

    std::vector<std::string> rows(static_cast<std::size_t>(spacing_khz.steps));
    parallel_for(rows.size(), n_threads, [&](std::size_t i) {
        const double spacing = khz_to_rad(spacing_khz.at(static_cast<int>(i)));
        SystemParams p = base;
        p.modes[0].omega = mean_omega - spacing / 2.0;
        p.modes[1].omega = mean_omega + spacing / 2.0;
        const auto occ = per_mode_occupations(p);
        std::ostringstream row;
        row << format_double(rad_to_khz(spacing));
        for (int j = 0; j < 2; ++j)
            row << "," << (occ.n[static_cast<std::size_t>(j)]
                               ? format_double(*occ.n[static_cast<std::size_t>(j)])
                               : "nan");
        std::string nb = "nan", nd = "nan";
        try {
            const auto [b, d] = dark_mode_occupation(p);
            nb = format_double(b);
            nd = format_double(d);
        } catch (const std::exception&) {
        }
        row << "," << nb << "," << nd << "," << (occ.stable ? 1 : 0) << "\n";
        rows[i] = row.str();
    });

    std::ostringstream os;
    os << provenance_header("degeneracy-sweep", base, seed);
    os << "spacing_khz,n_" << base.modes[0].label << ",n_" << base.modes[1].label
       << ",n_bright,n_dark,stable\n";
    for (const auto& r : rows) os << r;
    return os.str();
}

/// Parallel error map plus long-format CSV
/// (spacing_khz, g_khz, dnx, dny, mask_reason).
inline ErrorMap run_error_map(const SystemParams& base, const std::vector<double>& spacing_hz,
                              const std::vector<double>& g_hz, unsigned n_threads = 1,
                              const ErrorMapOptions& opt = {}) {
    ErrorMap map;
    map.spacing_grid_hz = spacing_hz;
    map.g_grid_hz = g_hz;
    map.cells.resize(spacing_hz.size() * g_hz.size());
    parallel_for(map.cells.size(), n_threads, [&](std::size_t i) {
        const double s = spacing_hz[i / g_hz.size()];
        const double g = g_hz[i % g_hz.size()];
        map.cells[i] = error_map_cell(base, s, g, opt);
    });
    return map;
}

inline std::string error_map_csv(const ErrorMap& map, const SystemParams& base,
                                 std::uint64_t seed = 0) {
    std::ostringstream os;
    os << provenance_header("error-map", base, seed);
    os << "spacing_khz,g_khz,dnx,dny,n_model_x,n_model_y,mask_reason\n";
    for (const auto& c : map.cells) {
        os << format_double(c.spacing_hz / 1e3) << "," << format_double(c.g_hz / 1e3) << ",";
        switch (c.mask) {
        case CellMask::Ok:
            os << format_double(c.dn_x) << "," << format_double(c.dn_y) << ","
               << format_double(c.n_model_x) << "," << format_double(c.n_model_y) << ",ok";
            break;
        case CellMask::Degenerate:
            os << "nan,nan,nan,nan,degenerate";
            break;
        case CellMask::Unstable:
            os << "nan,nan,nan,nan,unstable";
            break;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace cscool
