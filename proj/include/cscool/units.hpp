#pragma once

#include <numbers>

// Unit conventions used throughout:
// all internal math is angular frequency (rad/s) with hbar = 1;
// every I/O surface (config, CSV, CLI flags) speaks ordinary frequency
// in Hz or kHz. Conversions happen exactly once, at the boundary.

namespace cscool {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hz_to_rad(double f_hz) { return two_pi * f_hz; }
inline constexpr double rad_to_hz(double w_rad) { return w_rad / two_pi; }

inline constexpr double khz_to_rad(double f_khz) { return two_pi * 1e3 * f_khz; }
inline constexpr double rad_to_khz(double w_rad) { return w_rad / (two_pi * 1e3); }

} // namespace cscool
