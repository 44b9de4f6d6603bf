#pragma once

#include <random>

#include "cscool/params.hpp"
#include "cscool/units.hpp"

namespace cscool::testing {

/// Operating point of the two-mode ground-state cooling experiment:
/// kappa/2pi = 330 kHz, sidebands at 230/270 kHz, g/2pi = 14.1/15.4 kHz,
/// recoil heating 1.0 kHz per mode.
inline SystemParams ground_state_point(double delta_khz = 232.0) {
    SystemParams p;
    p.cavity.kappa = khz_to_rad(330.0);
    p.cavity.detuning = khz_to_rad(delta_khz);
    p.cavity.eta = 1.0;
    p.modes = {
        {khz_to_rad(230.0), khz_to_rad(14.1), 0.0, khz_to_rad(1.0), "x"},
        {khz_to_rad(270.0), khz_to_rad(15.4), 0.0, khz_to_rad(1.0), "y"},
    };
    p.if_freq = khz_to_rad(1500.0);
    return p;
}

/// Random two-mode parameter set inside the weak-coupling cooling regime;
/// red-detuned near the mean mechanical frequency, so stable in practice.
inline SystemParams random_cooling_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SystemParams p;
    p.cavity.kappa = khz_to_rad(200.0 + 300.0 * u(rng));
    p.cavity.eta = 1.0;
    const double omega_x = 150.0 + 150.0 * u(rng);
    const double spacing = 20.0 + 60.0 * u(rng);
    p.modes = {
        {khz_to_rad(omega_x), khz_to_rad(5.0 + 12.0 * u(rng)), 0.0,
         khz_to_rad(0.3 + 2.0 * u(rng)), "x"},
        {khz_to_rad(omega_x + spacing), khz_to_rad(5.0 + 12.0 * u(rng)), 0.0,
         khz_to_rad(0.3 + 2.0 * u(rng)), "y"},
    };
    p.cavity.detuning = khz_to_rad(omega_x + spacing / 2.0 + 30.0 * (u(rng) - 0.5));
    p.if_freq = khz_to_rad(1500.0);
    return p;
}

} // namespace cscool::testing
