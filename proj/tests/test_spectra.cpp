#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cscool/spectra.hpp"
#include "test_support.hpp"

using namespace cscool;
using Catch::Approx;

TEST_CASE("cavity gain at the named offsets") {
    const TransferFunction tf{khz_to_rad(330.0), khz_to_rad(232.0)};
    CHECK(cavity_gain(tf, tf.detuning) == 1.0);
    CHECK(cavity_gain(tf, tf.detuning + tf.kappa / 2.0) == Approx(0.5));
    CHECK(cavity_gain(tf, tf.detuning - tf.kappa / 2.0) == Approx(0.5));

    // hand check: kappa/2pi = 330, Delta/2pi = 232, Omega_y/2pi = 268 kHz
    const double omega_y = khz_to_rad(268.0);
    const double ratio = cavity_gain(tf, omega_y) / cavity_gain(tf, -omega_y);
    const double by_hand = (165.0 * 165.0 + 500.0 * 500.0) / (165.0 * 165.0 + 36.0 * 36.0);
    CHECK(ratio == Approx(by_hand).epsilon(1e-12));
    CHECK(by_hand == Approx(9.72).margin(0.005));
}

TEST_CASE("no coupling means pure shot noise") {
    auto p = testing::ground_state_point();
    p.modes[0].g = p.modes[1].g = 0.0;
    p.modes[0].heating = p.modes[1].heating = 0.0;
    p.modes[0].gamma = p.modes[1].gamma = khz_to_rad(1.0);
    const auto spec = heterodyne_psd(build_model(p), p, linspace_hz(-3e5, 3e5, 2001));
    for (double v : spec.psd) CHECK(v == Approx(1.0).margin(1e-12));
}

TEST_CASE("sideband weight identity links spectrum and steady state") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 10; ++i) {
        const auto p = testing::random_cooling_params(rng);
        const auto model = build_model(p);
        const auto ss = solve_steady_state(model);
        const double span = rad_to_hz(std::max(p.modes[0].omega, p.modes[1].omega)) + 8e4;
        const auto spec = heterodyne_psd(model, p, linspace_hz(-span, span, 120001));
        const TransferFunction tf{p.cavity.kappa, p.cavity.detuning};
        for (std::size_t j = 0; j < 2; ++j) {
            const double f = rad_to_hz(p.modes[j].omega);
            const double halfwin =
                std::min(0.45 * std::abs(rad_to_hz(p.modes[1].omega - p.modes[0].omega)), 2e4);
            const double w_plus = sideband_weight(spec, +f, halfwin);
            const double w_minus = sideband_weight(spec, -f, halfwin);
            const double n = ss.occupations[j];
            const double expect = n / (n + 1.0) * cavity_gain(tf, p.modes[j].omega) /
                                  cavity_gain(tf, -p.modes[j].omega);
            CHECK(w_plus / w_minus == Approx(expect).epsilon(0.02));
        }
    }
}

TEST_CASE("shot-noise floor far from the sidebands") {
    const auto p = testing::ground_state_point();
    const auto model = build_model(p);
    const auto spec = heterodyne_psd(model, p, {-6e5, -5.5e5, 5.5e5, 6e5});
    for (double v : spec.psd) {
        CHECK(v >= 1.0);
        CHECK(v == Approx(1.0).margin(1e-3));
    }
}

TEST_CASE("four sidebands with optically broadened linewidths") {
    const auto p = testing::ground_state_point();
    const auto spec = heterodyne_psd(build_model(p), p, linspace_hz(-3.2e5, 3.2e5, 64001));
    // peaks near +-230 and +-270 kHz
    for (double f : {-270e3, -230e3, 230e3, 270e3}) {
        double peak = 0.0;
        for (std::size_t i = 0; i < spec.freqs.size(); ++i)
            if (std::abs(spec.freqs[i] - f) < 1e4) peak = std::max(peak, spec.psd[i]);
        CHECK(peak > 1.5);
    }
    // widths far above the bare gamma = 0: half-max extent of the +230 peak
    double lo = 0.0, hi = 0.0, peak = 0.0;
    std::size_t ipk = 0;
    for (std::size_t i = 0; i < spec.freqs.size(); ++i)
        if (std::abs(spec.freqs[i] - 230e3) < 1e4 && spec.psd[i] > peak) {
            peak = spec.psd[i];
            ipk = i;
        }
    const double half = 1.0 + (peak - 1.0) / 2.0;
    for (std::size_t i = ipk; i-- > 0;)
        if (spec.psd[i] < half) { lo = spec.freqs[i]; break; }
    for (std::size_t i = ipk; i < spec.freqs.size(); ++i)
        if (spec.psd[i] < half) { hi = spec.freqs[i]; break; }
    CHECK(hi - lo > 500.0);  // kHz-scale optical damping, not the bare linewidth
}

TEST_CASE("spectrum is invariant under mode relabeling") {
    auto p = testing::ground_state_point();
    const auto a = heterodyne_psd(build_model(p), p, linspace_hz(-3e5, 3e5, 4001));
    std::swap(p.modes[0], p.modes[1]);
    const auto b = heterodyne_psd(build_model(p), p, linspace_hz(-3e5, 3e5, 4001));
    for (std::size_t i = 0; i < a.psd.size(); ++i)
        CHECK(a.psd[i] == Approx(b.psd[i]).epsilon(1e-12));
}

TEST_CASE("scattered power grows with each coupling") {
    auto p = testing::ground_state_point();
    const auto freqs = linspace_hz(-3.2e5, 3.2e5, 32001);
    const auto total_power = [&](const SystemParams& q) {
        const auto s = heterodyne_psd(build_model(q), q, freqs);
        double w = 0.0;
        for (const auto& m : q.modes) {
            const double f = rad_to_hz(m.omega);
            w += sideband_weight(s, +f, 1.5e4) + sideband_weight(s, -f, 1.5e4);
        }
        return w;
    };
    double prev = total_power(p);
    for (double scale : {1.15, 1.3, 1.45}) {
        auto q = p;
        q.modes[0].g *= scale;
        const double w = total_power(q);
        CHECK(w > prev);
        prev = w;
    }
    prev = total_power(p);
    for (double scale : {1.15, 1.3, 1.45}) {
        auto q = p;
        q.modes[1].g *= scale;
        const double w = total_power(q);
        CHECK(w > prev);
        prev = w;
    }
}

TEST_CASE("eta rescales sidebands but cancels in the asymmetry") {
    auto p = testing::ground_state_point();
    const auto freqs = linspace_hz(-3.2e5, 3.2e5, 32001);
    const auto full = heterodyne_psd(build_model(p), p, freqs);
    p.cavity.eta = 0.3;
    const auto attenuated = heterodyne_psd(build_model(p), p, freqs);
    const double f = rad_to_hz(p.modes[0].omega);
    CHECK(sideband_weight(attenuated, f, 1.5e4) ==
          Approx(0.3 * sideband_weight(full, f, 1.5e4)).epsilon(1e-9));
    const double r_full = sideband_weight(full, f, 1.5e4) / sideband_weight(full, -f, 1.5e4);
    const double r_att =
        sideband_weight(attenuated, f, 1.5e4) / sideband_weight(attenuated, -f, 1.5e4);
    CHECK(r_full == Approx(r_att).epsilon(1e-9));
}

TEST_CASE("unstable models are rejected") {
    auto p = testing::ground_state_point();
    p.cavity.detuning = -p.cavity.detuning;
    p.modes[0].g = khz_to_rad(60.0);
    const auto m = build_model(p);
    CHECK_THROWS_AS(heterodyne_psd(m, p, linspace_hz(-3e5, 3e5, 101)), UnstableError);
}

TEST_CASE("measurement synthesis converges to the noiseless spectrum") {
    const auto p = testing::ground_state_point();
    const auto clean = heterodyne_psd(build_model(p), p, linspace_hz(-3e5, 3e5, 2001));
    const auto noisy = synthesize_measurement(clean, 100000, 100.0, 42);
    double worst = 0.0;
    for (std::size_t i = 0; i < clean.psd.size(); ++i)
        worst = std::max(worst, std::abs(noisy.psd[i] / clean.psd[i] - 1.0));
    CHECK(worst < 0.02);
    double mean_ratio = 0.0;
    for (std::size_t i = 0; i < clean.psd.size(); ++i) mean_ratio += noisy.psd[i] / clean.psd[i];
    CHECK(mean_ratio / static_cast<double>(clean.psd.size()) == Approx(1.0).margin(0.001));
}

TEST_CASE("single-average bins fluctuate at unit relative spread") {
    const auto p = testing::ground_state_point();
    const auto clean = heterodyne_psd(build_model(p), p, linspace_hz(-3e5, 3e5, 20001));
    const auto noisy = synthesize_measurement(clean, 1, 100.0, 7);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < clean.psd.size(); ++i) {
        const double r = noisy.psd[i] / clean.psd[i];
        sum += r;
        sum2 += r * r;
    }
    const double n = static_cast<double>(clean.psd.size());
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(mean == Approx(1.0).margin(0.03));
    CHECK(sd == Approx(1.0).margin(0.05));
}

TEST_CASE("fixed seed reproduces measurement noise bit-exactly") {
    const auto p = testing::ground_state_point();
    const auto clean = heterodyne_psd(build_model(p), p, linspace_hz(-3e5, 3e5, 501));
    const auto a = synthesize_measurement(clean, 200, 100.0, 12345);
    const auto b = synthesize_measurement(clean, 200, 100.0, 12345);
    for (std::size_t i = 0; i < a.psd.size(); ++i) CHECK(a.psd[i] == b.psd[i]);
    CHECK_THROWS_AS(synthesize_measurement(clean, 0, 100.0, 1), std::invalid_argument);
}
