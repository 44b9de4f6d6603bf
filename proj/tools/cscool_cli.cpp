// Command-line reproduction harness: scenario runners over a JSON config,
// emitting provenance-stamped CSV artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cscool/analysis.hpp"
#include "cscool/config.hpp"
#include "cscool/csv.hpp"
#include "cscool/dynamics.hpp"
#include "cscool/spectra.hpp"
#include "cscool/sweeps.hpp"
#include "cscool/thermometry.hpp"

namespace fs = std::filesystem;
using namespace cscool;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c, bool config_required = true) {
    auto* o = cmd->add_option("--config", c.config_path, "system parameters (JSON)");
    if (config_required) o->required();
    cmd->add_option("--out", c.out_dir, "output directory");
    cmd->add_option("--seed", c.seed, "RNG seed for synthetic noise");
    cmd->add_option("--threads", c.threads, "worker threads for sweep points");
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    std::cerr << "wrote " << path.string() << "\n";
}

/// CLI overrides take precedence over the config file.
struct ParamOverrides {
    double detuning_khz = std::numeric_limits<double>::quiet_NaN();
    double eta = std::numeric_limits<double>::quiet_NaN();

    void apply(SystemParams& p) const {
        if (!std::isnan(detuning_khz)) p.cavity.detuning = khz_to_rad(detuning_khz);
        if (!std::isnan(eta)) p.cavity.eta = eta;
    }
};

void add_overrides(CLI::App* cmd, ParamOverrides& ov) {
    cmd->add_option("--detuning-khz", ov.detuning_khz,
                    "override cavity detuning from the config");
    cmd->add_option("--eta", ov.eta, "override detection efficiency");
}

std::vector<double> grid_hz(double start_khz, double stop_khz, int steps) {
    std::vector<double> g;
    for (int i = 0; i < steps; ++i)
        g.push_back(1e3 * (steps == 1 ? start_khz
                                      : start_khz + (stop_khz - start_khz) * i / (steps - 1)));
    return g;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-mode coherent-scattering cavity cooling toolkit"};
    app.require_subcommand(1);

    CommonOpts c;
    ParamOverrides ov;

    // sweep-detuning
    auto* sd = app.add_subcommand("sweep-detuning",
                                  "occupations vs cavity detuning (Lyapunov + rate equation)");
    SweepSpec sd_sweep{150.0, 350.0, 50};
    add_common(sd, c);
    sd->add_option("--start-khz", sd_sweep.start, "first detuning (kHz)");
    sd->add_option("--stop-khz", sd_sweep.stop, "last detuning (kHz)");
    sd->add_option("--steps", sd_sweep.steps, "number of sweep points")
        ->check(CLI::PositiveNumber);

    // sweep-polarisation
    auto* sp = app.add_subcommand("sweep-polarisation",
                                  "occupations vs trap polarisation angle theta");
    SweepSpec sp_sweep{0.25 * std::numbers::pi, 0.5 * std::numbers::pi, 9};
    PolarisationSweepOptions sp_opt;
    add_common(sp, c);
    add_overrides(sp, ov);
    sp->add_option("--start-rad", sp_sweep.start, "first theta (rad)");
    sp->add_option("--stop-rad", sp_sweep.stop, "last theta (rad)");
    sp->add_option("--steps", sp_sweep.steps, "number of sweep points")
        ->check(CLI::PositiveNumber);
    double sp_gtotal_khz = 0.0, sp_residual_khz = 0.0;
    sp->add_option("--g-total-khz", sp_gtotal_khz,
                   "total coupling rate (kHz); default sqrt(g_x^2+g_y^2) from config");
    sp->add_option("--residual-coupling-khz", sp_residual_khz,
                   "floor on |g_j| from polarisation imperfections (kHz)");

    // sweep-degeneracy
    auto* sg = app.add_subcommand("sweep-degeneracy",
                                  "occupations vs mode spacing at fixed mean frequency");
    SweepSpec sg_sweep{44.0, 0.0, 23};
    add_common(sg, c);
    add_overrides(sg, ov);
    sg->add_option("--start-khz", sg_sweep.start, "first spacing (kHz)");
    sg->add_option("--stop-khz", sg_sweep.stop, "last spacing (kHz)");
    sg->add_option("--steps", sg_sweep.steps, "number of sweep points")
        ->check(CLI::PositiveNumber);

    // error-map
    auto* em = app.add_subcommand("error-map",
                                  "systematic thermometry error over (spacing, coupling)");
    add_common(em, c);
    add_overrides(em, ov);
    double em_s0 = 0.0, em_s1 = 60.0, em_g0 = 2.0, em_g1 = 40.0;
    int em_ns = 20, em_ng = 20;
    em->add_option("--spacing-start-khz", em_s0);
    em->add_option("--spacing-stop-khz", em_s1);
    em->add_option("--spacing-steps", em_ns)->check(CLI::PositiveNumber);
    em->add_option("--g-start-khz", em_g0);
    em->add_option("--g-stop-khz", em_g1);
    em->add_option("--g-steps", em_ng)->check(CLI::PositiveNumber);

    // spectrum
    auto* sc = app.add_subcommand("spectrum", "synthesize a heterodyne PSD");
    add_common(sc, c);
    add_overrides(sc, ov);
    double sc_span_khz = 350.0, sc_res_hz = 25.0, sc_rbw = 100.0;
    int sc_averages = 0;
    sc->add_option("--span-khz", sc_span_khz, "one-sided frequency span (kHz)");
    sc->add_option("--resolution-hz", sc_res_hz, "grid spacing (Hz)");
    sc->add_option("--averages", sc_averages,
                   "synthesize measurement noise with this many averages (0 = noiseless)");
    sc->add_option("--rbw-hz", sc_rbw, "resolution bandwidth recorded in metadata");

    // thermometry
    auto* th = app.add_subcommand("thermometry", "sideband thermometry on a PSD CSV");
    std::string th_psd_path;
    bool th_renorm = false, th_float_offset = false;
    std::vector<double> th_guesses_khz;
    add_common(th, c);
    add_overrides(th, ov);
    th->add_option("psd", th_psd_path, "spectrum CSV (freq_hz,psd)")->required();
    th->add_flag("--renormalize", th_renorm,
                 "divide the PSD by its median value before fitting");
    th->add_flag("--float-offset", th_float_offset, "fit the noise floor instead of fixing it at 1");
    th->add_option("--centers-khz", th_guesses_khz,
                   "per-mode sideband center guesses (kHz); default from config");

    CLI11_PARSE(app, argc, argv);

    try {
        SystemParams params = load_params(c.config_path);
        ov.apply(params);
        for (const auto& v : validate(params))
            std::cerr << "warning: cooling condition violated: " << v.detail << "\n";
        const fs::path out_dir(c.out_dir);

        if (sd->parsed()) {
            write_text(out_dir / "detuning_sweep.csv",
                       run_detuning_sweep(params, sd_sweep, c.threads, c.seed));
        } else if (sp->parsed()) {
            sp_opt.g_total = khz_to_rad(sp_gtotal_khz);
            sp_opt.residual_coupling = khz_to_rad(sp_residual_khz);
            write_text(out_dir / "polarisation_sweep.csv",
                       run_polarisation_sweep(params, sp_sweep, sp_opt, c.threads, c.seed));
        } else if (sg->parsed()) {
            write_text(out_dir / "degeneracy_sweep.csv",
                       run_degeneracy_sweep(params, sg_sweep, c.threads, c.seed));
        } else if (em->parsed()) {
            const auto map = run_error_map(params, grid_hz(em_s0, em_s1, em_ns),
                                           grid_hz(em_g0, em_g1, em_ng), c.threads);
            write_text(out_dir / "error_map.csv", error_map_csv(map, params, c.seed));
        } else if (sc->parsed()) {
            const auto model = build_model(params);
            const double span = sc_span_khz * 1e3;
            const auto n_pts = static_cast<std::size_t>(2.0 * span / sc_res_hz) + 1;
            auto spec = heterodyne_psd(model, params, linspace_hz(-span, span, n_pts));
            spec.rbw_hz = sc_rbw;
            if (sc_averages > 0)
                spec = synthesize_measurement(spec, sc_averages, sc_rbw, c.seed);
            write_text(out_dir / "spectrum.csv", emit_spectrum_csv(spec));
        } else if (th->parsed()) {
            auto spec = ingest_spectrum_csv(th_psd_path);
            if (th_renorm) {
                auto sorted = spec.psd;
                std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                                 sorted.end());
                const double median = sorted[sorted.size() / 2];
                if (!(median > 0.0)) throw std::runtime_error("non-positive PSD median");
                for (auto& v : spec.psd) v /= median;
            }
            std::vector<double> guesses;
            std::vector<std::string> labels;
            if (!th_guesses_khz.empty()) {
                for (double g : th_guesses_khz) guesses.push_back(g * 1e3);
            } else {
                for (const auto& m : params.modes) {
                    guesses.push_back(rad_to_hz(m.omega));
                    labels.push_back(m.label);
                }
            }
            const TransferFunction tf{params.cavity.kappa, params.cavity.detuning};
            FitOptions fopt;
            fopt.float_offset = th_float_offset;
            const auto results = run_thermometry(spec, guesses, tf, labels, fopt);
            std::ostringstream os;
            os << provenance_header("thermometry", params, c.seed);
            os << "mode,n_est,n_sigma,asymmetry,stokes_center_hz,antistokes_center_hz,"
                  "width_hz,stokes_amp,antistokes_amp,unphysical\n";
            for (const auto& r : results) {
                os << r.label << "," << format_double(r.n_est) << ","
                   << format_double(r.n_sigma) << "," << format_double(r.asymmetry) << ","
                   << format_double(r.fit.stokes.center_hz) << ","
                   << format_double(r.fit.antistokes.center_hz) << ","
                   << format_double(r.fit.antistokes.width_hz) << ","
                   << format_double(r.fit.stokes.amplitude) << ","
                   << format_double(r.fit.antistokes.amplitude) << ","
                   << (r.unphysical ? 1 : 0) << "\n";
            }
            write_text(out_dir / "thermometry.csv", os.str());
        }
    } catch (const std::exception& e) {
        nlohmann::json err = {{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
