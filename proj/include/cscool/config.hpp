#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cscool/params.hpp"
#include "cscool/units.hpp"

// Config file schema (JSON, frequencies in kHz, eta dimensionless):
//
// {
//   "cavity":    { "kappa_khz": 330.0, "detuning_khz": 232.0, "eta": 1.0 },
//   "modes":     [ { "label": "x", "omega_khz": 230.0, "g_khz": 14.1,
//                    "gamma_khz": 0.0, "heating_khz": 1.0 }, ... ],
//   "detection": { "if_freq_khz": 1500.0 }
// }
//
// heating_khz is the recoil heating rate expressed as Gamma/2pi, i.e. the
// mode heats at 2pi * heating_khz * 1e3 phonons per second.

namespace cscool {

inline SystemParams params_from_json(const nlohmann::json& j) {
    SystemParams p;
    const auto& cav = j.at("cavity");
    p.cavity.kappa = khz_to_rad(cav.at("kappa_khz").get<double>());
    p.cavity.detuning = khz_to_rad(cav.at("detuning_khz").get<double>());
    p.cavity.eta = cav.value("eta", 1.0);
    for (const auto& jm : j.at("modes")) {
        MechMode m;
        m.label = jm.at("label").get<std::string>();
        m.omega = khz_to_rad(jm.at("omega_khz").get<double>());
        m.g = khz_to_rad(jm.value("g_khz", 0.0));
        m.gamma = khz_to_rad(jm.value("gamma_khz", 0.0));
        m.heating = khz_to_rad(jm.value("heating_khz", 0.0));
        p.modes.push_back(std::move(m));
    }
    if (j.contains("detection"))
        p.if_freq = khz_to_rad(j.at("detection").value("if_freq_khz", 0.0));
    check_invariants(p);
    return p;
}

inline nlohmann::json params_to_json(const SystemParams& p) {
    nlohmann::json j;
    j["cavity"] = {{"kappa_khz", rad_to_khz(p.cavity.kappa)},
                   {"detuning_khz", rad_to_khz(p.cavity.detuning)},
                   {"eta", p.cavity.eta}};
    j["modes"] = nlohmann::json::array();
    for (const auto& m : p.modes) {
        j["modes"].push_back({{"label", m.label},
                              {"omega_khz", rad_to_khz(m.omega)},
                              {"g_khz", rad_to_khz(m.g)},
                              {"gamma_khz", rad_to_khz(m.gamma)},
                              {"heating_khz", rad_to_khz(m.heating)}});
    }
    j["detection"] = {{"if_freq_khz", rad_to_khz(p.if_freq)}};
    return j;
}

inline SystemParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("malformed config " + path + ": " + e.what());
    }
    return params_from_json(j);
}

/// FNV-1a over the canonical (sorted-key, fixed precision) JSON dump.
/// Used as the provenance hash stamped into every output CSV.
inline std::uint64_t params_hash(const SystemParams& p) {
    const std::string s = params_to_json(p).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string params_hash_hex(const SystemParams& p) {
    std::ostringstream os;
    os << std::hex << params_hash(p);
    return os.str();
}

} // namespace cscool
