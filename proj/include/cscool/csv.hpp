#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cscool/spectra.hpp"

// Spectrum CSV format:
//   # cscool spectrum v1
//   # params_hash: <hex>
//   # rbw_hz: <value>
//   # n_averages: <value>
//   # seed: <value>
//   freq_hz,psd_shotnoise_units
//   <freq>,<psd>
// Values are printed with 17 significant digits so ingest(emit(s)) is
// bit-exact and emit(ingest(file)) reproduces the file byte for byte.

namespace cscool {

inline const char* spectrum_csv_magic = "# cscool spectrum v1";

struct MalformedCsv : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonMonotoneFrequencies : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string emit_spectrum_csv(const Spectrum& s) {
    std::ostringstream os;
    os << spectrum_csv_magic << "\n";
    os << "# params_hash: " << s.params_hash << "\n";
    os << "# rbw_hz: " << format_double(s.rbw_hz) << "\n";
    os << "# n_averages: " << s.n_averages << "\n";
    os << "# seed: " << s.seed << "\n";
    os << "freq_hz,psd_shotnoise_units\n";
    for (std::size_t i = 0; i < s.freqs.size(); ++i)
        os << format_double(s.freqs[i]) << "," << format_double(s.psd[i]) << "\n";
    return os.str();
}

inline void write_spectrum_csv(const Spectrum& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << emit_spectrum_csv(s);
}

inline double parse_double(const std::string& tok, std::size_t line_no) {
    double v{};
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
        throw MalformedCsv("bad numeric field '" + tok + "' on line " +
                           std::to_string(line_no));
    return v;
}

/// Parses the spectrum CSV format above. Header comment lines are optional
/// (external data may lack provenance); the column header line is not.
inline Spectrum ingest_spectrum_csv_text(const std::string& text) {
    std::istringstream in(text);
    Spectrum s;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto parse_meta = [&](const char* key) -> std::string {
                const std::string k = std::string("# ") + key + ": ";
                if (line.rfind(k, 0) == 0) return line.substr(k.size());
                return {};
            };
            if (auto v = parse_meta("params_hash"); !v.empty()) s.params_hash = v;
            if (auto v = parse_meta("rbw_hz"); !v.empty()) s.rbw_hz = parse_double(v, line_no);
            if (auto v = parse_meta("n_averages"); !v.empty())
                s.n_averages = static_cast<int>(parse_double(v, line_no));
            if (auto v = parse_meta("seed"); !v.empty())
                s.seed = static_cast<std::uint64_t>(parse_double(v, line_no));
            continue;
        }
        if (!saw_header) {
            if (line.rfind("freq_hz,", 0) != 0)
                throw MalformedCsv("missing column header on line " + std::to_string(line_no));
            saw_header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw MalformedCsv("expected two comma-separated fields on line " +
                               std::to_string(line_no));
        const double f = parse_double(line.substr(0, comma), line_no);
        const double p = parse_double(line.substr(comma + 1), line_no);
        if (!s.freqs.empty() && !(f > s.freqs.back()))
            throw NonMonotoneFrequencies("frequency column not strictly increasing at line " +
                                         std::to_string(line_no));
        s.freqs.push_back(f);
        s.psd.push_back(p);
    }
    if (!saw_header || s.freqs.empty())
        throw MalformedCsv("no spectrum data found");
    return s;
}

inline Spectrum ingest_spectrum_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_spectrum_csv_text(buf.str());
}

} // namespace cscool
