#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cscool/csv.hpp"
#include "cscool/sweeps.hpp"
#include "test_support.hpp"

using namespace cscool;
using Catch::Approx;

namespace fs = std::filesystem;

namespace {

Spectrum small_spectrum() {
    const auto p = testing::ground_state_point();
    auto s = heterodyne_psd(build_model(p), p, linspace_hz(-3e5, 3e5, 2001));
    s.rbw_hz = 100.0;
    return s;
}

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "cscool_test";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("spectrum CSV emits and ingests bit-exactly") {
    const auto s = synthesize_measurement(small_spectrum(), 200, 100.0, 99);
    const std::string text = emit_spectrum_csv(s);
    const auto back = ingest_spectrum_csv_text(text);
    REQUIRE(back.freqs.size() == s.freqs.size());
    for (std::size_t i = 0; i < s.freqs.size(); ++i) {
        CHECK(back.freqs[i] == s.freqs[i]);
        CHECK(back.psd[i] == s.psd[i]);
    }
    CHECK(back.params_hash == s.params_hash);
    CHECK(back.n_averages == s.n_averages);
    CHECK(back.seed == s.seed);
    CHECK(emit_spectrum_csv(back) == text);
}

TEST_CASE("duplicated frequency rows are rejected") {
    std::string text = "freq_hz,psd_shotnoise_units\n1,1\n2,1\n2,1\n3,1\n";
    CHECK_THROWS_AS(ingest_spectrum_csv_text(text), NonMonotoneFrequencies);
}

TEST_CASE("malformed CSV is rejected") {
    CHECK_THROWS_AS(ingest_spectrum_csv_text("freq_hz,psd\n1,abc\n"), MalformedCsv);
    CHECK_THROWS_AS(ingest_spectrum_csv_text("1,2\n3,4\n"), MalformedCsv);
    CHECK_THROWS_AS(ingest_spectrum_csv_text(""), MalformedCsv);
    CHECK_THROWS_AS(ingest_spectrum_csv_text("freq_hz,psd_shotnoise_units\n"), MalformedCsv);
}

TEST_CASE("ingested synthetic spectrum reproduces generator occupations") {
    const auto p = testing::ground_state_point();
    const auto model = build_model(p);
    const auto ss = solve_steady_state(model);
    auto s = heterodyne_psd(model, p, linspace_hz(-3.3e5, 3.3e5, 66001));

    const auto path = temp_dir() / "pipeline_spectrum.csv";
    write_spectrum_csv(s, path.string());
    const auto loaded = ingest_spectrum_csv(path.string());

    const TransferFunction tf{p.cavity.kappa, p.cavity.detuning};
    const auto results = run_thermometry(loaded, {230e3, 270e3}, tf, {"x", "y"});
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(results[j].n_est == Approx(ss.occupations[j]).epsilon(0.03));
}

TEST_CASE("sweep outputs carry provenance and reproduce bit-exactly") {
    const auto p = testing::ground_state_point();
    const SweepSpec sweep{200.0, 300.0, 11};
    const auto a = run_detuning_sweep(p, sweep, 4, 7);
    const auto b = run_detuning_sweep(p, sweep, 1, 7);
    CHECK(a == b);  // thread count must not affect the artifact
    CHECK(a.find("# config_hash: " + params_hash_hex(p)) != std::string::npos);
    CHECK(a.find("# tool_version: ") != std::string::npos);
    CHECK(a.find("# seed: 7") != std::string::npos);

    const auto pol = run_polarisation_sweep(p, {0.25 * std::numbers::pi,
                                                0.5 * std::numbers::pi, 5});
    CHECK(pol.find("# config_hash: ") != std::string::npos);
    const auto deg = run_degeneracy_sweep(p, {44.0, 0.0, 5});
    CHECK(deg.find("# config_hash: ") != std::string::npos);
}

TEST_CASE("single-step sweep equals single-point invocation") {
    auto p = testing::ground_state_point();
    const auto csv = run_detuning_sweep(p, {232.0, 232.0, 1});
    p.cavity.detuning = khz_to_rad(232.0);
    const auto ss = solve_steady_state(build_model(p));
    std::istringstream in(csv);
    std::string line, data;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#' && line.find("delta") == std::string::npos)
            data = line;
    REQUIRE_FALSE(data.empty());
    std::istringstream row(data);
    std::string tok;
    std::getline(row, tok, ',');
    CHECK(parse_double(tok, 0) == Approx(232.0));
    std::getline(row, tok, ',');
    CHECK(parse_double(tok, 0) == Approx(ss.occupations[0]).epsilon(1e-12));
    std::getline(row, tok, ',');
    CHECK(parse_double(tok, 0) == Approx(ss.occupations[1]).epsilon(1e-12));
}

TEST_CASE("detuning sweep flags all points when the cooling channel is off") {
    auto p = testing::ground_state_point();
    p.modes[0].g = p.modes[1].g = 0.0;
    const auto csv = run_detuning_sweep(p, {200.0, 300.0, 5});
    std::istringstream in(csv);
    std::string line;
    int data_rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("delta", 0) == 0) continue;
        ++data_rows;
        CHECK(line.find("nan") != std::string::npos);  // no per-mode steady state
        CHECK(line.back() == '0');                     // stable flag down
    }
    CHECK(data_rows == 5);
}

#ifdef CSCOOL_CLI_PATH
TEST_CASE("command-line interface round trip") {
    const auto dir = temp_dir() / "cli";
    fs::create_directories(dir);
    const auto config = dir / "config.json";
    {
        std::ofstream out(config);
        out << params_to_json(testing::ground_state_point()).dump(2);
    }
    const std::string cli = CSCOOL_CLI_PATH;

    SECTION("spectrum then thermometry") {
        std::string cmd = cli + " spectrum --config " + config.string() + " --out " +
                          dir.string() + " --span-khz 330 --resolution-hz 20 2>/dev/null";
        REQUIRE(std::system(cmd.c_str()) == 0);
        REQUIRE(fs::exists(dir / "spectrum.csv"));

        cmd = cli + " thermometry " + (dir / "spectrum.csv").string() + " --config " +
              config.string() + " --out " + dir.string() + " 2>/dev/null";
        REQUIRE(std::system(cmd.c_str()) == 0);
        REQUIRE(fs::exists(dir / "thermometry.csv"));

        std::ifstream in(dir / "thermometry.csv");
        std::stringstream buf;
        buf << in.rdbuf();
        CHECK(buf.str().find("# config_hash: ") != std::string::npos);
        CHECK(buf.str().find("x,") != std::string::npos);
        CHECK(buf.str().find("y,") != std::string::npos);
    }

    SECTION("bad config exits nonzero with JSON on stderr") {
        const auto bad = dir / "bad.json";
        {
            std::ofstream out(bad);
            out << "{ not json";
        }
        const auto errfile = dir / "stderr.txt";
        const std::string cmd = cli + " sweep-detuning --config " + bad.string() + " --out " +
                                dir.string() + " 2> " + errfile.string();
        CHECK(std::system(cmd.c_str()) != 0);
        std::ifstream in(errfile);
        std::stringstream buf;
        buf << in.rdbuf();
        CHECK(buf.str().find("{\"error\":") != std::string::npos);
    }
}
#endif
