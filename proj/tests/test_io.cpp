// Configuration parsing, manifest/CSV emission, and the command entry points:
// strict-schema rejection paths, byte-determinism of outputs, and the
// command-level success/failure contracts on small self-contained scenarios.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "secrecy/io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path d = fs::temp_directory_path() /
                       ("secrecy_io_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::stringstream ss(read_file(p));
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty()) rows.push_back(split(line, ','));
    }
    return rows;
}

// Two-antenna UAV, one eavesdropper between UAV and destination; small
// optimizer caps keep command runs fast.
std::string small_scenario_json(int max_outer = 3, const std::string& extra_radio = "") {
    std::ostringstream ss;
    ss << R"({
  "uav": {
    "start": [0, 0, 10],
    "K": 2,
    "array": {"kind": "circular", "radius_m": 0.6},
    "d_max": 8.0,
    "d_delta": 0.5,
    "altitude_fixed": true
  },
  "radio": {
    "c_p": 1.0,
    "alpha": 2.5,
    "noise_nu": 1.0,
    "p_max": 23607.0,
    "wavelength_m": 0.06)"
       << extra_radio << R"(
  },
  "nodes": [
    {"role": "destination", "position": [20, 0, 0], "N": 2, "kappa": 12.0,
     "array": {"kind": "linear", "spacing_m": 0.12, "azimuth_rad": 0.3}},
    {"role": "eavesdropper", "position": [2, 0, 0], "N": 2, "kappa": 12.0,
     "array": {"kind": "linear", "spacing_m": 0.12, "azimuth_rad": 1.1}}
  ],
  "optimizer": {"max_outer_iters": )"
       << max_outer << R"(, "stall_patience": 2, "subgradient_iters": 300},
  "mc": {"samples": 2000, "seed": 7}
})";
    return ss.str();
}

// Strong-LoS four-antenna destination with a pure-scattering eavesdropper:
// the configuration family whose closed forms the error bands are sized for.
std::string rates_scenario_json() {
    return R"({
  "uav": {
    "start": [0, 0, 10],
    "K": 4,
    "array": {"kind": "circular", "radius_m": 0.6},
    "d_max": 8.0,
    "d_delta": 0.5,
    "altitude_fixed": true
  },
  "radio": {"c_p": 1.0, "alpha": 2.5, "noise_nu": 1.0, "p_max": 23607.0, "wavelength_m": 0.06},
  "nodes": [
    {"role": "destination", "position": [20, 0, 0], "N": 4, "kappa": 12.0,
     "array": {"kind": "linear", "spacing_m": 0.12, "azimuth_rad": 0.3}},
    {"role": "eavesdropper", "position": [10, 6, 0], "N": 4, "kappa": 0.0,
     "array": {"kind": "linear", "spacing_m": 0.12, "azimuth_rad": 1.1}}
  ],
  "mc": {"samples": 4000, "seed": 11}
})";
}

}  // namespace

TEST_CASE("load_scenario: full schema round-trip with optimizer and mc blocks") {
    const fs::path dir = fresh_dir("load");
    const fs::path file = dir / "scenario.json";
    const std::string body = small_scenario_json();
    write_file(file, body);

    const secrecy::LoadedScenario ls = secrecy::load_scenario(file.string());
    CHECK(ls.scenario.K() == 2);
    CHECK(ls.scenario.uav_start.z == 10.0);
    CHECK(ls.scenario.uav_array.kind == secrecy::ArrayKind::circular);
    CHECK(ls.scenario.uav_array.radius_m == 0.6);
    CHECK(ls.scenario.d_max == 8.0);
    CHECK(ls.scenario.d_delta == 0.5);
    CHECK(ls.scenario.altitude_fixed);
    CHECK(ls.scenario.radio.alpha == 2.5);
    CHECK(ls.scenario.radio.p_max == 23607.0);
    CHECK(ls.scenario.radio.phase_model == secrecy::PhaseModel::linear_distance);
    REQUIRE(ls.scenario.nodes.size() == 2);
    CHECK(ls.scenario.nodes[0].role == secrecy::NodeRole::destination);
    CHECK(ls.scenario.nodes[0].position.x == 20.0);
    CHECK(ls.scenario.nodes[0].antennas.element_count == 2);
    CHECK(ls.scenario.nodes[0].rician_kappa == 12.0);
    CHECK(ls.scenario.nodes[1].antennas.azimuth_rad == 1.1);
    CHECK(ls.optimizer.max_outer_iters == 3);
    CHECK(ls.optimizer.stall_patience == 2);
    CHECK(ls.optimizer.subgradient_iters == 300);
    CHECK(ls.optimizer.eps2_bits == 1e-3);  // untouched default
    CHECK(ls.mc.samples == 2000);
    CHECK(ls.mc.seed == 7);
    CHECK(ls.digest == secrecy::fnv1a_hex(body));
    CHECK(!ls.echo.empty());
}

TEST_CASE("load_scenario: strict schema rejection names the offending field") {
    const fs::path dir = fresh_dir("strict");
    auto expect_parse_error = [&](const std::string& body, const std::string& needle) {
        const fs::path file = dir / "bad.json";
        write_file(file, body);
        try {
            secrecy::load_scenario(file.string());
            FAIL_CHECK("expected ParseError mentioning '", needle, "'");
        } catch (const secrecy::ParseError& e) {
            const std::string msg = e.what();
            CHECK_MESSAGE(msg.find(needle) != std::string::npos,
                          "message was: ", msg, " (wanted: ", needle, ")");
        }
    };

    // Missing required section.
    expect_parse_error(R"({"uav": {"start": [0,0,10], "K": 2,
        "array": {"kind": "circular", "radius_m": 0.6}, "d_max": 8.0},
        "radio": {"alpha": 2.5}})",
                       "nodes");

    // Unknown keys at several depths.
    std::string body = small_scenario_json();
    expect_parse_error(body.substr(0, body.size() - 2) + R"(, "extra": 1})", "extra");

    nlohmann::json j = nlohmann::json::parse(small_scenario_json());
    j["uav"]["foo"] = 1;
    expect_parse_error(j.dump(), "uav.foo");

    j = nlohmann::json::parse(small_scenario_json());
    j["nodes"][1]["frequency"] = 5e9;
    expect_parse_error(j.dump(), "nodes[1].frequency");

    // Type and value errors.
    j = nlohmann::json::parse(small_scenario_json());
    j["uav"]["K"] = "two";
    expect_parse_error(j.dump(), "uav.K");

    j = nlohmann::json::parse(small_scenario_json());
    j["nodes"][0]["role"] = "listener";
    expect_parse_error(j.dump(), "nodes[0].role");

    j = nlohmann::json::parse(small_scenario_json());
    j["radio"]["phase_model"] = "cubic";
    expect_parse_error(j.dump(), "radio.phase_model");

    j = nlohmann::json::parse(small_scenario_json());
    j["nodes"][0]["position"] = {20.0, 0.0};
    expect_parse_error(j.dump(), "nodes[0].position");

    j = nlohmann::json::parse(small_scenario_json());
    j["uav"]["array"]["kind"] = "spiral";
    expect_parse_error(j.dump(), "uav.array.kind");

    // Malformed JSON surfaces as ParseError too.
    expect_parse_error("{\"uav\": ", "parse");

    // Structurally valid JSON that violates scenario invariants goes through
    // validate_scenario and keeps its error type.
    j = nlohmann::json::parse(small_scenario_json());
    j["nodes"][0]["role"] = "eavesdropper";  // no destination left
    const fs::path file = dir / "noval.json";
    write_file(file, j.dump());
    CHECK_THROWS_AS(secrecy::load_scenario(file.string()), secrecy::ValidationError);
}

TEST_CASE("format_g17 and fnv1a_hex: round-trip exactness and known digests") {
    for (double v : {1.0 / 3.0, 3.141592653589793, 1e-300, 1e300, 0.0, -0.0,
                     123456789.123456789, -2.2250738585072014e-308}) {
        const std::string s = secrecy::format_g17(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(secrecy::fnv1a_hex("") == "cbf29ce484222325");
    CHECK(secrecy::fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(secrecy::fnv1a_hex("hello") == "a430d84680aabd0b");
}

TEST_CASE("RunManifest: JSON is deterministic and carries every field") {
    secrecy::RunManifest m;
    m.command = "optimize";
    m.scenario_digest = "a430d84680aabd0b";
    m.scenario_echo = "K=2 eves=1";
    m.seed = 42;
    const std::string a = m.to_json();
    const std::string b = m.to_json();
    CHECK(a == b);
    const nlohmann::json j = nlohmann::json::parse(a);
    CHECK(j.at("command") == "optimize");
    CHECK(j.at("scenario_digest") == "a430d84680aabd0b");
    CHECK(j.at("scenario_echo") == "K=2 eves=1");
    CHECK(j.at("tool_version") == std::string(secrecy::kToolVersion));
    CHECK(j.at("seed") == 42);
}

TEST_CASE("cmd_optimize: trajectory CSV shape, feasibility, and byte determinism") {
    const fs::path dir = fresh_dir("optimize");
    const fs::path file = dir / "scenario.json";
    write_file(file, small_scenario_json(/*max_outer=*/4));

    secrecy::CommonOptions opts;
    opts.scenario_path = file.string();
    opts.out_dir = (dir / "out_a").string();
    fs::create_directories(opts.out_dir);
    std::ostringstream log;
    REQUIRE(secrecy::cmd_optimize(opts, log) == 0);
    CHECK(log.str().find("final secrecy rate") != std::string::npos);

    const auto rows = read_csv(fs::path(opts.out_dir) / "trajectory.csv");
    REQUIRE(rows.size() >= 2);
    const std::vector<std::string> header = {"iter",     "p_x",   "p_y",
                                             "p_z",      "psi_1", "psi_2",
                                             "R_L_bits", "R_U_max_bits", "objective_bits"};
    CHECK(rows[0] == header);
    double prev_obj = -1e300;
    for (size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == header.size());
        CHECK(std::stoi(rows[i][0]) == static_cast<int>(i) - 1);
        const double px = std::stod(rows[i][1]), py = std::stod(rows[i][2]),
                     pz = std::stod(rows[i][3]);
        CHECK(px * px + py * py + (pz - 10) * (pz - 10) <= 8.0 * 8.0 + 1e-6);
        CHECK(pz == 10.0);  // altitude fixed in this scenario
        const double psi1 = std::stod(rows[i][4]), psi2 = std::stod(rows[i][5]);
        CHECK(psi1 >= 0.0);
        CHECK(psi2 >= 0.0);
        CHECK(psi1 + psi2 <= 1.0 + 1e-9);
        const double rl = std::stod(rows[i][6]), ru = std::stod(rows[i][7]),
                     obj = std::stod(rows[i][8]);
        CHECK(obj == doctest::Approx(rl - ru).epsilon(1e-12));
        CHECK(obj >= prev_obj - 1e-6);
        prev_obj = obj;
    }

    // Manifest ties back to the scenario bytes.
    const nlohmann::json mj =
        nlohmann::json::parse(read_file(fs::path(opts.out_dir) / "trajectory.manifest.json"));
    CHECK(mj.at("command") == "optimize");
    CHECK(mj.at("scenario_digest") == secrecy::fnv1a_hex(small_scenario_json(4)));

    // A second run produces byte-identical outputs.
    secrecy::CommonOptions opts_b = opts;
    opts_b.out_dir = (dir / "out_b").string();
    fs::create_directories(opts_b.out_dir);
    std::ostringstream log_b;
    REQUIRE(secrecy::cmd_optimize(opts_b, log_b) == 0);
    CHECK(read_file(fs::path(opts.out_dir) / "trajectory.csv") ==
          read_file(fs::path(opts_b.out_dir) / "trajectory.csv"));
    CHECK(read_file(fs::path(opts.out_dir) / "trajectory.manifest.json") ==
          read_file(fs::path(opts_b.out_dir) / "trajectory.manifest.json"));
}

TEST_CASE("cmd_optimize: zero-iteration cap echoes the initial point") {
    const fs::path dir = fresh_dir("optzero");
    const fs::path file = dir / "scenario.json";
    write_file(file, small_scenario_json(/*max_outer=*/0));

    secrecy::CommonOptions opts;
    opts.scenario_path = file.string();
    opts.out_dir = dir.string();
    std::ostringstream log;
    CHECK(secrecy::cmd_optimize(opts, log) == 0);
    const auto rows = read_csv(dir / "trajectory.csv");
    REQUIRE(rows.size() == 2);  // header + the initial iterate
    CHECK(rows[1][0] == "0");
    CHECK(std::stod(rows[1][1]) == 0.0);
    CHECK(std::stod(rows[1][3]) == 10.0);
}

TEST_CASE("cmd_ecdf: stored optimized point, degenerate point, missing file") {
    const fs::path dir = fresh_dir("ecdf");
    const fs::path file = dir / "scenario.json";
    write_file(file, small_scenario_json(/*max_outer=*/2));

    // Produce a stored optimized point via the optimizer command.
    secrecy::CommonOptions opt_opts;
    opt_opts.scenario_path = file.string();
    opt_opts.out_dir = (dir / "traj").string();
    fs::create_directories(opt_opts.out_dir);
    std::ostringstream opt_log;
    REQUIRE(secrecy::cmd_optimize(opt_opts, opt_log) == 0);

    secrecy::CommonOptions opts;
    opts.scenario_path = file.string();
    opts.out_dir = (dir / "out").string();
    opts.point_path = (fs::path(opt_opts.out_dir) / "trajectory.csv").string();
    fs::create_directories(opts.out_dir);
    std::ostringstream log;
    REQUIRE(secrecy::cmd_ecdf(opts, log) == 0);
    CHECK(log.str().find("outage") != std::string::npos);

    const auto rows = read_csv(fs::path(opts.out_dir) / "secrecy_ecdf.csv");
    REQUIRE(rows.size() == 2001u);  // header + one row per sample
    CHECK(rows[0] == std::vector<std::string>{"config_id", "secrecy_bits",
                                              "cumulative_probability"});
    double prev_val = -1.0, prev_cum = 0.0;
    for (size_t i = 1; i < rows.size(); ++i) {
        const double v = std::stod(rows[i][1]);
        const double c = std::stod(rows[i][2]);
        CHECK(v >= prev_val);
        CHECK(v >= 0.0);  // clamped instantaneous secrecy
        CHECK(c >= prev_cum);
        prev_val = v;
        prev_cum = c;
    }
    CHECK(prev_cum == doctest::Approx(1.0).epsilon(1e-12));

    // Determinism across reruns.
    secrecy::CommonOptions opts_b = opts;
    opts_b.out_dir = (dir / "out_b").string();
    fs::create_directories(opts_b.out_dir);
    std::ostringstream log_b;
    REQUIRE(secrecy::cmd_ecdf(opts_b, log_b) == 0);
    CHECK(read_file(fs::path(opts.out_dir) / "secrecy_ecdf.csv") ==
          read_file(fs::path(opts_b.out_dir) / "secrecy_ecdf.csv"));

    // Degenerate stored point (zero power): all mass at exactly zero rate.
    const fs::path zero_point = dir / "zero_point.csv";
    write_file(zero_point,
               "iter,p_x,p_y,p_z,psi_1,psi_2,R_L_bits,R_U_max_bits,objective_bits\n"
               "0,0,0,10,0,0,0,0,0\n");
    secrecy::CommonOptions zopts = opts;
    zopts.point_path = zero_point.string();
    zopts.out_dir = (dir / "out_zero").string();
    fs::create_directories(zopts.out_dir);
    std::ostringstream zlog;
    REQUIRE(secrecy::cmd_ecdf(zopts, zlog) == 0);
    const auto zrows = read_csv(fs::path(zopts.out_dir) / "secrecy_ecdf.csv");
    REQUIRE(zrows.size() == 2u);
    CHECK(std::stod(zrows[1][1]) == 0.0);
    CHECK(std::stod(zrows[1][2]) == 1.0);
    CHECK(zlog.str().find("outage fraction 1") != std::string::npos);

    // Missing point file is a clean nonzero exit.
    secrecy::CommonOptions missing = opts;
    missing.point_path = (dir / "does_not_exist.csv").string();
    std::ostringstream mlog;
    CHECK(secrecy::cmd_ecdf(missing, mlog) != 0);
}

TEST_CASE("cmd_gradcheck: clean pass, strict mode at alpha=2, and a corrupted "
          "negative control") {
    const fs::path dir = fresh_dir("gradcheck");
    const fs::path file = dir / "scenario.json";
    write_file(file, small_scenario_json());

    secrecy::CommonOptions opts;
    opts.scenario_path = file.string();
    opts.samples = 10;
    std::ostringstream log;
    CHECK(secrecy::cmd_gradcheck(opts, log) == 0);
    CHECK(log.str().find("max relative error") != std::string::npos);

    // Strict factor-2 location gradients agree with finite differences only
    // when the loss exponent is exactly 2.
    nlohmann::json j = nlohmann::json::parse(small_scenario_json());
    j["radio"]["alpha"] = 2.0;
    const fs::path file2 = dir / "alpha2.json";
    write_file(file2, j.dump());
    secrecy::CommonOptions sopts;
    sopts.scenario_path = file2.string();
    sopts.samples = 10;
    sopts.strict_paper = true;
    std::ostringstream slog;
    CHECK(secrecy::cmd_gradcheck(sopts, slog) == 0);

    // Negative control: an injected relative corruption must be detected.
    const secrecy::LoadedScenario ls = secrecy::load_scenario(file.string());
    const secrecy::GradcheckReport bad = secrecy::run_gradcheck(ls, 5, false, 1e-3);
    CHECK(!bad.ok());
    CHECK(bad.max_rel_err > 1e-5);
    REQUIRE(!bad.worst.empty());
    const secrecy::GradcheckReport good = secrecy::run_gradcheck(ls, 5, false, 0.0);
    CHECK(good.ok());
}

TEST_CASE("cmd_validate_rates: strong-LoS configuration passes every band "
          "deterministically") {
    const fs::path dir = fresh_dir("valrates");
    const fs::path file = dir / "rates.json";
    write_file(file, rates_scenario_json());

    secrecy::CommonOptions opts;
    opts.scenario_path = file.string();
    opts.out_dir = (dir / "a").string();
    fs::create_directories(opts.out_dir);
    std::ostringstream log;
    REQUIRE(secrecy::cmd_validate_rates(opts, log) == 0);
    CHECK(log.str().find("PASS") != std::string::npos);

    const auto rows = read_csv(fs::path(opts.out_dir) / "rate_errors.csv");
    REQUIRE(rows.size() >= 3u);
    CHECK(rows[0] ==
          std::vector<std::string>{"config_id", "error_value", "cumulative_probability"});
    bool saw_rl = false, saw_ru = false;
    for (size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 3u);
        if (rows[i][0].find(":RL") != std::string::npos) saw_rl = true;
        if (rows[i][0].find(":RU") != std::string::npos) saw_ru = true;
    }
    CHECK(saw_rl);
    CHECK(saw_ru);

    secrecy::CommonOptions opts_b = opts;
    opts_b.out_dir = (dir / "b").string();
    fs::create_directories(opts_b.out_dir);
    std::ostringstream log_b;
    REQUIRE(secrecy::cmd_validate_rates(opts_b, log_b) == 0);
    CHECK(read_file(fs::path(opts.out_dir) / "rate_errors.csv") ==
          read_file(fs::path(opts_b.out_dir) / "rate_errors.csv"));
}

TEST_CASE("cmd_grid_certify: single-cell grid, summary row, and the cell cap") {
    const fs::path dir = fresh_dir("grid");
    const fs::path file = dir / "scenario.json";
    // Full iteration budget: the optimizer must out-search a one-cell grid.
    write_file(file, small_scenario_json(/*max_outer=*/80));

    secrecy::CommonOptions opts;
    opts.scenario_path = file.string();
    opts.out_dir = (dir / "a").string();
    fs::create_directories(opts.out_dir);

    // Spacing larger than the dispatch ball leaves only the start cell.
    secrecy::GridCertifyOptions grid;
    grid.spacing_m = 1000.0;
    std::ostringstream log;
    const int rc = secrecy::cmd_grid_certify(opts, grid, log);
    CHECK(rc == 0);  // the optimizer only improves on its own start cell

    const auto rows = read_csv(fs::path(opts.out_dir) / "grid_certify.csv");
    REQUIRE(rows.size() == 2u);
    REQUIRE(rows[0].size() == rows[1].size());
    // Columns: grid best location/psi/value, optimizer location/psi/value, gap.
    CHECK(rows[0][0] == "grid_x");
    CHECK(std::stod(rows[1][0]) == 0.0);   // grid best sits at the only cell
    CHECK(std::stod(rows[1][2]) == 10.0);  // grid_z
    const double grid_val = std::stod(rows[1][5]);
    const double alg_val = std::stod(rows[1][11]);
    const double gap = std::stod(rows[1][12]);
    CHECK(alg_val >= grid_val - 1e-9);  // optimizer beats the single cell
    CHECK(gap <= 0.10);

    // Determinism.
    secrecy::CommonOptions opts_b = opts;
    opts_b.out_dir = (dir / "b").string();
    fs::create_directories(opts_b.out_dir);
    std::ostringstream log_b;
    REQUIRE(secrecy::cmd_grid_certify(opts_b, grid, log_b) == 0);
    CHECK(read_file(fs::path(opts.out_dir) / "grid_certify.csv") ==
          read_file(fs::path(opts_b.out_dir) / "grid_certify.csv"));

    // Cell-count cap.
    secrecy::GridCertifyOptions capped;
    capped.spacing_m = 1.0;
    capped.max_points = 10;
    std::ostringstream clog;
    CHECK(secrecy::cmd_grid_certify(opts, capped, clog) != 0);
    CHECK(clog.str().find("grid") != std::string::npos);
}
