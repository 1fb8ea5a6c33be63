// Scenario JSON parsing (strict schema), run manifests, CSV emission, and the
// five command entry points.
#include "secrecy/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "secrecy/gradients.hpp"
#include "secrecy/montecarlo.hpp"
#include "secrecy/rates.hpp"

namespace secrecy {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ParseError("scenario " + where + ": " + what);
}

std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* key : allowed) ok = ok || item.key() == key;
        if (!ok) fail(joined(path, item.key()), "unknown key");
    }
}

const json& require_obj(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) fail(path.empty() ? key : path, "missing required key '" + key + "'");
    return obj.at(key);
}

double get_num(const json& obj, const std::string& path, const std::string& key, double def,
               bool* present = nullptr) {
    if (!obj.contains(key)) {
        if (present) *present = false;
        return def;
    }
    if (present) *present = true;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(joined(path, key), "expected a number");
    return v.get<double>();
}

double require_num(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) fail(joined(path, key), "missing required key '" + key + "'");
    const json& v = obj.at(key);
    if (!v.is_number()) fail(joined(path, key), "expected a number");
    return v.get<double>();
}

std::int64_t get_int(const json& obj, const std::string& path, const std::string& key,
                     std::int64_t def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(joined(path, key), "expected an integer");
    return v.get<std::int64_t>();
}

std::int64_t require_int(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) fail(joined(path, key), "missing required key '" + key + "'");
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(joined(path, key), "expected an integer");
    return v.get<std::int64_t>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key, bool def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(joined(path, key), "expected true or false");
    return v.get<bool>();
}

std::string require_str(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) fail(joined(path, key), "missing required key '" + key + "'");
    const json& v = obj.at(key);
    if (!v.is_string()) fail(joined(path, key), "expected a string");
    return v.get<std::string>();
}

Position3 parse_position(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) fail(joined(path, key), "missing required key '" + key + "'");
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
        !v[2].is_number())
        fail(joined(path, key), "expected [x, y, z] in meters");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

AntennaArray parse_array_block(const json& obj, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    check_keys(obj, path, {"kind", "radius_m", "spacing_m", "azimuth_rad"});
    AntennaArray out;
    const std::string kind = require_str(obj, path, "kind");
    if (kind == "circular")
        out.kind = ArrayKind::circular;
    else if (kind == "linear")
        out.kind = ArrayKind::linear;
    else
        fail(joined(path, "kind"), "expected 'circular' or 'linear', got '" + kind + "'");
    out.radius_m = get_num(obj, path, "radius_m", 0.0);
    out.spacing_m = get_num(obj, path, "spacing_m", 0.0);
    out.azimuth_rad = get_num(obj, path, "azimuth_rad", 0.0);
    return out;
}

NodeSpec parse_node(const json& obj, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    check_keys(obj, path, {"role", "position", "N", "kappa", "array"});
    NodeSpec node;
    const std::string role = require_str(obj, path, "role");
    if (role == "destination")
        node.role = NodeRole::destination;
    else if (role == "eavesdropper")
        node.role = NodeRole::eavesdropper;
    else
        fail(joined(path, "role"), "expected 'destination' or 'eavesdropper', got '" + role + "'");
    node.position = parse_position(obj, path, "position");
    const std::int64_t n = require_int(obj, path, "N");
    if (n < 1) fail(joined(path, "N"), "antenna count must be >= 1");
    node.rician_kappa = require_num(obj, path, "kappa");
    node.antennas = parse_array_block(require_obj(obj, path, "array"), joined(path, "array"));
    node.antennas.element_count = static_cast<int>(n);
    return node;
}

OptimizerConfig parse_optimizer(const json& obj, const std::string& path) {
    OptimizerConfig cfg;
    if (!obj.is_object()) fail(path, "expected an object");
    check_keys(obj, path,
               {"eps1_bits", "eps2_bits", "max_outer_iters", "max_inner_iters", "d_delta",
                "step_a", "step_b", "subgradient_iters", "psi_floor", "strict_paper_gradients",
                "stall_patience", "min_altitude_m"});
    cfg.eps1_bits = get_num(obj, path, "eps1_bits", cfg.eps1_bits);
    cfg.eps2_bits = get_num(obj, path, "eps2_bits", cfg.eps2_bits);
    cfg.max_outer_iters = static_cast<int>(get_int(obj, path, "max_outer_iters",
                                                   cfg.max_outer_iters));
    cfg.max_inner_iters = static_cast<int>(get_int(obj, path, "max_inner_iters",
                                                   cfg.max_inner_iters));
    bool present = false;
    const double dd = get_num(obj, path, "d_delta", 0.0, &present);
    if (present) cfg.d_delta = dd;
    cfg.step_a = get_num(obj, path, "step_a", cfg.step_a);
    cfg.step_b = get_num(obj, path, "step_b", cfg.step_b);
    cfg.subgradient_iters = static_cast<int>(get_int(obj, path, "subgradient_iters",
                                                     cfg.subgradient_iters));
    cfg.psi_floor = get_num(obj, path, "psi_floor", cfg.psi_floor);
    cfg.strict_paper_gradients = get_bool(obj, path, "strict_paper_gradients",
                                          cfg.strict_paper_gradients);
    cfg.stall_patience = static_cast<int>(get_int(obj, path, "stall_patience",
                                                  cfg.stall_patience));
    const double ma = get_num(obj, path, "min_altitude_m", 0.0, &present);
    if (present) cfg.min_altitude_m = ma;
    return cfg;
}

MCConfig parse_mc(const json& obj, const std::string& path) {
    MCConfig mc;
    if (!obj.is_object()) fail(path, "expected an object");
    check_keys(obj, path, {"samples", "seed"});
    mc.samples = get_int(obj, path, "samples", mc.samples);
    const std::int64_t seed = get_int(obj, path, "seed", 0);
    if (seed < 0) fail(joined(path, "seed"), "seed must be nonnegative");
    mc.seed = static_cast<std::uint64_t>(seed);
    return mc;
}

std::string scenario_echo(const Scenario& sc, const OptimizerConfig&, const MCConfig& mc) {
    std::ostringstream ss;
    ss << "K=" << sc.K() << " N0=" << sc.nodes[0].antennas.element_count
       << " eves=" << sc.eavesdropper_count() << " alpha=" << sc.radio.alpha
       << " p_max=" << sc.radio.p_max << " d_max=" << sc.d_max << " d_delta=" << sc.d_delta
       << " altitude=" << (sc.altitude_fixed ? "fixed" : "free") << " mc_samples=" << mc.samples
       << " seed=" << mc.seed;
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw Error("cannot open output file " + path.string());
    out << bytes;
    if (!out.good()) throw Error("failed writing " + path.string());
}

void write_manifest(const fs::path& out_dir, const std::string& stem,
                    const LoadedScenario& loaded, const std::string& command,
                    std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.scenario_digest = loaded.digest;
    m.scenario_echo = loaded.echo;
    m.seed = seed;
    write_text_file(out_dir / (stem + ".manifest.json"), m.to_json());
}

MCConfig effective_mc(const LoadedScenario& loaded, const CommonOptions& opts) {
    MCConfig mc = loaded.mc;
    if (opts.samples) mc.samples = static_cast<std::int64_t>(*opts.samples);
    if (opts.seed) mc.seed = *opts.seed;
    return mc;
}

/// Runs a command body, converting library errors into log lines + exit 1.
template <typename F>
int guarded(std::ostream& log, const char* command, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        log << command << " error: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

std::string trajectory_csv(const Scenario& sc, const OptTrace& trace) {
    std::ostringstream out;
    out << "iter,p_x,p_y,p_z";
    for (int k = 1; k <= sc.K(); ++k) out << ",psi_" << k;
    out << ",R_L_bits,R_U_max_bits,objective_bits\n";
    for (const OptIterate& it : trace.iterates) {
        out << it.iter << ',' << format_g17(it.p_u.x) << ',' << format_g17(it.p_u.y) << ','
            << format_g17(it.p_u.z);
        for (int k = 0; k < sc.K(); ++k) out << ',' << format_g17(it.psi[k]);
        out << ',' << format_g17(it.legit_bits) << ',' << format_g17(it.eav_max_bits) << ','
            << format_g17(it.objective_bits) << '\n';
    }
    return out.str();
}

struct StoredPoint {
    Position3 p;
    Eigen::VectorXd psi;
};

/// Reads the last data row of a trajectory-format CSV.
StoredPoint parse_point_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ParseError("point file " + path + ": cannot open");
    std::string line, header, last;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header.empty())
            header = line;
        else
            last = line;
    }
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    const std::vector<std::string> head = split(header);
    if (head.size() < 8 || head[0] != "iter" || head[1] != "p_x" || head[4].rfind("psi_", 0) != 0)
        throw ParseError("point file " + path + ": not a trajectory CSV");
    if (last.empty()) throw ParseError("point file " + path + ": no data rows");
    const int k = static_cast<int>(head.size()) - 7;
    const std::vector<std::string> cells = split(last);
    if (cells.size() != head.size())
        throw ParseError("point file " + path + ": ragged final row");
    StoredPoint pt;
    pt.p = {std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
    pt.psi.resize(k);
    for (int i = 0; i < k; ++i) pt.psi[i] = std::stod(cells[4 + static_cast<std::size_t>(i)]);
    return pt;
}

}  // namespace

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string RunManifest::to_json() const {
    json j;
    j["command"] = command;
    j["scenario_digest"] = scenario_digest;
    j["scenario_echo"] = scenario_echo;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

LoadedScenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ParseError("scenario file " + path + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();

    json root;
    try {
        root = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError("scenario file " + path + ": " + e.what());
    }
    if (!root.is_object()) fail("(top level)", "expected a JSON object");
    check_keys(root, "", {"uav", "radio", "nodes", "optimizer", "mc"});

    Scenario sc;

    const json& uav = require_obj(root, "", "uav");
    if (!uav.is_object()) fail("uav", "expected an object");
    check_keys(uav, "uav", {"start", "K", "array", "d_max", "d_delta", "altitude_fixed"});
    sc.uav_start = parse_position(uav, "uav", "start");
    const std::int64_t k = require_int(uav, "uav", "K");
    if (k < 1) fail("uav.K", "antenna count must be >= 1");
    sc.uav_array = parse_array_block(require_obj(uav, "uav", "array"), "uav.array");
    sc.uav_array.element_count = static_cast<int>(k);
    sc.d_max = get_num(uav, "uav", "d_max", sc.d_max);
    sc.d_delta = get_num(uav, "uav", "d_delta", sc.d_delta);
    sc.altitude_fixed = get_bool(uav, "uav", "altitude_fixed", sc.altitude_fixed);

    const json& radio = require_obj(root, "", "radio");
    if (!radio.is_object()) fail("radio", "expected an object");
    check_keys(radio, "radio",
               {"c_p", "alpha", "noise_nu", "p_max", "wavelength_m", "phase_model"});
    sc.radio.c_p = get_num(radio, "radio", "c_p", sc.radio.c_p);
    sc.radio.alpha = get_num(radio, "radio", "alpha", sc.radio.alpha);
    sc.radio.noise_nu = get_num(radio, "radio", "noise_nu", sc.radio.noise_nu);
    sc.radio.p_max = get_num(radio, "radio", "p_max", sc.radio.p_max);
    sc.radio.wavelength_m = get_num(radio, "radio", "wavelength_m", sc.radio.wavelength_m);
    if (radio.contains("phase_model")) {
        const std::string pm = require_str(radio, "radio", "phase_model");
        if (pm == "linear_distance")
            sc.radio.phase_model = PhaseModel::linear_distance;
        else if (pm == "sqrt_distance")
            sc.radio.phase_model = PhaseModel::sqrt_distance;
        else
            fail("radio.phase_model", "expected 'linear_distance' or 'sqrt_distance'");
    }

    const json& nodes = require_obj(root, "", "nodes");
    if (!nodes.is_array()) fail("nodes", "expected an array");
    for (std::size_t i = 0; i < nodes.size(); ++i)
        sc.nodes.push_back(parse_node(nodes[i], "nodes[" + std::to_string(i) + "]"));

    LoadedScenario out;
    if (root.contains("optimizer")) out.optimizer = parse_optimizer(root["optimizer"], "optimizer");
    if (root.contains("mc")) out.mc = parse_mc(root["mc"], "mc");
    out.scenario = validate_scenario(sc);
    out.digest = fnv1a_hex(bytes);
    out.echo = scenario_echo(out.scenario, out.optimizer, out.mc);
    return out;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

int cmd_optimize(const CommonOptions& opts, std::ostream& log) {
    return guarded(log, "optimize", [&] {
        const LoadedScenario loaded = load_scenario(opts.scenario_path);
        OptimizerConfig cfg = loaded.optimizer;
        cfg.strict_paper_gradients = cfg.strict_paper_gradients || opts.strict_paper;

        OptTrace trace;
        if (cfg.max_outer_iters == 0) {
            // Zero iteration budget: echo the initial design without entering
            // the solver (whose contract requires at least one iteration).
            const Scenario& sc = loaded.scenario;
            const PowerAllocation psi0 = waterfilling_init(sc);
            OptIterate it;
            it.iter = 0;
            it.psi = psi0.psi;
            it.p_u = sc.uav_start;
            it.legit_bits =
                rate_legit_lower_nats(psi0, link_params(sc, 0, it.p_u)) * kNatsToBits;
            double worst = 0.0;
            for (int nd = 1; nd < static_cast<int>(sc.nodes.size()); ++nd)
                worst = std::max(worst, rate_eav_hmi_nats(psi0, link_params(sc, nd, it.p_u)));
            it.eav_max_bits = worst * kNatsToBits;
            it.objective_bits = it.legit_bits - it.eav_max_bits;
            it.surrogate_bits = it.objective_bits;
            trace.iterates.push_back(it);
            trace.reason = StopReason::iteration_cap;
        } else {
            trace = algorithm2_alternating(loaded.scenario, cfg);
        }
        const fs::path out_dir(opts.out_dir);
        write_text_file(out_dir / "trajectory.csv", trajectory_csv(loaded.scenario, trace));
        write_manifest(out_dir, "trajectory", loaded, "optimize",
                       opts.seed.value_or(loaded.mc.seed));

        const double first = trace.iterates.front().objective_bits;
        const double last = trace.iterates.back().objective_bits;
        log << "final secrecy rate " << std::max(0.0, last) << " bits/s/Hz (objective " << last
            << ", initial " << first << ", " << trace.iterates.size() - 1 << " iterations)\n";
        if (trace.reason == StopReason::iteration_cap && cfg.max_outer_iters > 0 &&
            last <= first + 1e-12) {
            log << "optimize: hit the iteration cap without improving the objective\n";
            return 2;
        }
        return 0;
    });
}

// ---------------------------------------------------------------------------
// validate-rates
// ---------------------------------------------------------------------------

int cmd_validate_rates(const CommonOptions& opts, std::ostream& log) {
    return guarded(log, "validate-rates", [&] {
        const LoadedScenario loaded = load_scenario(opts.scenario_path);
        const MCConfig mc = effective_mc(loaded, opts);
        const Scenario& sc = loaded.scenario;
        const int n0 = sc.nodes[0].antennas.element_count;
        std::ostringstream id;
        id << "K" << sc.K() << "N" << n0;

        const int draws = 1000;
        const EcdfStudy study =
            ecdf_relative_errors(sc, sc.uav_start, draws, mc, id.str());

        // Error bands: the lower bound is near-exact for the tall-array
        // configuration and loose otherwise; the determinant-average side gets
        // a uniform band. The bound property itself must hold almost surely.
        const double rl_band = (sc.K() == 4 && n0 == 8) ? 1e-3 : 5e-2;
        const double ru_band = 5e-2;
        const bool pass = study.median_abs_rl <= rl_band && study.median_abs_ru <= ru_band &&
                          study.rl_below_fraction >= 0.99;

        std::ostringstream csv;
        csv << "config_id,error_value,cumulative_probability\n";
        for (const EcdfRow& row : study.rows)
            csv << row.config_id << ',' << format_g17(row.error_value) << ','
                << format_g17(row.cumulative_probability) << '\n';
        const fs::path out_dir(opts.out_dir);
        write_text_file(out_dir / "rate_errors.csv", csv.str());
        write_manifest(out_dir, "rate_errors", loaded, "validate-rates", mc.seed);

        log << "config " << id.str() << ": med|RL err|=" << study.median_abs_rl << " (band "
            << rl_band << "), med|RU err|=" << study.median_abs_ru << " (band " << ru_band
            << "), lower-bound fraction=" << study.rl_below_fraction << " (>=0.99) -> "
            << (pass ? "PASS" : "FAIL") << "\n";
        return pass ? 0 : 2;
    });
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

namespace {

double vector_rel_err(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd) {
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-9);
    return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

double scalar_rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-9);
}

/// Two-level Richardson-extrapolated central difference. The closed forms
/// carry a few ulps of cancellation noise, so a plain small-step difference
/// bottoms out near 1e-5 relative; extrapolating from a generous base step
/// removes the truncation terms while keeping the noise amplification low.
template <typename F>
double fd_derivative(const F& f, double h) {
    const auto central = [&](double step) { return (f(step) - f(-step)) / (2.0 * step); };
    const double d1 = central(h);
    const double d2 = central(0.5 * h);
    const double d3 = central(0.25 * h);
    const double r1 = (4.0 * d2 - d1) / 3.0;
    const double r2 = (4.0 * d3 - d2) / 3.0;
    return (16.0 * r2 - r1) / 15.0;
}

}  // namespace

GradcheckReport run_gradcheck(const LoadedScenario& loaded, int points, bool strict_paper,
                              double corruption) {
    const Scenario& sc = loaded.scenario;
    GradcheckReport report;
    report.points = points;
    std::mt19937_64 rng(loaded.mc.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int k = sc.K();
    const int s0 = std::min(sc.nodes[0].antennas.element_count, k);
    auto note = [&](const std::string& op, int point, double err) {
        report.max_rel_err = std::max(report.max_rel_err, err);
        if (err > 1e-5) {
            report.worst.push_back({op, point, err});
            std::sort(report.worst.begin(), report.worst.end(),
                      [](const auto& a, const auto& b) { return a.rel_err > b.rel_err; });
            if (report.worst.size() > 5) report.worst.resize(5);
        }
    };

    for (int pt = 0; pt < points; ++pt) {
        // Random hover inside the dispatch ball, kept off the ground.
        Position3 p = sc.uav_start;
        {
            const double radius = 0.8 * sc.d_max * std::cbrt(unit(rng));
            const double az = 2.0 * M_PI * unit(rng);
            const double el = M_PI * (unit(rng) - 0.5);
            p.x += radius * std::cos(el) * std::cos(az);
            p.y += radius * std::cos(el) * std::sin(az);
            if (!sc.altitude_fixed) p.z = std::max(1.0, p.z + radius * std::sin(el));
        }

        // Random active allocation with well-separated entries (the analytic
        // forms require distinct powers) and finite-difference headroom.
        Eigen::VectorXd psi = Eigen::VectorXd::Zero(k);
        {
            const int r = 1 + static_cast<int>(unit(rng) * s0) % s0;
            for (int attempt = 0; attempt < 200; ++attempt) {
                double total = 0.0;
                for (int i = 0; i < r; ++i) {
                    psi[i] = 0.05 + unit(rng);
                    total += psi[i];
                }
                const double budget = 0.5 + 0.4 * unit(rng);
                for (int i = 0; i < r; ++i) psi[i] *= budget / total;
                bool separated = psi.head(r).minCoeff() > 5e-3;
                for (int i = 0; i < r && separated; ++i)
                    for (int j = i + 1; j < r; ++j)
                        separated = separated && std::abs(psi[i] - psi[j]) > 1e-3;
                if (separated) break;
            }
        }
        const PowerAllocation pa = make_power_allocation(psi);
        const std::vector<int> active = pa.active_indices();
        const double bump = 1.0 + corruption;

        for (int node = 0; node < static_cast<int>(sc.nodes.size()); ++node) {
            const bool dest = sc.nodes[node].role == NodeRole::destination;
            const LinkParams link = link_params(sc, node, p);
            auto rate = [&](const PowerAllocation& alloc, const LinkParams& lk) {
                return dest ? rate_legit_lower_nats(alloc, lk) : rate_eav_hmi_nats(alloc, lk);
            };
            const std::string tag = dest ? "dest" : "eve" + std::to_string(node);

            // d rate / d psi against extrapolated central differences.
            Eigen::VectorXd fd_psi(pa.r);
            for (int i = 0; i < pa.r; ++i) {
                const int j = active[i];
                fd_psi[i] = fd_derivative(
                    [&](double step) {
                        Eigen::VectorXd moved = psi;
                        moved[j] += step;
                        return rate(make_power_allocation(moved), link);
                    },
                    5e-2 * psi[j]);
            }
            const Eigen::VectorXd g_psi =
                bump * (dest ? grad_RL_psi(pa, link) : grad_RU_psi(pa, link));
            note(tag + (dest ? ":grad_RL_psi" : ":grad_RU_psi"), pt,
                 vector_rel_err(g_psi, fd_psi));

            // d rate / d z.
            {
                const double fd = fd_derivative(
                    [&](double step) {
                        LinkParams moved = link;
                        moved.z += step;
                        return rate(pa, moved);
                    },
                    5e-2 * link.z);
                const double an = bump * (dest ? dRL_dz(pa, link) : dRU_dz(pa, link));
                note(tag + (dest ? ":dRL_dz" : ":dRU_dz"), pt, scalar_rel_err(an, fd));
            }

            // Location gradient against frozen-spectrum differences: the
            // analytic rule differentiates through the path gain only.
            {
                const GradPos an = bump * grad_location(pa, p, sc, node, strict_paper);
                Eigen::Vector3d fd = Eigen::Vector3d::Zero();
                const int comps = sc.altitude_fixed ? 2 : 3;
                for (int c = 0; c < comps; ++c) {
                    fd[c] = fd_derivative(
                        [&](double step) {
                            Position3 moved = p;
                            (c == 0 ? moved.x : c == 1 ? moved.y : moved.z) += step;
                            LinkParams patched = link;
                            patched.z =
                                path_gain_z(moved, sc.nodes[node].position, sc.radio.alpha);
                            return rate(pa, patched);
                        },
                        5e-2 * distance(p, sc.nodes[node].position));
                }
                Eigen::Vector3d an3 = an;
                if (sc.altitude_fixed) an3[2] = 0.0;
                note(tag + ":grad_location", pt, vector_rel_err(an3, fd));
            }
        }
    }
    return report;
}

int cmd_gradcheck(const CommonOptions& opts, std::ostream& log) {
    return guarded(log, "gradcheck", [&] {
        const LoadedScenario loaded = load_scenario(opts.scenario_path);
        const int points = static_cast<int>(opts.samples.value_or(100));
        const GradcheckReport report = run_gradcheck(loaded, points, opts.strict_paper);
        log << "gradcheck: max relative error " << report.max_rel_err << " over "
            << report.points << " points -> " << (report.ok() ? "PASS" : "FAIL") << "\n";
        for (const GradcheckOffender& off : report.worst)
            log << "  offender " << off.op << " at point " << off.point << ": rel err "
                << off.rel_err << "\n";
        return report.ok() ? 0 : 2;
    });
}

// ---------------------------------------------------------------------------
// ecdf
// ---------------------------------------------------------------------------

int cmd_ecdf(const CommonOptions& opts, std::ostream& log) {
    return guarded(log, "ecdf", [&] {
        const LoadedScenario loaded = load_scenario(opts.scenario_path);
        const MCConfig mc = effective_mc(loaded, opts);
        const StoredPoint point = parse_point_csv(opts.point_path);
        if (static_cast<int>(point.psi.size()) != loaded.scenario.K())
            throw ParseError("point file " + opts.point_path + ": allocation has " +
                             std::to_string(point.psi.size()) + " entries, scenario has K=" +
                             std::to_string(loaded.scenario.K()));

        SecrecyEcdf result;
        if (point.psi.maxCoeff() < kPsiFloor) {
            // Nothing transmitted: the instantaneous secrecy rate is
            // identically zero.
            result.rows = {{"instant_secrecy", 0.0, 1.0}};
            result.outage_fraction = 1.0;
            result.mean_bits = 0.0;
        } else {
            const PowerAllocation pa = make_power_allocation(point.psi);
            result = mc_instant_secrecy_ecdf(pa, point.p, loaded.scenario, mc);
        }

        std::ostringstream csv;
        csv << "config_id,secrecy_bits,cumulative_probability\n";
        for (const EcdfRow& row : result.rows)
            csv << row.config_id << ',' << format_g17(row.error_value) << ','
                << format_g17(row.cumulative_probability) << '\n';
        const fs::path out_dir(opts.out_dir);
        write_text_file(out_dir / "secrecy_ecdf.csv", csv.str());
        write_manifest(out_dir, "secrecy_ecdf", loaded, "ecdf", mc.seed);

        log << "ecdf at p=(" << point.p.x << "," << point.p.y << "," << point.p.z
            << "): outage fraction " << result.outage_fraction << ", mean "
            << result.mean_bits << " bits/s/Hz over " << result.rows.size() << " samples\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// grid-certify
// ---------------------------------------------------------------------------

namespace {

void enumerate_compositions(int slots, int remaining, std::vector<int>& counts,
                            std::vector<Eigen::VectorXd>& out, int resolution) {
    if (slots == static_cast<int>(counts.size())) {
        int total = 0;
        for (int c : counts) total += c;
        if (total == 0) return;
        Eigen::VectorXd psi(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            psi[i] = static_cast<double>(counts[i]) / resolution;
        out.push_back(psi);
        return;
    }
    for (int c = 0; c <= remaining; ++c) {
        counts[slots] = c;
        enumerate_compositions(slots + 1, remaining - c, counts, out, resolution);
    }
    counts[slots] = 0;
}

}  // namespace

int cmd_grid_certify(const CommonOptions& opts, const GridCertifyOptions& grid,
                     std::ostream& log) {
    return guarded(log, "grid-certify", [&] {
        const LoadedScenario loaded = load_scenario(opts.scenario_path);
        const Scenario& sc = loaded.scenario;
        OptimizerConfig cfg = loaded.optimizer;
        cfg.strict_paper_gradients = cfg.strict_paper_gradients || opts.strict_paper;
        const int k = sc.K();
        const int s0 = std::min(sc.nodes[0].antennas.element_count, k);

        // Location lattice inside the dispatch ball (horizontal plane when the
        // altitude is fixed), kept above the ground.
        std::vector<Position3> lattice;
        const int n = static_cast<int>(std::floor(sc.d_max / grid.spacing_m));
        for (int ix = -n; ix <= n; ++ix) {
            for (int iy = -n; iy <= n; ++iy) {
                const int zlo = sc.altitude_fixed ? 0 : -n;
                const int zhi = sc.altitude_fixed ? 0 : n;
                for (int iz = zlo; iz <= zhi; ++iz) {
                    Position3 p = sc.uav_start;
                    p.x += ix * grid.spacing_m;
                    p.y += iy * grid.spacing_m;
                    p.z += iz * grid.spacing_m;
                    if (p.z < 0.5) continue;
                    if (distance(p, sc.uav_start) > sc.d_max + 1e-9) continue;
                    lattice.push_back(p);
                }
            }
        }

        // Power simplex grid (budget inequality: partial sums allowed).
        const int resolution = std::max(1, static_cast<int>(std::round(1.0 /
                                                                       grid.psi_resolution)));
        std::vector<Eigen::VectorXd> allocations;
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        enumerate_compositions(0, resolution, counts, allocations, resolution);

        const std::uint64_t cells =
            static_cast<std::uint64_t>(lattice.size()) * allocations.size();
        if (cells > grid.max_points) {
            std::ostringstream msg;
            msg << "location-power grid has " << cells << " cells, above the cap "
                << grid.max_points;
            throw GridTooLarge(msg.str());
        }

        double best = -std::numeric_limits<double>::infinity();
        Position3 best_p = sc.uav_start;
        Eigen::VectorXd best_psi = Eigen::VectorXd::Zero(k);
        for (const Position3& p : lattice) {
            std::vector<LinkParams> links;
            links.reserve(sc.nodes.size());
            for (int nd = 0; nd < static_cast<int>(sc.nodes.size()); ++nd)
                links.push_back(link_params(sc, nd, p));
            for (const Eigen::VectorXd& psi : allocations) {
                const PowerAllocation pa = make_power_allocation(psi);
                if (pa.r < 1 || pa.r > s0) continue;
                double worst = 0.0;
                for (std::size_t e = 1; e < links.size(); ++e)
                    worst = std::max(worst, rate_eav_hmi_nats(pa, links[e]));
                const double obj =
                    (rate_legit_lower_nats(pa, links[0]) - worst) * kNatsToBits;
                if (obj > best) {
                    best = obj;
                    best_p = p;
                    best_psi = psi;
                }
            }
        }

        const OptTrace trace = algorithm2_alternating(sc, cfg);
        const OptIterate& fin = trace.iterates.back();
        const double gap = (best - fin.objective_bits) / std::max(std::abs(best), 1e-9);

        std::ostringstream csv;
        csv << "grid_x,grid_y,grid_z";
        for (int i = 1; i <= k; ++i) csv << ",grid_psi_" << i;
        csv << ",grid_objective_bits,alg_x,alg_y,alg_z";
        for (int i = 1; i <= k; ++i) csv << ",alg_psi_" << i;
        csv << ",alg_objective_bits,gap_fraction\n";
        csv << format_g17(best_p.x) << ',' << format_g17(best_p.y) << ','
            << format_g17(best_p.z);
        for (int i = 0; i < k; ++i) csv << ',' << format_g17(best_psi[i]);
        csv << ',' << format_g17(best) << ',' << format_g17(fin.p_u.x) << ','
            << format_g17(fin.p_u.y) << ',' << format_g17(fin.p_u.z);
        for (int i = 0; i < k; ++i) csv << ',' << format_g17(fin.psi[i]);
        csv << ',' << format_g17(fin.objective_bits) << ',' << format_g17(gap) << '\n';

        const fs::path out_dir(opts.out_dir);
        write_text_file(out_dir / "grid_certify.csv", csv.str());
        write_manifest(out_dir, "grid_certify", loaded, "grid-certify",
                       opts.seed.value_or(loaded.mc.seed));

        log << "grid optimum " << best << " bits at (" << best_p.x << "," << best_p.y << ","
            << best_p.z << ") over " << cells << " cells; optimizer " << fin.objective_bits
            << " bits; gap fraction " << gap << " (tolerance " << grid.tolerance_fraction
            << ") -> " << (gap <= grid.tolerance_fraction ? "PASS" : "FAIL") << "\n";
        return gap <= grid.tolerance_fraction ? 0 : 2;
    });
}

}  // namespace secrecy
