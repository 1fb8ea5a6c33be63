// Scenario loading, run manifests, and the CLI command entry points.
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "secrecy/geometry.hpp"
#include "secrecy/montecarlo.hpp"
#include "secrecy/optimizer.hpp"

namespace secrecy {

inline constexpr const char* kToolVersion = "secrecy-planner 1.0.0";

/// 64-bit FNV-1a digest of a byte string, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);

/// Formats a double with 17 significant digits ("%.17g"), locale-independent.
std::string format_g17(double v);

struct RunManifest {
    std::string command;
    std::string scenario_digest;  // FNV-1a of the scenario file bytes
    std::string scenario_echo;    // canonical one-line config echo
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    std::string to_json() const;
};

struct LoadedScenario {
    Scenario scenario;
    OptimizerConfig optimizer;
    MCConfig mc;
    std::string digest;  // digest of the raw file bytes
    std::string echo;    // canonical summary used in manifests
};

/// Parses a scenario JSON file. Strict: unknown keys and malformed values
/// raise ParseError; cross-field checks go through validate_scenario.
LoadedScenario load_scenario(const std::string& path);

/// Shared CLI options after parsing.
struct CommonOptions {
    std::string scenario_path;
    std::string out_dir = ".";
    std::string point_path;                   // stored operating point (ecdf)
    std::optional<std::uint64_t> seed;        // overrides scenario seed
    std::optional<std::uint64_t> samples;     // overrides scenario sample count
    bool strict_paper = false;                // factor-2 location gradients
};

/// Compares the closed-form rate values against their sampling estimates for
/// the bundled check configurations; prints one line per configuration and
/// returns 0 only if every value sits inside its tolerance band.
int cmd_validate_rates(const CommonOptions& opts, std::ostream& log);

struct GradcheckOffender {
    std::string op;
    int point = 0;
    double rel_err = 0.0;
};

struct GradcheckReport {
    double max_rel_err = 0.0;
    int points = 0;
    std::vector<GradcheckOffender> worst;  // descending, capped at a handful
    bool ok() const { return max_rel_err <= 1e-5; }
};

/// Finite-difference audit of every analytic derivative at seeded random
/// feasible points. `corruption` multiplies the analytic values by
/// (1 + corruption) before comparing — a self-test knob proving the detector
/// detects (it must stay 0 for a real audit).
GradcheckReport run_gradcheck(const LoadedScenario& loaded, int points, bool strict_paper,
                              double corruption = 0.0);

/// Finite-difference audit of every analytic derivative at random feasible
/// points; returns 0 only if all relative errors stay inside tolerance.
int cmd_gradcheck(const CommonOptions& opts, std::ostream& log);

/// Runs the alternating optimizer and writes trajectory.csv plus a manifest.
int cmd_optimize(const CommonOptions& opts, std::ostream& log);

/// Samples the instantaneous secrecy-rate distribution at a stored operating
/// point (the last row of a trajectory CSV named by `point_path`); writes
/// secrecy_ecdf.csv plus a manifest and reports the outage fraction.
int cmd_ecdf(const CommonOptions& opts, std::ostream& log);

struct GridCertifyOptions {
    double spacing_m = 1.0;
    double psi_resolution = 0.05;       // simplex grid step for the power sweep
    double tolerance_fraction = 0.10;
    std::uint64_t max_points = 2000000;  // guard against runaway grids
};

/// Exhaustive location grid search (power re-optimized per point) compared
/// against the alternating optimizer's endpoint; returns 0 when the optimizer
/// is within the stated fraction of the grid optimum.
int cmd_grid_certify(const CommonOptions& opts, const GridCertifyOptions& grid,
                     std::ostream& log);

}  // namespace secrecy
