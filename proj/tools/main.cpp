// Command-line front end: one subcommand per planning operation, thin
// argument plumbing around the library entry points in secrecy/io.hpp.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "secrecy/io.hpp"

namespace {

void add_common(CLI::App* sub, secrecy::CommonOptions& opts, bool needs_out = true) {
    sub->add_option("--scenario", opts.scenario_path, "Scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    if (needs_out)
        sub->add_option("--out", opts.out_dir, "Output directory for CSV and manifest files")
            ->capture_default_str();
    sub->add_option("--seed", opts.seed, "Override the scenario's sampling seed");
    sub->add_option("--samples", opts.samples,
                    "Override the scenario's sample count (gradcheck: probe points)");
    sub->add_flag("--strict-paper", opts.strict_paper,
                  "Use the factor-2 location gradient rule (exact only at loss exponent 2)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Secrecy-rate planner for an aerial multi-antenna relay: closed-form "
                 "legitimate/eavesdropper rates, sampling validation, and alternating "
                 "power-and-placement optimization."};
    app.set_version_flag("--version", std::string(secrecy::kToolVersion));
    app.require_subcommand(1);

    secrecy::CommonOptions val_opts;
    CLI::App* validate = app.add_subcommand(
        "validate-rates", "Compare closed-form rates against sampling estimates");
    add_common(validate, val_opts);

    secrecy::CommonOptions grad_opts;
    CLI::App* gradcheck = app.add_subcommand(
        "gradcheck", "Check analytic derivatives against central finite differences");
    add_common(gradcheck, grad_opts, /*needs_out=*/false);

    secrecy::CommonOptions opt_opts;
    CLI::App* optimize = app.add_subcommand(
        "optimize", "Run the alternating power/placement optimizer and write the trajectory");
    add_common(optimize, opt_opts);

    secrecy::CommonOptions ecdf_opts;
    CLI::App* ecdf = app.add_subcommand(
        "ecdf", "Sample the instantaneous secrecy-rate distribution at a stored point");
    add_common(ecdf, ecdf_opts);
    ecdf->add_option("--point", ecdf_opts.point_path,
                     "Trajectory CSV whose final row is the operating point")
        ->required()
        ->check(CLI::ExistingFile);

    secrecy::CommonOptions grid_opts;
    secrecy::GridCertifyOptions grid_cfg;
    CLI::App* grid = app.add_subcommand(
        "grid-certify", "Compare the optimizer against a coarse exhaustive grid search");
    add_common(grid, grid_opts);
    grid->add_option("--grid-step", grid_cfg.spacing_m, "Location lattice spacing in meters")
        ->capture_default_str();
    grid->add_option("--psi-resolution", grid_cfg.psi_resolution,
                     "Power-allocation simplex grid step")
        ->capture_default_str();
    grid->add_option("--tolerance", grid_cfg.tolerance_fraction,
                     "Accepted optimizer-vs-grid gap as a fraction of the grid optimum")
        ->capture_default_str();
    grid->add_option("--grid-max-points", grid_cfg.max_points,
                     "Abort when the grid has more cells than this")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) return secrecy::cmd_validate_rates(val_opts, std::cout);
    if (gradcheck->parsed()) return secrecy::cmd_gradcheck(grad_opts, std::cout);
    if (optimize->parsed()) return secrecy::cmd_optimize(opt_opts, std::cout);
    if (ecdf->parsed()) return secrecy::cmd_ecdf(ecdf_opts, std::cout);
    if (grid->parsed()) return secrecy::cmd_grid_certify(grid_opts, grid_cfg, std::cout);
    return 1;
}
