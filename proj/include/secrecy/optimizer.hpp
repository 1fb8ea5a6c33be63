// Alternating successive-approximation optimizers for power and location.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "secrecy/geometry.hpp"
#include "secrecy/gradients.hpp"
#include "secrecy/rates.hpp"

namespace secrecy {

struct OptimizerConfig {
    double eps1_bits = 1e-3;  // power-loop stopping threshold
    double eps2_bits = 1e-3;  // alternating-loop stopping threshold
    int max_outer_iters = 200;
    int max_inner_iters = 50;
    std::optional<double> d_delta;  // overrides the scenario trust region
    double step_a = 0.25;           // subgradient step a / (b + m)
    double step_b = 10.0;
    int subgradient_iters = 400;
    double psi_floor = kPsiFloor;
    bool strict_paper_gradients = false;  // factor-2 location chain rule
    /// Consecutive sub-threshold gains required before the alternating loop
    /// stops (1 reproduces the plain stopping rule).
    int stall_patience = 1;
    /// Optional minimum altitude for the location subproblem (off by default).
    std::optional<double> min_altitude_m;
};

enum class StopReason { converged, iteration_cap, no_improvement, zero_gradient };

struct OptIterate {
    int iter = 0;
    Eigen::VectorXd psi;
    Position3 p_u;
    double legit_bits = 0.0;
    double eav_max_bits = 0.0;
    double objective_bits = 0.0;  // raw (signed) closed-form objective
    double surrogate_bits = 0.0;  // surrogate value at this iterate
};

struct OptTrace {
    std::vector<OptIterate> iterates;
    StopReason reason = StopReason::converged;
};

/// Water-filling start over the legitimate LoS eigenchannels:
/// psi_k = max(mu - z0 / (gamma_bar * omega_k), floor) with mu bisected so the
/// budget is met exactly; zero-gain channels sit at the floor and a fully
/// LoS-free link falls back to a uniform split.
PowerAllocation waterfilling_init(const Scenario& scenario);

/// First-order expansion of the eavesdropper rate at `phi_anchor`, evaluated
/// at `phi_query` (natural-log units; active entries only).
double taylor_RU_psi(const PowerAllocation& phi_anchor, const LinkParams& link,
                     const Eigen::VectorXd& phi_query_active);

struct PowerSubproblemResult {
    PowerAllocation phi;
    double surrogate_nats = 0.0;  // surrogate objective at phi
    double kkt_residual = 0.0;
    bool stalled = false;  // no improvement over the anchor
};

/// One convexified power update: maximize the legitimate bound minus the
/// largest linearized eavesdropper rate over the budget simplex, by projected
/// subgradient ascent with diminishing steps and best-iterate tracking.
PowerSubproblemResult solve_power_subproblem(const PowerAllocation& phi_anchor,
                                             const Position3& p_u_fixed,
                                             const Scenario& scenario,
                                             const OptimizerConfig& cfg);

/// Iterative power optimization at a fixed location; the trace records the
/// surrogate and exact objectives per re-anchoring step.
std::pair<PowerAllocation, OptTrace> algorithm1_power(const PowerAllocation& psi_init,
                                                      const Position3& p_u_fixed,
                                                      const Scenario& scenario,
                                                      const OptimizerConfig& cfg);

struct LocationStep {
    Position3 p;
    bool zero_gradient = false;
};

/// Exact maximizer of c . p over the intersection of the balls
/// ||p - start|| <= d_max and ||p - anchor|| <= d_delta (anchor must satisfy
/// the first ball). `planar` restricts the step to the anchor's horizontal
/// plane. The core geometric step of the location subproblem, exposed for
/// direct certification.
Eigen::Vector3d max_linear_over_balls(const Eigen::Vector3d& c, const Eigen::Vector3d& start,
                                      const Eigen::Vector3d& anchor, double d_max,
                                      double d_delta, bool planar);

/// Exact maximizer of the linearized objective over the intersection of the
/// dispatch ball (d_max around the start) and the trust ball (d_delta around
/// the anchor). Altitude is frozen when the scenario fixes it.
LocationStep solve_location_subproblem(const PowerAllocation& psi_fixed,
                                       const Position3& p_anchor, const Scenario& scenario,
                                       const OptimizerConfig& cfg);

/// Alternating power/location optimization from the water-filling start at
/// the dispatch location; stops when the exact objective gain drops below
/// eps2 (recorded per iterate alongside the surrogate).
OptTrace algorithm2_alternating(const Scenario& scenario, const OptimizerConfig& cfg);

}  // namespace secrecy
