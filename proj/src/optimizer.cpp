// Alternating successive-approximation optimizers for power and location.
//
// The power subproblem maximizes the exact lower-bound rate minus a
// linearized eavesdropper rate over the budget simplex (projected subgradient
// ascent with diminishing steps and best-iterate tracking). The location
// subproblem maximizes the linearized objective exactly over the intersection
// of the displacement ball and a per-step trust region. Both loops guard
// ascent of the exact closed-form objective, so traces are monotone.
#include "secrecy/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "secrecy/errors.hpp"

namespace secrecy {

namespace {

void check_config(const OptimizerConfig& cfg) {
    if (!(cfg.eps1_bits > 0.0)) throw DomainError("OptimizerConfig.eps1_bits must be > 0");
    if (!(cfg.eps2_bits > 0.0)) throw DomainError("OptimizerConfig.eps2_bits must be > 0");
    if (cfg.max_outer_iters < 1) throw DomainError("OptimizerConfig.max_outer_iters must be >= 1");
    if (cfg.max_inner_iters < 1) throw DomainError("OptimizerConfig.max_inner_iters must be >= 1");
    if (cfg.subgradient_iters < 1)
        throw DomainError("OptimizerConfig.subgradient_iters must be >= 1");
    if (!(cfg.step_a > 0.0) || !(cfg.step_b > 0.0))
        throw DomainError("OptimizerConfig.step_a and step_b must be > 0");
    if (!(cfg.psi_floor > 0.0) || cfg.psi_floor >= 0.5)
        throw DomainError("OptimizerConfig.psi_floor must lie in (0, 0.5)");
    if (cfg.stall_patience < 1) throw DomainError("OptimizerConfig.stall_patience must be >= 1");
    if (cfg.d_delta && !(*cfg.d_delta > 0.0))
        throw DomainError("OptimizerConfig.d_delta must be > 0");
}

/// Euclidean projection onto {x >= floor componentwise, sum(x) <= budget}.
Eigen::VectorXd project_floored_simplex(Eigen::VectorXd x, double floor, double budget) {
    const int n = static_cast<int>(x.size());
    if (n * floor > budget)
        throw DomainError("project_floored_simplex: floor set exceeds the budget");
    for (int i = 0; i < n; ++i) x[i] = std::max(x[i], floor);
    if (x.sum() <= budget) return x;
    // Shift down by lambda so that sum(max(floor, x - lambda)) == budget.
    double lo = 0.0, hi = x.maxCoeff() - floor;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += std::max(floor, x[i] - mid);
        (s > budget ? lo : hi) = mid;
    }
    for (int i = 0; i < n; ++i) x[i] = std::max(floor, x[i] - hi);
    return x;
}

/// Scatters values on the anchor's active coordinates back into a length-K
/// allocation. The values stay at or above `floor`, so the active set is
/// preserved exactly.
PowerAllocation scatter_active(const Eigen::VectorXd& x, const std::vector<int>& active, int k,
                               double floor) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(k);
    for (size_t i = 0; i < active.size(); ++i) full[active[i]] = x[static_cast<int>(i)];
    return make_power_allocation(full, floor);
}

/// Deterministic central differences of the eavesdropper rate in each active
/// power entry; the rate evaluation itself is confluence-robust.
Eigen::VectorXd eav_fd_grad(const PowerAllocation& anchor, const LinkParams& link) {
    const std::vector<int> active = anchor.active_indices();
    Eigen::VectorXd g(anchor.r);
    for (int i = 0; i < anchor.r; ++i) {
        const int j = active[i];
        const double base = anchor.psi[j];
        const double h = std::min(1e-5 * std::max(base, 1e-2), 0.5 * base);
        PowerAllocation hi = anchor, lo = anchor;
        hi.psi[j] = base + h;
        lo.psi[j] = base - h;
        g[i] = (rate_eav_hmi_nats(hi, link) - rate_eav_hmi_nats(lo, link)) / (2.0 * h);
    }
    return g;
}

/// Analytic eavesdropper gradient when the determinant factorization is
/// well-conditioned; deterministic central differences otherwise. Degenerate
/// anchors (duplicate floor-level powers, vanishing gamma_bar/z) either make
/// the direct trace form throw or corrupt it past its singularity tolerance,
/// so the analytic result is also validated against the exact per-entry
/// range: every partial lies in [0, (gamma/z) * N_rx] because the rate is
/// nondecreasing in each power and the resolvent is a contraction.
Eigen::VectorXd eav_grad_robust(const PowerAllocation& anchor, const LinkParams& link) {
    const int k = static_cast<int>(anchor.psi.size());
    const double bound = link.gamma_bar * (link.kappa + 1.0) / link.z * link.n_rx(k);
    const double slack = 1e-6 * bound + 1e-12;
    try {
        const Eigen::VectorXd g = grad_RU_psi(anchor, link);
        bool ok = true;
        for (Eigen::Index i = 0; i < g.size(); ++i)
            ok = ok && std::isfinite(g[i]) && g[i] >= -slack && g[i] <= bound + slack;
        if (ok) return g;
    } catch (const SingularToTolerance&) {
    } catch (const ConfluentPowers&) {
    }
    return eav_fd_grad(anchor, link);
}

/// d/dz of the eavesdropper rate, guarded the same way: the true derivative
/// is nonpositive with |d/dz| <= min(N, K)/z (trace of a contracted rank-s
/// matrix), and degenerate anchors fall back to central differences.
double dRU_dz_robust(const PowerAllocation& psi, const LinkParams& link) {
    const double bound = static_cast<double>(link.s) / link.z;
    const double slack = 1e-6 * bound + 1e-300;
    try {
        const double d = dRU_dz(psi, link);
        if (std::isfinite(d) && d <= slack && d >= -bound - slack) return d;
    } catch (const SingularToTolerance&) {
    } catch (const ConfluentPowers&) {
    }
    const double h = 1e-5 * link.z;
    LinkParams hi = link, lo = link;
    hi.z += h;
    lo.z -= h;
    return (rate_eav_hmi_nats(psi, hi) - rate_eav_hmi_nats(psi, lo)) / (2.0 * h);
}

/// Position gradient of an eavesdropper rate, chaining the guarded d/dz
/// through the path gain exactly like the analytic rule (LoS eigenvalues held
/// fixed, altitude zeroed when frozen).
Eigen::Vector3d eav_location_grad_robust(const PowerAllocation& psi, const Position3& p,
                                         const Scenario& sc, int node, bool strict) {
    const LinkParams link = link_params(sc, node, p);
    const double dr_dz = dRU_dz_robust(psi, link);
    const Eigen::Vector3d diff = p.vec() - sc.nodes[node].position.vec();
    const double dist = diff.norm();
    Eigen::Vector3d g = strict
                            ? Eigen::Vector3d(2.0 * dr_dz * diff)
                            : Eigen::Vector3d(sc.radio.alpha *
                                              std::pow(dist, sc.radio.alpha - 2.0) * dr_dz * diff);
    if (sc.altitude_fixed) g.z() = 0.0;
    return g;
}

/// Anchored surrogate for the power step: exact destination lower bound minus
/// the pointwise max of the eavesdropper linearizations.
struct PowerSurrogate {
    LinkParams link0;
    std::vector<double> eav_at_anchor;
    std::vector<Eigen::VectorXd> eav_grad;
    Eigen::VectorXd anchor_active;
    std::vector<int> active;
    int k = 0;

    PowerSurrogate(const PowerAllocation& anchor, const Position3& p_u, const Scenario& sc) {
        link0 = link_params(sc, 0, p_u);
        active = anchor.active_indices();
        k = static_cast<int>(anchor.psi.size());
        anchor_active.resize(static_cast<int>(active.size()));
        for (size_t i = 0; i < active.size(); ++i)
            anchor_active[static_cast<int>(i)] = anchor.psi[active[i]];
        for (int tau = 1; tau <= sc.eavesdropper_count(); ++tau) {
            const LinkParams le = link_params(sc, tau, p_u);
            eav_at_anchor.push_back(rate_eav_hmi_nats(anchor, le));
            eav_grad.push_back(eav_grad_robust(anchor, le));
        }
    }

    /// Largest linearized eavesdropper term at x; lowest index wins ties.
    double eav_term(const Eigen::VectorXd& x, int* which = nullptr) const {
        double worst = 0.0;
        int arg = -1;
        for (size_t t = 0; t < eav_at_anchor.size(); ++t) {
            const double v = eav_at_anchor[t] + eav_grad[t].dot(x - anchor_active);
            if (arg < 0 || v > worst) {
                worst = v;
                arg = static_cast<int>(t);
            }
        }
        if (which) *which = arg;
        return arg < 0 ? 0.0 : worst;
    }

    double value(const Eigen::VectorXd& x, const PowerAllocation& pa) const {
        return rate_legit_lower_nats(pa, link0) - eav_term(x);
    }
};

/// Exact closed-form objective pieces at a fixed hover point (nats).
struct ExactObjective {
    LinkParams link0;
    std::vector<LinkParams> eves;

    ExactObjective(const Scenario& sc, const Position3& p) {
        link0 = link_params(sc, 0, p);
        for (int tau = 1; tau <= sc.eavesdropper_count(); ++tau)
            eves.push_back(link_params(sc, tau, p));
    }

    double legit(const PowerAllocation& pa) const { return rate_legit_lower_nats(pa, link0); }

    double eav_max(const PowerAllocation& pa) const {
        double worst = 0.0;
        bool any = false;
        for (const auto& le : eves) {
            const double v = rate_eav_hmi_nats(pa, le);
            if (!any || v > worst) worst = v;
            any = true;
        }
        return any ? worst : 0.0;
    }

    double objective(const PowerAllocation& pa) const { return legit(pa) - eav_max(pa); }
};

OptIterate record_iterate(int iter, const PowerAllocation& pa, const Position3& p,
                          const ExactObjective& exact, double surrogate_nats) {
    OptIterate it;
    it.iter = iter;
    it.psi = pa.psi;
    it.p_u = p;
    const double legit = exact.legit(pa);
    const double eav = exact.eav_max(pa);
    it.legit_bits = legit * kNatsToBits;
    it.eav_max_bits = eav * kNatsToBits;
    it.objective_bits = (legit - eav) * kNatsToBits;
    it.surrogate_bits = surrogate_nats * kNatsToBits;
    return it;
}

/// Subgradient of the objective minus the currently-active linearized
/// eavesdropper term at the anchor.
std::pair<Eigen::Vector3d, int> location_direction(const PowerAllocation& psi, const Position3& p,
                                                   const Scenario& sc, bool strict) {
    const Eigen::Vector3d g0 = grad_location(psi, p, sc, 0, strict);
    int arg = -1;
    double worst = 0.0;
    for (int tau = 1; tau <= sc.eavesdropper_count(); ++tau) {
        const double v = rate_eav_hmi_nats(psi, link_params(sc, tau, p));
        if (arg < 0 || v > worst) {
            worst = v;
            arg = tau;
        }
    }
    Eigen::Vector3d c = g0;
    if (arg >= 1) c -= eav_location_grad_robust(psi, p, sc, arg, strict);
    return {c, arg};
}

}  // namespace

PowerAllocation waterfilling_init(const Scenario& scenario) {
    const LinkParams link0 = link_params(scenario, 0, scenario.uav_start);
    const int k = scenario.K();
    const int s = link0.s;
    const double floor = kPsiFloor;

    // The rate bound's geometric-mean energy penalizes active channels that
    // carry negligible power, so the stream count is itself part of the
    // initialization: water-fill the leading r channels for every r and keep
    // the allocation with the largest closed-form rate.
    PowerAllocation best;
    double best_rate = -std::numeric_limits<double>::infinity();
    for (int r = 1; r <= s; ++r) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(k);
        const int ranked = std::min(link0.q, r);
        if (ranked == 0) {
            // No deterministic component among the actives: even split.
            for (int i = 0; i < r; ++i) full[i] = 1.0 / r;
        } else {
            // Channels beyond the deterministic rank get the floor; the rest
            // is water-filled over the inverse gains c_i = z/(gamma_bar w_i).
            const double budget = 1.0 - (r - ranked) * floor;
            Eigen::VectorXd cost(ranked);
            for (int i = 0; i < ranked; ++i)
                cost[i] = link0.z / (link0.gamma_bar * link0.omega[i]);
            auto filled = [&](double mu) {
                double total = 0.0;
                for (int i = 0; i < ranked; ++i) total += std::max(mu - cost[i], floor);
                return total;
            };
            double lo = cost.minCoeff(), hi = cost.maxCoeff() + budget;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (filled(mid) < budget ? lo : hi) = mid;
            }
            const double mu = 0.5 * (lo + hi);
            for (int i = 0; i < ranked; ++i) full[i] = std::max(mu - cost[i], floor);
            for (int i = ranked; i < r; ++i) full[i] = floor;
            // Absorb the bisection rounding into the largest entry so the
            // budget is met to machine precision.
            int top = 0;
            full.head(r).maxCoeff(&top);
            full[top] += 1.0 - full.sum();
        }
        const PowerAllocation cand = make_power_allocation(full, floor);
        const double rate = rate_legit_lower_nats(cand, link0);
        if (rate > best_rate) {
            best_rate = rate;
            best = cand;
        }
    }
    return best;
}

double taylor_RU_psi(const PowerAllocation& phi_anchor, const LinkParams& link,
                     const Eigen::VectorXd& phi_query_active) {
    const std::vector<int> active = phi_anchor.active_indices();
    if (phi_query_active.size() != static_cast<Eigen::Index>(active.size()))
        throw DomainError("taylor_RU_psi: query length must match the anchor's active set");
    const double f0 = rate_eav_hmi_nats(phi_anchor, link);
    const Eigen::VectorXd g = grad_RU_psi(phi_anchor, link);
    Eigen::VectorXd x0(phi_query_active.size());
    for (size_t i = 0; i < active.size(); ++i)
        x0[static_cast<int>(i)] = phi_anchor.psi[active[i]];
    return f0 + g.dot(phi_query_active - x0);
}

PowerSubproblemResult solve_power_subproblem(const PowerAllocation& phi_anchor,
                                             const Position3& p_u_fixed,
                                             const Scenario& scenario,
                                             const OptimizerConfig& cfg) {
    check_config(cfg);
    if (phi_anchor.r < 1)
        throw DomainError("solve_power_subproblem: anchor must have at least one active channel");

    const PowerSurrogate sur(phi_anchor, p_u_fixed, scenario);
    const int k = static_cast<int>(phi_anchor.psi.size());
    const double floor = cfg.psi_floor;

    Eigen::VectorXd x = project_floored_simplex(sur.anchor_active, floor, 1.0);
    PowerAllocation pa = scatter_active(x, sur.active, k, floor);
    double best_val = sur.value(x, pa);
    Eigen::VectorXd best_x = x;
    const double anchor_val = best_val;

    for (int m = 0; m < cfg.subgradient_iters; ++m) {
        int which = -1;
        sur.eav_term(x, &which);
        Eigen::VectorXd g = grad_RL_psi(pa, sur.link0);
        if (which >= 0) g -= sur.eav_grad[which];
        x = project_floored_simplex(x + (cfg.step_a / (cfg.step_b + m)) * g, floor, 1.0);
        pa = scatter_active(x, sur.active, k, floor);
        const double v = sur.value(x, pa);
        if (v > best_val + 1e-12 * std::max(1.0, std::abs(best_val))) {
            best_val = v;
            best_x = x;
        }
    }

    PowerSubproblemResult out;
    out.phi = scatter_active(best_x, sur.active, k, floor);
    out.surrogate_nats = best_val;
    // Projected-gradient fixed-point residual at the best iterate.
    int which = -1;
    sur.eav_term(best_x, &which);
    Eigen::VectorXd g = grad_RL_psi(out.phi, sur.link0);
    if (which >= 0) g -= sur.eav_grad[which];
    const double t = 1e-4;
    out.kkt_residual =
        (project_floored_simplex(best_x + t * g, floor, 1.0) - best_x).lpNorm<Eigen::Infinity>() /
        t;
    out.stalled = best_val <= anchor_val + 1e-12 * std::max(1.0, std::abs(anchor_val));
    return out;
}

std::pair<PowerAllocation, OptTrace> algorithm1_power(const PowerAllocation& psi_init,
                                                      const Position3& p_u_fixed,
                                                      const Scenario& scenario,
                                                      const OptimizerConfig& cfg) {
    check_config(cfg);
    const ExactObjective exact(scenario, p_u_fixed);
    const double eps1_nats = cfg.eps1_bits / kNatsToBits;

    OptTrace trace;
    PowerAllocation phi = psi_init;
    double exact_prev = exact.objective(phi);
    trace.iterates.push_back(record_iterate(0, phi, p_u_fixed, exact, exact_prev));
    double surrogate_prev = exact_prev;  // the surrogate is tangent at its anchor
    trace.reason = StopReason::iteration_cap;

    for (int n = 1; n <= cfg.max_inner_iters; ++n) {
        const PowerSubproblemResult res = solve_power_subproblem(phi, p_u_fixed, scenario, cfg);
        const double exact_new = exact.objective(res.phi);
        if (exact_new < exact_prev - 1e-12 * std::max(1.0, std::abs(exact_prev))) {
            // The linearized gain did not survive the exact objective; keep
            // the previous point.
            trace.reason = StopReason::no_improvement;
            break;
        }
        phi = res.phi;
        trace.iterates.push_back(record_iterate(n, phi, p_u_fixed, exact, res.surrogate_nats));
        const double gain = res.surrogate_nats - surrogate_prev;
        surrogate_prev = res.surrogate_nats;
        exact_prev = exact_new;
        if (res.stalled || gain < eps1_nats) {
            trace.reason = StopReason::converged;
            break;
        }
    }
    return {phi, trace};
}

Eigen::Vector3d max_linear_over_balls(const Eigen::Vector3d& c, const Eigen::Vector3d& start,
                                      const Eigen::Vector3d& anchor, double d_max,
                                      double d_delta, bool planar) {
    if (!(d_max > 0.0) || !(d_delta > 0.0))
        throw DomainError("max_linear_over_balls: ball radii must be > 0");

    // In the planar case work inside the anchor's horizontal plane: the
    // displacement ball cross-section is a disc around the start's ground
    // point with a reduced radius.
    Eigen::Vector3d c_eff = c;
    Eigen::Vector3d start_eff = start;
    double d_max_eff = d_max;
    if (planar) {
        c_eff.z() = 0.0;
        const double dz = anchor.z() - start.z();
        const double rad2 = d_max * d_max - dz * dz;
        if (rad2 < -1e-9)
            throw InfeasibleAnchor("max_linear_over_balls: anchor plane misses the ball");
        d_max_eff = std::sqrt(std::max(rad2, 0.0));
        start_eff.z() = anchor.z();
    }
    if ((anchor - start_eff).norm() > d_max_eff + 1e-9)
        throw InfeasibleAnchor("max_linear_over_balls: anchor outside the displacement ball");

    const double cn = c_eff.norm();
    if (cn == 0.0) return anchor;
    const Eigen::Vector3d chat = c_eff / cn;

    // Full trust-region step, if the displacement ball allows it.
    const Eigen::Vector3d p_trust = anchor + d_delta * chat;
    if ((p_trust - start_eff).norm() <= d_max_eff) return p_trust;

    // Displacement-sphere maximizer, if the trust region allows it.
    const Eigen::Vector3d p_outer = start_eff + d_max_eff * chat;
    if ((p_outer - anchor).norm() <= d_delta) return p_outer;

    // Otherwise both constraints are active: the maximizer lies on the
    // intersection sphere. Split the objective along the center line and its
    // orthogonal complement.
    const Eigen::Vector3d u = anchor - start_eff;
    const double len = u.norm();
    if (len <= 1e-15)
        throw DomainError("max_linear_over_balls: degenerate concentric configuration");
    const Eigen::Vector3d uh = u / len;
    const double axial = (len * len + d_max_eff * d_max_eff - d_delta * d_delta) / (2.0 * len);
    const double rho2 = std::max(d_max_eff * d_max_eff - axial * axial, 0.0);
    const Eigen::Vector3d c_perp = c_eff - c_eff.dot(uh) * uh;
    Eigen::Vector3d w;
    if (c_perp.norm() > 1e-14 * cn) {
        w = std::sqrt(rho2) * c_perp.normalized();
    } else {
        // The objective is parallel to the center line; all points of the
        // intersection sphere tie. Pick a deterministic perpendicular.
        Eigen::Vector3d t;
        if (planar) {
            t = Eigen::Vector3d(-uh.y(), uh.x(), 0.0);
        } else {
            int least = 0;
            Eigen::Vector3d axis = Eigen::Vector3d::Zero();
            uh.cwiseAbs().minCoeff(&least);
            axis[least] = 1.0;
            t = uh.cross(axis).normalized();
        }
        w = std::sqrt(rho2) * t;
    }
    return start_eff + axial * uh + w;
}

LocationStep solve_location_subproblem(const PowerAllocation& psi_fixed,
                                       const Position3& p_anchor, const Scenario& scenario,
                                       const OptimizerConfig& cfg) {
    check_config(cfg);
    const Eigen::Vector3d start = scenario.uav_start.vec();
    const Eigen::Vector3d anchor = p_anchor.vec();
    if ((anchor - start).norm() > scenario.d_max + 1e-9) {
        std::ostringstream msg;
        msg << "solve_location_subproblem: anchor at distance " << (anchor - start).norm()
            << " exceeds d_max = " << scenario.d_max;
        throw InfeasibleAnchor(msg.str());
    }

    auto [c, active_eav] = location_direction(psi_fixed, p_anchor, scenario,
                                              cfg.strict_paper_gradients);
    (void)active_eav;
    if (scenario.altitude_fixed) c.z() = 0.0;
    if (c.norm() < 1e-15) return {p_anchor, true};

    const double d_delta = cfg.d_delta ? *cfg.d_delta : scenario.d_delta;
    Eigen::Vector3d p = max_linear_over_balls(c, start, anchor, scenario.d_max, d_delta,
                                              scenario.altitude_fixed);
    if (cfg.min_altitude_m && p.z() < *cfg.min_altitude_m) {
        p.z() = *cfg.min_altitude_m;
        const bool feasible = (p - start).norm() <= scenario.d_max + 1e-9 &&
                              (p - anchor).norm() <= d_delta + 1e-9;
        if (!feasible) return {p_anchor, false};
    }
    return {Position3::from(p), false};
}

OptTrace algorithm2_alternating(const Scenario& scenario, const OptimizerConfig& cfg) {
    check_config(cfg);
    const double eps2_bits = cfg.eps2_bits;

    Position3 p = scenario.uav_start;
    PowerAllocation psi = waterfilling_init(scenario);

    OptTrace trace;
    trace.reason = StopReason::iteration_cap;
    {
        const ExactObjective exact(scenario, p);
        trace.iterates.push_back(record_iterate(0, psi, p, exact, exact.objective(psi)));
    }
    double current = trace.iterates.front().objective_bits / kNatsToBits;
    int below = 0;

    for (int n = 1; n <= cfg.max_outer_iters; ++n) {
        // Power stage at the current hover point.
        auto [phi_new, inner] = algorithm1_power(psi, p, scenario, cfg);
        psi = phi_new;
        const ExactObjective at_anchor(scenario, p);
        const double after_power = at_anchor.objective(psi);

        // Location stage: exact step on the linearized objective, with
        // trust-region backtracking so the exact objective never decreases.
        auto [c, active_eav] = location_direction(psi, p, scenario, cfg.strict_paper_gradients);
        (void)active_eav;
        if (scenario.altitude_fixed) c.z() = 0.0;
        Position3 p_next = p;
        double after_location = after_power;
        double surrogate = after_power;
        if (c.norm() >= 1e-15) {
            double d_delta = cfg.d_delta ? *cfg.d_delta : scenario.d_delta;
            for (int attempt = 0; attempt < 30; ++attempt) {
                const Eigen::Vector3d cand = max_linear_over_balls(
                    c, scenario.uav_start.vec(), p.vec(), scenario.d_max, d_delta,
                    scenario.altitude_fixed);
                const Position3 cand_pos = Position3::from(cand);
                const ExactObjective at_cand(scenario, cand_pos);
                const double v = at_cand.objective(psi);
                if (v >= after_power - 1e-12 * std::max(1.0, std::abs(after_power))) {
                    p_next = cand_pos;
                    after_location = v;
                    surrogate = after_power + c.dot(cand - p.vec());
                    break;
                }
                d_delta *= 0.5;
            }
        }
        p = p_next;

        const ExactObjective at_new(scenario, p);
        trace.iterates.push_back(record_iterate(n, psi, p, at_new, surrogate));
        const double gain_bits = (after_location - current) * kNatsToBits;
        current = after_location;

        if (gain_bits < eps2_bits) {
            if (++below >= cfg.stall_patience) {
                trace.reason = StopReason::converged;
                break;
            }
        } else {
            below = 0;
        }
    }
    return trace;
}

}  // namespace secrecy
