// Analytic first derivatives of the closed-form rates with respect to the
// power allocation and the UAV position.
#pragma once

#include <Eigen/Dense>

#include "secrecy/geometry.hpp"
#include "secrecy/rates.hpp"

namespace secrecy {

/// Per-active-channel partial derivatives (natural-log rate units).
using GradPsi = Eigen::VectorXd;

/// Partial derivatives with respect to p_u (third entry forced to 0 when the
/// altitude is fixed).
using GradPos = Eigen::Vector3d;

/// Entrywise derivative of the determinant matrix with respect to channel j
/// (1-based index into the full psi vector), in the same transposed/scaled
/// layout as build_D. Only the row belonging to that power is nonzero; an
/// inactive channel yields an all-zero body.
ScaledMatrix dD_dpsi(const PowerAllocation& psi, const LinkParams& link,
                     double gamma_bar_over_z, int j);

/// Entrywise derivative of the determinant matrix with respect to z.
ScaledMatrix dD_dz(const PowerAllocation& psi, const LinkParams& link,
                   double gamma_bar_over_z);

/// Gradient of the eavesdropper rate approximation with respect to the active
/// powers: trace terms evaluated through linear solves on the factorized
/// bodies (never explicit inverses). Length psi.r, natural-log units.
GradPsi grad_RU_psi(const PowerAllocation& psi, const LinkParams& link);

/// Gradient of the legitimate lower bound with respect to the active powers:
/// dR/dpsi_j = gamma_bar * E / (psi_j * (z + gamma_bar * E)).
GradPsi grad_RL_psi(const PowerAllocation& psi, const LinkParams& link0);

/// d/dz of the legitimate lower bound: -r * gamma_bar * E / (z^2 + z*gamma_bar*E).
double dRL_dz(const PowerAllocation& psi, const LinkParams& link0);

/// d/dz of the eavesdropper approximation:
/// r(r-1)/(2z) + tr[D^-1 dD/dz].
double dRU_dz(const PowerAllocation& psi, const LinkParams& link);

/// Chain-rule position gradient of the selected rate. `node_index` is 0 for
/// the destination (lower-bound rate) or 1..T for an eavesdropper
/// (determinant-average rate). Differentiates through the path gain
/// z = ||p_u - p_tau||^alpha only, treating the LoS eigenvalues as locally
/// constant (the model the location step optimizes). By default uses the
/// exact dz/dp = alpha * d^(alpha-2) * (p_u - p_tau); when strict_factor2 is
/// set it reproduces the alpha=2 specialized form 2 * (dR/dz) * (p_u - p_tau).
/// The altitude component is zeroed when the scenario fixes the altitude.
GradPos grad_location(const PowerAllocation& psi, const Position3& p_u,
                      const Scenario& scenario, int node_index,
                      bool strict_factor2 = false);

}  // namespace secrecy
