// Closed-form rate evaluators: legitimate-channel lower bound, eavesdropper
// determinant-average approximation, and the secrecy objective.
#pragma once

#include <Eigen/Dense>

#include "secrecy/geometry.hpp"
#include "secrecy/specfun.hpp"

namespace secrecy {

/// Entries below this floor are zeroed and removed from the active set.
inline constexpr double kPsiFloor = 1e-6;

/// Relative separation below which active powers / eigenvalues are treated as
/// confluent and deterministically jittered apart.
inline constexpr double kConfluenceTol = 1e-6;

/// Length-K nonnegative power split with its active-channel count.
struct PowerAllocation {
    Eigen::VectorXd psi;  // length K; inactive entries exactly 0
    int r = 0;            // count of entries >= floor

    /// Active entries in stored order (all strictly positive).
    Eigen::VectorXd active() const;
    /// Stored indices of the active entries.
    std::vector<int> active_indices() const;
};

/// Zeroes sub-floor entries, counts the active set, and checks the budget
/// sum(psi) <= 1 + 1e-9. Throws DomainError on violations.
PowerAllocation make_power_allocation(const Eigen::VectorXd& psi, double floor = kPsiFloor);

/// Deterministic symmetric separation of near-equal positive values: any group
/// with relative gaps < tol is replaced by v * (1 + tol * centered_offset).
/// Values are matched in descending order; the input order is preserved.
Eigen::VectorXd guard_confluence(const Eigen::VectorXd& values, double tol = kConfluenceTol);

/// Coefficient tables for the eavesdropper determinant formulas. Row index
/// i = 1..s+1; a has s-q columns, b has q columns whose exp(omega_j) factor is
/// kept in per-column log scales.
struct CoeffTables {
    Eigen::MatrixXd a;         // (s+1) x (s-q)
    ScaledMatrix b_scaled;     // (s+1) x q body, column_log_scales = omega_j
    int s = 0, t = 0, q = 0;
    Eigen::VectorXd omega_nz;  // the q guarded nonzero eigenvalues
};

enum class RateKind { legit_lower, eav_hmi, mc_true, mc_hmi };

struct RateValue {
    double bits_per_channel_use = 0.0;
    RateKind kind = RateKind::legit_lower;
};

inline constexpr double kNatsToBits = 1.4426950408889634;  // 1 / ln 2

/// E(Psi_hat) for the legitimate lower bound: geometric-mean energy of the
/// active eigenchannels.  `t` is the row dimension (degrees of freedom) of the
/// r-column equivalent channel; omega_hat holds the q_hat nonzero LoS
/// eigenvalues (q_hat = omega_hat.size() <= r <= t).  Returns E > 0.
double energy_term_E(const Eigen::VectorXd& psi_active, const Eigen::VectorXd& omega_hat,
                     int r, int t);

/// r * log(1 + (gamma_bar / z) * E) for the destination link, reported in
/// bits. K is taken from psi.psi.size(); requires psi.r <= min(N0, K).
RateValue rate_legit_lower(const PowerAllocation& psi, const LinkParams& link0);
double rate_legit_lower_nats(const PowerAllocation& psi, const LinkParams& link0);

/// Builds the a/b tables for a link (depends on s, t and the guarded omega).
CoeffTables coeff_tables(const LinkParams& link);

/// The determinant-polynomial matrix of the eavesdropper rate formula,
/// stored transposed: row j = coefficient column (constant columns first,
/// then one row per active power), column k = function index; b-function
/// columns carry exp(omega) in the column log scales.
ScaledMatrix build_D(const PowerAllocation& psi, const LinkParams& link,
                     double gamma_bar_over_z);

/// Haar-averaged determinant approximation of the eavesdropper rate, in bits.
RateValue rate_eav_hmi(const PowerAllocation& psi, const LinkParams& link);
double rate_eav_hmi_nats(const PowerAllocation& psi, const LinkParams& link);

/// Secrecy objective at (psi, p_u): legitimate lower bound minus the largest
/// eavesdropper approximation. `raw_bits` keeps the sign; `clamped_bits` is
/// the reported [.]^+ value.
struct SecrecyObjective {
    double legit_bits = 0.0;
    double eav_max_bits = 0.0;
    int active_eav = 0;  // node index (1..T) attaining the max
    double raw_bits = 0.0;
    double clamped_bits = 0.0;
};

SecrecyObjective secrecy_objective(const PowerAllocation& psi, const Position3& p_u,
                                   const Scenario& scenario);

}  // namespace secrecy
