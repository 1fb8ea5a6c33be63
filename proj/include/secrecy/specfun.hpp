// Special functions and numerically guarded determinant kernels.
#pragma once

#include <Eigen/Dense>

#include "secrecy/errors.hpp"

namespace secrecy {

/// Natural log of the Gamma function for x > 0. Relative error <= 1e-13.
double log_gamma(double x);

/// Digamma function psi0(x) for x > 0. Absolute error <= 1e-12.
double digamma(double x);

/// Regularized lower incomplete gamma P(k, x) = gamma(k, x) / Gamma(k) for
/// integer order k >= 1 and x >= 0. Uses the power series for x < k + 1 and
/// the Lentz continued fraction for the complement otherwise; both routes
/// agree to 1e-12 and the result lies in [0, 1].
double reg_lower_inc_gamma(int k, double x);

/// Truncated series omega^(i-1) * sum_k P(k, omega) / (r - q_hat + i + k - 1).
/// Stops once term/partial_sum < 1e-14 or k exceeds ceil(omega) + 300; throws
/// NonConvergence if the cap is hit first. Requires 1 <= i <= q_hat <= r and
/// omega > 0; the result is positive, finite, and increasing in omega.
double h_series(int i, double omega_j, int r, int q_hat);

/// Binomial coefficient C(n, k) for 0 <= k <= n: multiplicative evaluation
/// for n <= 60, log-gamma composition beyond.
double binomial(int n, int k);

/// Real matrix with per-column log factors divided out:
/// value[i][j] = body(i, j) * exp(column_log_scales[j]).
struct ScaledMatrix {
    Eigen::MatrixXd body;
    Eigen::VectorXd column_log_scales;

    static ScaledMatrix unscaled(Eigen::MatrixXd m);
    /// Dense reconstruction (test/diagnostic use; may overflow by design).
    Eigen::MatrixXd reconstruct() const;
};

/// Signed log-determinant of the *body* of a ScaledMatrix. Adding the column
/// scale sum recovers the determinant of the reconstructed matrix:
///   det = sign * exp(log_abs + sum(column_log_scales)).
struct SignedLogDet {
    int sign = 0;          // +1, -1, or 0 for an exactly singular body
    double log_abs = 0.0;  // ln |det body|; -inf when sign == 0
    bool singular_to_tolerance = false;  // smallest pivot < 1e-13 * largest

    /// ln |det| of the reconstructed matrix (body log-det plus scales).
    double total(const ScaledMatrix& m) const {
        return log_abs + m.column_log_scales.sum();
    }
};

/// Pivoted LU evaluation of the signed log determinant of m.body.
SignedLogDet signed_log_det(const ScaledMatrix& m);

namespace detail {
/// Power-series route for P(k, x); accurate for x < k + 1.
double reg_lower_inc_gamma_series(int k, double x);
/// Continued-fraction route (complement) for P(k, x); accurate for x >= k + 1.
double reg_lower_inc_gamma_cf(int k, double x);
}  // namespace detail

}  // namespace secrecy
