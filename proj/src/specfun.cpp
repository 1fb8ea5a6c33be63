#include "secrecy/specfun.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace secrecy {

double log_gamma(double x) {
    if (!(x > 0.0)) {
        std::ostringstream msg;
        msg << "log_gamma requires x > 0, got " << x;
        throw DomainError(msg.str());
    }
    return std::lgamma(x);
}

double digamma(double x) {
    if (!(x > 0.0)) {
        std::ostringstream msg;
        msg << "digamma requires x > 0, got " << x;
        throw DomainError(msg.str());
    }
    // Shift x upward until the asymptotic expansion is accurate, collecting
    // the recurrence terms psi(x) = psi(x + 1) - 1/x along the way.
    double shift = 0.0;
    while (x < 10.0) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    // Asymptotic series: ln x - 1/(2x) - sum_n B_{2n} / (2n x^{2n}). With
    // x >= 10 the first omitted term is below 5e-17.
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = -1.0 / 12.0;
    double p = inv2;
    double acc = series * p;
    p *= inv2;
    acc += (1.0 / 120.0) * p;
    p *= inv2;
    acc += (-1.0 / 252.0) * p;
    p *= inv2;
    acc += (1.0 / 240.0) * p;
    p *= inv2;
    acc += (-1.0 / 132.0) * p;
    p *= inv2;
    acc += (691.0 / 32760.0) * p;
    p *= inv2;
    acc += (-1.0 / 12.0) * p;
    return shift + std::log(x) - 0.5 * inv + acc;
}

namespace detail {

double reg_lower_inc_gamma_series(int k, double x) {
    // P(k, x) = x^k e^{-x} / Gamma(k+1) * sum_{n>=0} x^n / ((k+1)...(k+n)).
    if (x == 0.0) return 0.0;
    double term = 1.0;
    double sum = 1.0;
    double denom = static_cast<double>(k);
    for (int n = 0; n < 10000; ++n) {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if (term < sum * 1e-17) {
            const double log_prefix = k * std::log(x) - x - std::lgamma(k + 1.0);
            return std::exp(log_prefix) * sum;
        }
    }
    throw NonConvergence("incomplete gamma series did not converge");
}

double reg_lower_inc_gamma_cf(int k, double x) {
    // Complement Q(k, x) via the Lentz continued fraction, then P = 1 - Q.
    const double tiny = 1e-300;
    double b = x + 1.0 - k;
    double c = 1.0 / tiny;
    double d = 1.0 / ((std::abs(b) < tiny) ? tiny : b);
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (i - k);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) {
            const double log_prefix = k * std::log(x) - x - std::lgamma(static_cast<double>(k));
            return 1.0 - std::exp(log_prefix) * h;
        }
    }
    throw NonConvergence("incomplete gamma continued fraction did not converge");
}

}  // namespace detail

double reg_lower_inc_gamma(int k, double x) {
    if (k < 1) {
        std::ostringstream msg;
        msg << "reg_lower_inc_gamma requires integer order k >= 1, got " << k;
        throw DomainError(msg.str());
    }
    if (!(x >= 0.0)) {
        std::ostringstream msg;
        msg << "reg_lower_inc_gamma requires x >= 0, got " << x;
        throw DomainError(msg.str());
    }
    if (x == 0.0) return 0.0;
    const double v = (x < k + 1.0) ? detail::reg_lower_inc_gamma_series(k, x)
                                   : detail::reg_lower_inc_gamma_cf(k, x);
    return std::min(1.0, std::max(0.0, v));
}

double h_series(int i, double omega_j, int r, int q_hat) {
    if (i < 1 || q_hat < 1 || i > q_hat || q_hat > r) {
        std::ostringstream msg;
        msg << "h_series requires 1 <= i <= q_hat <= r, got i=" << i << " q_hat=" << q_hat
            << " r=" << r;
        throw DomainError(msg.str());
    }
    if (!(omega_j > 0.0)) {
        std::ostringstream msg;
        msg << "h_series requires omega > 0, got " << omega_j;
        throw DomainError(msg.str());
    }
    // sum_k P(k, omega) / (r - q_hat + i + k - 1) with the incremental update
    // P(k+1, w) = P(k, w) - e^{-w} w^k / k!.
    const int cap = static_cast<int>(std::ceil(omega_j)) + 300;
    double p = 1.0 - std::exp(-omega_j);  // P(1, omega)
    double sum = 0.0;
    bool converged = false;
    for (int k = 1; k <= cap; ++k) {
        const double term = p / static_cast<double>(r - q_hat + i + k - 1);
        sum += term;
        if (term < sum * 1e-14) {
            converged = true;
            break;
        }
        p -= std::exp(-omega_j + k * std::log(omega_j) - std::lgamma(k + 1.0));
        if (p < 0.0) p = 0.0;
    }
    if (!converged) throw NonConvergence("h_series hit its term cap before tolerance");
    return std::pow(omega_j, i - 1) * sum;
}

double binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) {
        std::ostringstream msg;
        msg << "binomial requires 0 <= k <= n, got n=" << n << " k=" << k;
        throw DomainError(msg.str());
    }
    if (n <= 60) {
        // Multiplicative form with exact integer intermediates: the running
        // product after step i equals C(n-k+i, i), so the division is exact.
        unsigned long long acc = 1;
        const int kk = std::min(k, n - k);
        for (int i = 1; i <= kk; ++i) {
            acc = acc * static_cast<unsigned long long>(n - kk + i) /
                  static_cast<unsigned long long>(i);
        }
        return static_cast<double>(acc);
    }
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

ScaledMatrix ScaledMatrix::unscaled(Eigen::MatrixXd m) {
    ScaledMatrix out;
    out.column_log_scales = Eigen::VectorXd::Zero(m.cols());
    out.body = std::move(m);
    return out;
}

Eigen::MatrixXd ScaledMatrix::reconstruct() const {
    Eigen::MatrixXd out = body;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        out.col(j) *= std::exp(column_log_scales[j]);
    }
    return out;
}

SignedLogDet signed_log_det(const ScaledMatrix& m) {
    if (m.body.rows() != m.body.cols()) {
        throw DomainError("signed_log_det requires a square body");
    }
    if (m.body.rows() == 0) {
        return SignedLogDet{1, 0.0, false};
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m.body);
    const Eigen::MatrixXd& factors = lu.matrixLU();
    int sign = (lu.permutationP().determinant() > 0) ? 1 : -1;
    double log_abs = 0.0;
    double smallest = std::numeric_limits<double>::infinity();
    double largest = 0.0;
    for (Eigen::Index i = 0; i < factors.rows(); ++i) {
        const double pivot = factors(i, i);
        const double mag = std::abs(pivot);
        smallest = std::min(smallest, mag);
        largest = std::max(largest, mag);
        if (pivot == 0.0) {
            sign = 0;
        } else {
            if (pivot < 0.0) sign = -sign;
            log_abs += std::log(mag);
        }
    }
    SignedLogDet out;
    out.sign = sign;
    out.log_abs = (sign == 0) ? -std::numeric_limits<double>::infinity() : log_abs;
    out.singular_to_tolerance = (sign == 0) || (smallest < 1e-13 * largest);
    return out;
}

}  // namespace secrecy
