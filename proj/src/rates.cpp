#include "secrecy/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace secrecy {

namespace {

// Internal confluence check threshold: guarded inputs sit ~kConfluenceTol
// apart, so reject only when separation is an order of magnitude tighter.
constexpr double kConfluenceReject = 0.1 * kConfluenceTol;

bool has_confluent_pair(const Eigen::VectorXd& v, double tol) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        for (Eigen::Index j = i + 1; j < v.size(); ++j) {
            const double scale = std::max(std::abs(v[i]), std::abs(v[j]));
            if (std::abs(v[i] - v[j]) < tol * scale) return true;
        }
    }
    return false;
}

// Plain Vandermonde in the given nodes: entry (i, j) = x_j^i, i = 0..n-1.
Eigen::MatrixXd vandermonde(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd v(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double p = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i, j) = p;
            p *= x[j];
        }
    }
    return v;
}

}  // namespace

Eigen::VectorXd PowerAllocation::active() const {
    Eigen::VectorXd out(r);
    int m = 0;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        if (psi[i] > 0.0) out[m++] = psi[i];
    }
    return out;
}

std::vector<int> PowerAllocation::active_indices() const {
    std::vector<int> out;
    out.reserve(r);
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        if (psi[i] > 0.0) out.push_back(static_cast<int>(i));
    }
    return out;
}

PowerAllocation make_power_allocation(const Eigen::VectorXd& psi, double floor) {
    PowerAllocation out;
    out.psi = psi;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        if (psi[i] < 0.0) {
            std::ostringstream msg;
            msg << "power entry " << i << " is negative: " << psi[i];
            throw DomainError(msg.str());
        }
        sum += psi[i];
        if (out.psi[i] < floor) out.psi[i] = 0.0;
    }
    if (sum > 1.0 + 1e-9) {
        std::ostringstream msg;
        msg << "power budget exceeded: sum = " << sum;
        throw DomainError(msg.str());
    }
    out.r = static_cast<int>((out.psi.array() > 0.0).count());
    return out;
}

Eigen::VectorXd guard_confluence(const Eigen::VectorXd& values, double tol) {
    const Eigen::Index n = values.size();
    if (n <= 1) return values;

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return values[a] > values[b]; });

    Eigen::VectorXd out = values;
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index end = start + 1;
        while (end < n) {
            const double hi = values[idx[end - 1]];
            const double lo = values[idx[end]];
            const double scale = std::max(std::abs(hi), std::abs(lo));
            if (std::abs(hi - lo) < tol * scale) {
                ++end;
            } else {
                break;
            }
        }
        const Eigen::Index g = end - start;
        if (g > 1) {
            // Symmetric multiplicative spread; the largest member moves up,
            // the smallest down, preserving the descending order.
            for (Eigen::Index m = 0; m < g; ++m) {
                const double offset = 0.5 * static_cast<double>(g - 1) - static_cast<double>(m);
                out[idx[start + m]] = values[idx[start + m]] * (1.0 + tol * offset);
            }
        }
        start = end;
    }
    return out;
}

double energy_term_E(const Eigen::VectorXd& psi_active, const Eigen::VectorXd& omega_hat,
                     int r, int t) {
    const int q_hat = static_cast<int>(omega_hat.size());
    if (r < 1 || psi_active.size() != r || q_hat > r || r > t) {
        std::ostringstream msg;
        msg << "energy term requires psi size == r, q_hat <= r <= t; got psi="
            << psi_active.size() << " q_hat=" << q_hat << " r=" << r << " t=" << t;
        throw DomainError(msg.str());
    }
    for (Eigen::Index i = 0; i < psi_active.size(); ++i) {
        if (!(psi_active[i] > 0.0)) throw DomainError("active power entries must be positive");
    }
    for (Eigen::Index i = 0; i < omega_hat.size(); ++i) {
        if (!(omega_hat[i] > 0.0)) throw DomainError("omega_hat entries must be positive");
    }
    if (has_confluent_pair(omega_hat, kConfluenceReject)) {
        throw ConfluentEigenvalues("omega_hat entries too close; apply guard_confluence");
    }

    double inner = psi_active.array().log().sum();
    // Fully scattered eigenchannels contribute central-Wishart digamma terms.
    for (int k = 1; k <= r - q_hat; ++k) {
        inner += digamma(t - r + k);
    }
    if (q_hat > 0) {
        // Ratio of column-replaced Vandermonde determinants. Both the
        // numerator family and the denominator flip together under node
        // reordering, so the sum of ratios is order-invariant.
        const Eigen::MatrixXd v = vandermonde(omega_hat);
        const SignedLogDet den = signed_log_det(ScaledMatrix::unscaled(v));
        if (den.singular_to_tolerance) {
            throw ConfluentEigenvalues("Vandermonde in omega_hat is singular");
        }
        double ratio_sum = 0.0;
        for (int j = 0; j < q_hat; ++j) {
            Eigen::MatrixXd vj = v;
            double power = 1.0;
            for (int i = 1; i <= q_hat; ++i) {
                vj(i - 1, j) = power * digamma(t - q_hat + i) +
                               h_series(i, omega_hat[j], t, q_hat);
                power *= omega_hat[j];
            }
            const SignedLogDet num = signed_log_det(ScaledMatrix::unscaled(vj));
            if (num.sign != 0) {
                ratio_sum += num.sign * den.sign * std::exp(num.log_abs - den.log_abs);
            }
        }
        inner += ratio_sum;
    }
    return std::exp(inner / r);
}

double rate_legit_lower_nats(const PowerAllocation& psi, const LinkParams& link0) {
    const int k = static_cast<int>(psi.psi.size());
    const int n0 = link0.n_rx(k);
    const int r = psi.r;
    if (r < 1 || r > std::min(n0, k)) {
        std::ostringstream msg;
        msg << "active channel count r=" << r << " must lie in [1, min(N0=" << n0
            << ", K=" << k << ")]";
        throw DomainError(msg.str());
    }
    const int q_hat = std::min(link0.q, r);
    const Eigen::VectorXd omega_hat = guard_confluence(link0.omega.head(q_hat));
    const double e = energy_term_E(psi.active(), omega_hat, r, n0);
    return r * std::log1p(link0.gamma_bar / link0.z * e);
}

RateValue rate_legit_lower(const PowerAllocation& psi, const LinkParams& link0) {
    return RateValue{rate_legit_lower_nats(psi, link0) * kNatsToBits, RateKind::legit_lower};
}

CoeffTables coeff_tables(const LinkParams& link) {
    CoeffTables out;
    out.s = link.s;
    out.t = link.t;
    int q = 0;
    for (Eigen::Index i = 0; i < link.omega.size(); ++i) {
        if (link.omega[i] > 0.0) ++q;
    }
    out.q = q;
    out.omega_nz = guard_confluence(link.omega.head(q));
    const int s = out.s, t = out.t;

    out.a.resize(s + 1, s - q);
    for (int i = 1; i <= s + 1; ++i) {
        for (int j = 1; j <= s - q; ++j) {
            out.a(i - 1, j - 1) = std::exp(log_gamma(t - s + i + j - 1));
        }
    }

    out.b_scaled.body.resize(s + 1, q);
    out.b_scaled.column_log_scales = out.omega_nz;
    for (int j = 1; j <= q; ++j) {
        const double w = out.omega_nz[j - 1];
        const double log_w = std::log(w);
        for (int i = 1; i <= s + 1; ++i) {
            // Sum of log-domain Gamma-ratio terms; the exp(w) factor lives in
            // the column scale.
            double acc = 0.0;
            for (int kk = 0; kk <= i - 1; ++kk) {
                acc += std::exp(log_gamma(i) + log_gamma(t - s + i) + log_gamma(t - s + 1) +
                                kk * log_w - log_gamma(i - kk) - log_gamma(kk + 1) -
                                log_gamma(t - s + kk + 1));
            }
            out.b_scaled.body(i - 1, j - 1) = acc;
        }
    }
    return out;
}

namespace {

// Value of instance column `inst` (0-based across [a | b]) at polynomial
// order `order` (1-based, 1..s+1), from the scaled tables.
double table_entry(const CoeffTables& tables, int order, int inst) {
    const int na = static_cast<int>(tables.a.cols());
    if (inst < na) return tables.a(order - 1, inst);
    return tables.b_scaled.body(order - 1, inst - na);
}

// Complete homogeneous symmetric polynomials h_k(x_1..x_j) for j = 1..n and
// k = 0..max_pow; entry (j-1, k). All terms are positive for positive nodes,
// so the evaluation is cancellation-free.
Eigen::MatrixXd homogeneous_table(const Eigen::VectorXd& x, int max_pow) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd h(n, max_pow + 1);
    for (int k = 0; k <= max_pow; ++k) h(0, k) = std::pow(x[0], k);
    for (int j = 1; j < n; ++j) {
        h(j, 0) = 1.0;
        for (int k = 1; k <= max_pow; ++k) h(j, k) = h(j - 1, k) + x[j] * h(j, k - 1);
    }
    return h;
}

// Divides each body column by its max-abs entry, moving the factor into the
// column log scale, so LU pivot magnitudes reflect conditioning rather than
// raw column growth.
void equilibrate_columns(ScaledMatrix& m) {
    for (Eigen::Index j = 0; j < m.body.cols(); ++j) {
        const double mx = m.body.col(j).cwiseAbs().maxCoeff();
        if (mx > 0.0) {
            m.body.col(j) /= mx;
            m.column_log_scales[j] += std::log(mx);
        }
    }
}

// The determinant-ratio matrix det(D)/V_r(gamma) evaluated directly: each
// node row of D is replaced by the divided difference of its row polynomial
// over the leading nodes. Divided differences of x^p are complete homogeneous
// symmetric polynomials, so entries stay positive and finite down to
// vanishing coupling and through near-confluent powers.
ScaledMatrix reduced_D(const PowerAllocation& psi, const CoeffTables& tables, int k_antennas,
                       double gamma_bar_over_z) {
    const int r = psi.r;
    const int s = tables.s;
    const int q = tables.q;
    const Eigen::VectorXd phi = guard_confluence(psi.active());
    const Eigen::VectorXd gamma = gamma_bar_over_z * phi;
    const Eigen::MatrixXd h = homogeneous_table(gamma, r);
    const auto h_at = [&](int pow, int nodes) {
        return pow >= 0 ? h(nodes - 1, pow) : 0.0;
    };

    ScaledMatrix d;
    if (r <= s) {
        d.body.resize(s, s);
        d.column_log_scales = Eigen::VectorXd::Zero(s);
        d.column_log_scales.tail(q) = tables.omega_nz;
        for (int inst = 0; inst < s; ++inst) {
            for (int m = 0; m < s - r; ++m) {
                d.body(m, inst) = table_entry(tables, m + 1, inst);
            }
            for (int j = 1; j <= r; ++j) {
                double acc = 0.0;
                for (int k = 0; k <= r; ++k) {
                    acc += binomial(k_antennas, r - k) *
                           table_entry(tables, s - r + k + 1, inst) * h_at(k - j + 1, j);
                }
                d.body(s - r + j - 1, inst) = acc;
            }
        }
    } else {
        d.body.resize(r, r);
        d.column_log_scales = Eigen::VectorXd::Zero(r);
        d.column_log_scales.tail(q) = tables.omega_nz;
        for (int j = 1; j <= r; ++j) {
            for (int inst = 0; inst < r - s; ++inst) {
                d.body(j - 1, inst) = h_at(inst - j + 1, j);
            }
            for (int inst = r - s; inst < r; ++inst) {
                double acc = 0.0;
                for (int n = 0; n <= s; ++n) {
                    acc += binomial(k_antennas, s - n) *
                           table_entry(tables, n + 1, inst - (r - s)) *
                           h_at(n + r - s - j + 1, j);
                }
                d.body(j - 1, inst) = acc;
            }
        }
    }
    equilibrate_columns(d);
    return d;
}

}  // namespace

ScaledMatrix build_D(const PowerAllocation& psi, const LinkParams& link,
                     double gamma_bar_over_z) {
    const int k = static_cast<int>(psi.psi.size());
    const int r = psi.r;
    const int s = link.s;
    const CoeffTables tables = coeff_tables(link);
    const int q = tables.q;
    const Eigen::VectorXd phi = guard_confluence(psi.active());
    if (has_confluent_pair(phi, kConfluenceReject)) {
        throw ConfluentPowers("active powers too close; guard failed to separate them");
    }

    // Stored transposed relative to the natural function-by-order layout:
    // rows enumerate coefficient columns (constants first, then one per
    // active power), columns enumerate instances (a's, then scaled b's).
    ScaledMatrix d;
    if (r <= s) {
        d.body.resize(s, s);
        d.column_log_scales = Eigen::VectorXd::Zero(s);
        d.column_log_scales.tail(q) = tables.omega_nz;
        for (int inst = 0; inst < s; ++inst) {
            for (int m = 0; m < s - r; ++m) {
                d.body(m, inst) = table_entry(tables, m + 1, inst);
            }
            for (int j = 0; j < r; ++j) {
                const double g = gamma_bar_over_z * phi[j];
                double acc = 0.0;
                double gp = 1.0;  // g^(n - (s - r))
                for (int n = s - r; n <= s; ++n) {
                    acc += binomial(k, s - n) * table_entry(tables, n + 1, inst) * gp;
                    gp *= g;
                }
                d.body(s - r + j, inst) = acc;
            }
        }
    } else {
        d.body.resize(r, r);
        d.column_log_scales = Eigen::VectorXd::Zero(r);
        d.column_log_scales.tail(q) = tables.omega_nz;
        for (int m = 0; m < r; ++m) {
            const double g = gamma_bar_over_z * phi[m];
            // Leading monomial instances g^0 .. g^(r-s-1).
            double gp = 1.0;
            for (int inst = 0; inst < r - s; ++inst) {
                d.body(m, inst) = gp;
                gp *= g;
            }
            // Table instances: polynomials of degree r-s .. r in g.
            const double g_lead = std::pow(g, r - s);
            for (int inst = r - s; inst < r; ++inst) {
                double acc = 0.0;
                double gp2 = g_lead;
                for (int n = 0; n <= s; ++n) {
                    acc += binomial(k, s - n) * table_entry(tables, n + 1, inst - (r - s)) * gp2;
                    gp2 *= g;
                }
                d.body(m, inst) = acc;
            }
        }
    }
    return d;
}

double rate_eav_hmi_nats(const PowerAllocation& psi, const LinkParams& link) {
    const int k = static_cast<int>(psi.psi.size());
    const int r = psi.r;
    const int s = link.s;
    if (r < 1) throw DomainError("at least one active power entry is required");

    const CoeffTables tables = coeff_tables(link);
    const int q = tables.q;

    // Constant part: Gamma-ratio sum minus the log-determinant of the s x s
    // table block [a | scaled b].
    double g0 = 0.0;
    for (int j = 1; j <= std::min(r, s); ++j) {
        g0 += log_gamma(k + 1.0 - j) + log_gamma(j + 1.0) - log_gamma(k + 1.0);
    }
    ScaledMatrix ab;
    ab.body.resize(s, s);
    ab.body.leftCols(s - q) = tables.a.topRows(s);
    ab.body.rightCols(q) = tables.b_scaled.body.topRows(s);
    ab.column_log_scales = Eigen::VectorXd::Zero(s);
    ab.column_log_scales.tail(q) = tables.omega_nz;
    const SignedLogDet sld_ab = signed_log_det(ab);
    if (sld_ab.singular_to_tolerance) {
        throw SingularToTolerance("table block is singular to tolerance");
    }
    g0 -= sld_ab.total(ab);

    // Power part: log of det(D)/V_r(gamma), evaluated through the
    // divided-difference reduction; the coupling-power compensator between the
    // gamma- and psi-node Vandermondes cancels exactly inside the reduction.
    const double gboz = link.gamma_bar / link.z;
    const ScaledMatrix d = reduced_D(psi, tables, k, gboz);
    const SignedLogDet sld_d = signed_log_det(d);
    if (sld_d.singular_to_tolerance) {
        throw SingularToTolerance("determinant ratio is singular to tolerance");
    }
    // Reordering the eigenvalue columns flips both determinants together, so
    // only the sign product is meaningful; the ratio must be positive.
    if (sld_d.sign * sld_ab.sign != 1) {
        throw DomainError("determinant sign inconsistency in the rate formula");
    }
    return g0 + sld_d.total(d);
}

RateValue rate_eav_hmi(const PowerAllocation& psi, const LinkParams& link) {
    return RateValue{rate_eav_hmi_nats(psi, link) * kNatsToBits, RateKind::eav_hmi};
}

SecrecyObjective secrecy_objective(const PowerAllocation& psi, const Position3& p_u,
                                   const Scenario& scenario) {
    SecrecyObjective out;
    const LinkParams link0 = link_params(scenario, 0, p_u);
    out.legit_bits = rate_legit_lower_nats(psi, link0) * kNatsToBits;
    out.eav_max_bits = -std::numeric_limits<double>::infinity();
    for (int node = 1; node < static_cast<int>(scenario.nodes.size()); ++node) {
        const LinkParams link = link_params(scenario, node, p_u);
        const double bits = rate_eav_hmi_nats(psi, link) * kNatsToBits;
        if (bits > out.eav_max_bits) {
            out.eav_max_bits = bits;
            out.active_eav = node;
        }
    }
    out.raw_bits = out.legit_bits - out.eav_max_bits;
    out.clamped_bits = std::max(0.0, out.raw_bits);
    return out;
}

}  // namespace secrecy
