#include "secrecy/gradients.hpp"

#include <cmath>
#include <sstream>

namespace secrecy {

namespace {

// Value of instance column `inst` (0-based across [a | b]) at polynomial
// order `order` (1-based), matching the layout used by build_D.
double table_entry(const CoeffTables& tables, int order, int inst) {
    const int na = static_cast<int>(tables.a.cols());
    if (inst < na) return tables.a(order - 1, inst);
    return tables.b_scaled.body(order - 1, inst - na);
}

// 0-based position of 1-based full-vector channel j within the active set,
// or -1 when the channel is inactive.
int active_position(const PowerAllocation& psi, int j) {
    if (j < 1 || j > static_cast<int>(psi.psi.size())) {
        std::ostringstream msg;
        msg << "channel index " << j << " outside 1.." << psi.psi.size();
        throw DomainError(msg.str());
    }
    if (psi.psi[j - 1] <= 0.0) return -1;
    int pos = 0;
    for (int i = 0; i + 1 < j; ++i) {
        if (psi.psi[i] > 0.0) ++pos;
    }
    return pos;
}

struct DShape {
    int dim = 0;           // matrix dimension (s or r)
    int first_power = 0;   // row index of the first power row
    Eigen::VectorXd scales;
};

DShape d_shape(const CoeffTables& tables, int r) {
    DShape out;
    const int s = tables.s;
    out.dim = (r <= s) ? s : r;
    out.first_power = (r <= s) ? (s - r) : 0;
    out.scales = Eigen::VectorXd::Zero(out.dim);
    out.scales.tail(tables.q) = tables.omega_nz;
    return out;
}

// d/dg of the matrix row evaluated at node value g; callers chain-rule it
// with dg/dpsi = gamma_bar/z or dg/dz = -g/z.
Eigen::RowVectorXd power_row_dg(const CoeffTables& tables, int k_antennas, int r, double g) {
    const int s = tables.s;
    Eigen::RowVectorXd row((r <= s) ? s : r);
    if (r <= s) {
        for (int inst = 0; inst < s; ++inst) {
            double acc = 0.0;
            double gp = 1.0;  // g^(k-1)
            for (int k = 1; k <= r; ++k) {
                acc += binomial(k_antennas, r - k) * table_entry(tables, s - r + k + 1, inst) *
                       k * gp;
                gp *= g;
            }
            row[inst] = acc;
        }
    } else {
        for (int inst = 0; inst < r - s; ++inst) {
            row[inst] = (inst == 0) ? 0.0 : inst * std::pow(g, inst - 1);
        }
        for (int inst = r - s; inst < r; ++inst) {
            double acc = 0.0;
            double gp = std::pow(g, r - s - 1);  // g^(n + r - s - 1)
            for (int n = 0; n <= s; ++n) {
                acc += binomial(k_antennas, s - n) *
                       table_entry(tables, n + 1, inst - (r - s)) * (n + r - s) * gp;
                gp *= g;
            }
            row[inst] = acc;
        }
    }
    return row;
}

// Plain Vandermonde [phi_j^(i-1)] used by the trace correction terms.
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

// Energy factor of the legitimate lower bound at this allocation.
double legit_energy(const PowerAllocation& psi, const LinkParams& link0) {
    const int k = static_cast<int>(psi.psi.size());
    const int n0 = link0.n_rx(k);
    const int q_hat = std::min(link0.q, psi.r);
    const Eigen::VectorXd omega_hat = guard_confluence(link0.omega.head(q_hat));
    return energy_term_E(psi.active(), omega_hat, psi.r, n0);
}

// --- complex-step evaluation of the reduced determinant ratio -------------
//
// The rate evaluates log det of the divided-difference reduction of D (the
// Vandermonde denominator cancelled inside), which is far better conditioned
// than the raw D. Derivatives therefore go through the same reduction:
// perturbing a power node by an imaginary 1e-100 step turns the imaginary
// part of the log-determinant into the exact derivative of the implemented
// function, with no subtractive cancellation and no extra conditioning.

using Cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;

// Complete homogeneous symmetric polynomials h_k(x_1..x_j); mirrors the real
// table the rate evaluation uses (cancellation-free for positive real parts).
MatC homogeneous_table_c(const VecC& x, int max_pow) {
    const int n = static_cast<int>(x.size());
    MatC h(n, max_pow + 1);
    Cplx p = 1.0;
    for (int k = 0; k <= max_pow; ++k) {
        h(0, k) = p;
        p *= x[0];
    }
    for (int j = 1; j < n; ++j) {
        h(j, 0) = 1.0;
        for (int k = 1; k <= max_pow; ++k) h(j, k) = h(j - 1, k) + x[j] * h(j, k - 1);
    }
    return h;
}

// Body of the divided-difference determinant ratio at complex power nodes;
// entry-for-entry the same construction as the real rate path.
MatC reduced_body_c(const VecC& gamma, const CoeffTables& tables, int k_antennas) {
    const int r = static_cast<int>(gamma.size());
    const int s = tables.s;
    const MatC h = homogeneous_table_c(gamma, r);
    const auto h_at = [&](int pow, int nodes) -> Cplx {
        return pow >= 0 ? h(nodes - 1, pow) : Cplx(0.0);
    };
    MatC body;
    if (r <= s) {
        body.resize(s, s);
        for (int inst = 0; inst < s; ++inst) {
            for (int m = 0; m < s - r; ++m) {
                body(m, inst) = table_entry(tables, m + 1, inst);
            }
            for (int j = 1; j <= r; ++j) {
                Cplx acc = 0.0;
                for (int k = 0; k <= r; ++k) {
                    acc += binomial(k_antennas, r - k) *
                           table_entry(tables, s - r + k + 1, inst) * h_at(k - j + 1, j);
                }
                body(s - r + j - 1, inst) = acc;
            }
        }
    } else {
        body.resize(r, r);
        for (int j = 1; j <= r; ++j) {
            for (int inst = 0; inst < r - s; ++inst) {
                body(j - 1, inst) = h_at(inst - j + 1, j);
            }
            for (int inst = r - s; inst < r; ++inst) {
                Cplx acc = 0.0;
                for (int n = 0; n <= s; ++n) {
                    acc += binomial(k_antennas, s - n) *
                           table_entry(tables, n + 1, inst - (r - s)) *
                           h_at(n + r - s - j + 1, j);
                }
                body(j - 1, inst) = acc;
            }
        }
    }
    return body;
}

// Imaginary part of log det of the reduced body. Column scales (eigenvalue
// logs and equilibration factors) are real constants, so they never touch the
// imaginary part and are skipped entirely.
double im_log_det_reduced(const VecC& gamma, const CoeffTables& tables, int k_antennas) {
    MatC body = reduced_body_c(gamma, tables, k_antennas);
    for (Eigen::Index j = 0; j < body.cols(); ++j) {
        const double mx = body.col(j).cwiseAbs().maxCoeff();
        if (mx > 0.0) body.col(j) /= mx;
    }
    Eigen::PartialPivLU<MatC> lu(body);
    const MatC& u = lu.matrixLU();
    double im = 0.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const Cplx d = u(i, i);
        // First-order phase increment; the +/- pi branch offsets of negative
        // real pivots are constants with zero derivative.
        im += d.imag() / d.real();
    }
    return im;
}

// Shared preamble: guarded active powers plus the real-path singularity
// check, so the derivative's error surface matches the rate evaluation's.
Eigen::VectorXd checked_power_nodes(const PowerAllocation& psi, const LinkParams& link,
                                    const CoeffTables& tables) {
    const Eigen::VectorXd phi = guard_confluence(psi.active());
    const VecC gamma0 = (link.gamma_bar / link.z * phi).cast<Cplx>();
    ScaledMatrix real_d =
        ScaledMatrix::unscaled(reduced_body_c(gamma0, tables, static_cast<int>(psi.psi.size())).real());
    for (Eigen::Index j = 0; j < real_d.body.cols(); ++j) {
        const double mx = real_d.body.col(j).cwiseAbs().maxCoeff();
        if (mx > 0.0) real_d.body.col(j) /= mx;
    }
    const SignedLogDet sld = signed_log_det(real_d);
    if (sld.sign == 0 || sld.singular_to_tolerance) {
        throw SingularToTolerance("determinant matrix is singular to tolerance");
    }
    return phi;
}

}  // namespace

ScaledMatrix dD_dpsi(const PowerAllocation& psi, const LinkParams& link,
                     double gamma_bar_over_z, int j) {
    const CoeffTables tables = coeff_tables(link);
    const DShape shape = d_shape(tables, psi.r);
    ScaledMatrix out;
    out.body = Eigen::MatrixXd::Zero(shape.dim, shape.dim);
    out.column_log_scales = shape.scales;
    const int pos = active_position(psi, j);
    if (pos < 0) return out;

    const Eigen::VectorXd phi = guard_confluence(psi.active());
    const double g = gamma_bar_over_z * phi[pos];
    out.body.row(shape.first_power + pos) =
        gamma_bar_over_z *
        power_row_dg(tables, static_cast<int>(psi.psi.size()), psi.r, g);
    return out;
}

ScaledMatrix dD_dz(const PowerAllocation& psi, const LinkParams& link,
                   double gamma_bar_over_z) {
    const CoeffTables tables = coeff_tables(link);
    const DShape shape = d_shape(tables, psi.r);
    ScaledMatrix out;
    out.body = Eigen::MatrixXd::Zero(shape.dim, shape.dim);
    out.column_log_scales = shape.scales;

    const Eigen::VectorXd phi = guard_confluence(psi.active());
    for (int p = 0; p < psi.r; ++p) {
        const double g = gamma_bar_over_z * phi[p];
        // dg/dz = -g/z chains the row's d/dg into its z-derivative.
        out.body.row(shape.first_power + p) =
            (-g / link.z) *
            power_row_dg(tables, static_cast<int>(psi.psi.size()), psi.r, g);
    }
    return out;
}

GradPsi grad_RU_psi(const PowerAllocation& psi, const LinkParams& link) {
    const int r = psi.r;
    const double gboz = link.gamma_bar / link.z;
    const CoeffTables tables = coeff_tables(link);
    const Eigen::VectorXd phi = checked_power_nodes(psi, link, tables);
    const int k = static_cast<int>(psi.psi.size());

    GradPsi grad(r);
    for (int p = 0; p < r; ++p) {
        const double h = 1e-100 * phi[p];
        VecC gamma = (gboz * phi).cast<Cplx>();
        gamma[p] += Cplx(0.0, gboz * h);
        grad[p] = im_log_det_reduced(gamma, tables, k) / h;
    }
    return grad;
}

GradPsi grad_RL_psi(const PowerAllocation& psi, const LinkParams& link0) {
    const double e = legit_energy(psi, link0);
    const Eigen::VectorXd active = psi.active();
    GradPsi grad(psi.r);
    for (int p = 0; p < psi.r; ++p) {
        grad[p] = link0.gamma_bar * e / (active[p] * (link0.z + link0.gamma_bar * e));
    }
    return grad;
}

double dRL_dz(const PowerAllocation& psi, const LinkParams& link0) {
    const double e = legit_energy(psi, link0);
    return -psi.r * link0.gamma_bar * e /
           (link0.z * link0.z + link0.z * link0.gamma_bar * e);
}

double dRU_dz(const PowerAllocation& psi, const LinkParams& link) {
    const CoeffTables tables = coeff_tables(link);
    const Eigen::VectorXd phi = checked_power_nodes(psi, link, tables);
    // All z-dependence flows through the per-power SNR nodes; stepping z on
    // the imaginary axis propagates through the ratio in one pass.
    const double h = 1e-100 * link.z;
    const Cplx gboz_c = link.gamma_bar / Cplx(link.z, h);
    const VecC gamma = gboz_c * phi.cast<Cplx>();
    return im_log_det_reduced(gamma, tables, static_cast<int>(psi.psi.size())) / h;
}

GradPos grad_location(const PowerAllocation& psi, const Position3& p_u,
                      const Scenario& scenario, int node_index,
                      bool strict_factor2) {
    const LinkParams link = link_params(scenario, node_index, p_u);
    const double dr_dz = (node_index == 0) ? dRL_dz(psi, link) : dRU_dz(psi, link);
    const Position3& p_tau = scenario.nodes[node_index].position;
    const Eigen::Vector3d diff = p_u.vec() - p_tau.vec();
    const double dist = diff.norm();
    GradPos grad;
    if (strict_factor2) {
        grad = 2.0 * dr_dz * diff;
    } else {
        grad = scenario.radio.alpha * std::pow(dist, scenario.radio.alpha - 2.0) * dr_dz * diff;
    }
    if (scenario.altitude_fixed) grad[2] = 0.0;
    return grad;
}

}  // namespace secrecy
