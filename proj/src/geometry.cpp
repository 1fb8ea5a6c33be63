#include "secrecy/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace secrecy {

namespace {

constexpr double kCoincidenceEps = 1e-9;  // meters

void require_positive(double v, const char* field) {
    if (!(v > 0.0)) {
        std::ostringstream msg;
        msg << field << " must be positive, got " << v;
        throw NonPositiveParameter(msg.str());
    }
}

}  // namespace

double distance(const Position3& a, const Position3& b) {
    return (a.vec() - b.vec()).norm();
}

Scenario validate_scenario(const Scenario& raw) {
    Scenario s = raw;

    int destinations = 0;
    for (const auto& node : s.nodes) {
        if (node.role == NodeRole::destination) ++destinations;
    }
    if (destinations != 1) {
        std::ostringstream msg;
        msg << "nodes: expected exactly one destination, found " << destinations;
        throw NoDestination(msg.str());
    }
    // Normalize: destination first, eavesdroppers keep their relative order.
    std::stable_sort(s.nodes.begin(), s.nodes.end(), [](const NodeSpec& a, const NodeSpec& b) {
        return (a.role == NodeRole::destination) > (b.role == NodeRole::destination);
    });
    if (s.nodes.size() < 2) {
        throw NoDestination("nodes: at least one eavesdropper is required");
    }

    require_positive(s.d_max, "uav.d_max");
    require_positive(s.d_delta, "uav.d_delta");
    require_positive(s.radio.c_p, "radio.c_p");
    require_positive(s.radio.noise_nu, "radio.noise_nu");
    require_positive(s.radio.p_max, "radio.p_max");
    require_positive(s.radio.wavelength_m, "radio.wavelength_m");
    if (s.radio.alpha < 2.0) {
        std::ostringstream msg;
        msg << "radio.alpha must be >= 2, got " << s.radio.alpha;
        throw NonPositiveParameter(msg.str());
    }
    if (!(s.uav_start.z > 0.0)) {
        throw NonPositiveParameter("uav.start altitude must be positive");
    }

    auto check_array = [](const AntennaArray& a, const char* field) {
        if (a.element_count < 1) {
            std::ostringstream msg;
            msg << field << ".element_count must be >= 1, got " << a.element_count;
            throw NonPositiveParameter(msg.str());
        }
        if (a.kind == ArrayKind::circular) {
            std::ostringstream msg;
            msg << field << ".radius_m must be positive, got " << a.radius_m;
            if (!(a.radius_m > 0.0)) throw NonPositiveParameter(msg.str());
        } else {
            std::ostringstream msg;
            msg << field << ".spacing_m must be positive, got " << a.spacing_m;
            if (!(a.spacing_m > 0.0)) throw NonPositiveParameter(msg.str());
        }
    };
    check_array(s.uav_array, "uav.array");
    for (size_t i = 0; i < s.nodes.size(); ++i) {
        std::ostringstream field;
        field << "nodes[" << i << "]";
        check_array(s.nodes[i].antennas, field.str().c_str());
        if (s.nodes[i].rician_kappa < 0.0) {
            std::ostringstream msg;
            msg << "nodes[" << i << "].kappa must be nonnegative, got "
                << s.nodes[i].rician_kappa;
            throw NonPositiveParameter(msg.str());
        }
    }

    for (size_t i = 0; i < s.nodes.size(); ++i) {
        if (distance(s.nodes[i].position, s.uav_start) < kCoincidenceEps) {
            std::ostringstream msg;
            msg << "nodes[" << i << "].position coincides with uav.start";
            throw DuplicatePosition(msg.str());
        }
        for (size_t j = i + 1; j < s.nodes.size(); ++j) {
            if (distance(s.nodes[i].position, s.nodes[j].position) < kCoincidenceEps) {
                std::ostringstream msg;
                msg << "nodes[" << i << "].position duplicates nodes[" << j << "].position";
                throw DuplicatePosition(msg.str());
            }
        }
    }
    return s;
}

double path_gain_z(const Position3& p_u, const Position3& p_tau, double alpha) {
    const double d = distance(p_u, p_tau);
    if (d < kCoincidenceEps) {
        throw CoincidentNodes("node positions closer than 1e-9 m");
    }
    return std::pow(d, alpha);
}

std::vector<Position3> antenna_positions(const AntennaArray& array, const Position3& center) {
    std::vector<Position3> out;
    out.reserve(array.element_count);
    const int n = array.element_count;
    if (array.kind == ArrayKind::circular) {
        // Elements evenly spaced on a horizontal circle; azimuth rotates the
        // whole ring about the vertical axis.
        for (int k = 0; k < n; ++k) {
            const double theta = array.azimuth_rad + 2.0 * std::numbers::pi * k / n;
            out.push_back({center.x + array.radius_m * std::cos(theta),
                           center.y + array.radius_m * std::sin(theta), center.z});
        }
    } else {
        // Elements along the azimuth direction in the ground plane, centered.
        const double cx = std::cos(array.azimuth_rad);
        const double cy = std::sin(array.azimuth_rad);
        for (int k = 0; k < n; ++k) {
            const double offset = (k - 0.5 * (n - 1)) * array.spacing_m;
            out.push_back({center.x + offset * cx, center.y + offset * cy, center.z});
        }
    }
    return out;
}

Eigen::MatrixXcd los_matrix(const Scenario& scenario, int node_index, const Position3& p_u) {
    if (node_index < 0 || node_index >= static_cast<int>(scenario.nodes.size())) {
        std::ostringstream msg;
        msg << "node index " << node_index << " out of range";
        throw DomainError(msg.str());
    }
    const NodeSpec& node = scenario.nodes[node_index];
    const auto tx = antenna_positions(scenario.uav_array, p_u);
    const auto rx = antenna_positions(node.antennas, node.position);
    const double two_pi_over_lambda = 2.0 * std::numbers::pi / scenario.radio.wavelength_m;
    const bool sqrt_model = scenario.radio.phase_model == PhaseModel::sqrt_distance;

    Eigen::MatrixXcd h(rx.size(), tx.size());
    for (size_t n = 0; n < rx.size(); ++n) {
        for (size_t k = 0; k < tx.size(); ++k) {
            const double r = distance(rx[n], tx[k]);
            if (r < kCoincidenceEps) {
                throw CoincidentNodes("antenna elements closer than 1e-9 m");
            }
            const double phase = two_pi_over_lambda * (sqrt_model ? std::sqrt(r) : r);
            h(n, k) = std::complex<double>(std::cos(phase), std::sin(phase));
        }
    }
    return h;
}

namespace {

// Descending eigen-decomposition of kappa * H^H H with the rank threshold
// applied: eigenvalues below 1e-6 of the largest are treated as exact zeros.
struct GramEigen {
    Eigen::MatrixXcd vectors;     // descending order
    Eigen::VectorXd raw;          // descending, unthresholded
    Eigen::VectorXd thresholded;  // descending, small values zeroed
    int rank = 0;
};

GramEigen gram_eigen(const Eigen::MatrixXcd& h, double kappa) {
    const Eigen::Index k = h.cols();
    GramEigen out;
    if (kappa == 0.0) {
        out.vectors = Eigen::MatrixXcd::Identity(k, k);
        out.raw = Eigen::VectorXd::Zero(k);
        out.thresholded = Eigen::VectorXd::Zero(k);
        out.rank = 0;
        return out;
    }
    Eigen::MatrixXcd gram = kappa * (h.adjoint() * h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram);
    // Eigen returns ascending order; reverse both values and vectors.
    out.raw = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    out.thresholded = out.raw;
    const double top = std::max(out.raw[0], 0.0);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (out.thresholded[i] < top * 1e-6) {
            out.thresholded[i] = 0.0;
        } else {
            ++out.rank;
        }
    }
    return out;
}

}  // namespace

LegitEigen legit_eigen(const Scenario& scenario, const Position3& p_u, int r) {
    const Eigen::MatrixXcd h = los_matrix(scenario, 0, p_u);
    const int n0 = static_cast<int>(h.rows());
    const int k = static_cast<int>(h.cols());
    if (r < 1 || r > std::min(n0, k)) {
        std::ostringstream msg;
        msg << "active channel count r=" << r << " must lie in [1, min(N0=" << n0
            << ", K=" << k << ")]";
        throw DomainError(msg.str());
    }
    const GramEigen ge = gram_eigen(h, scenario.nodes[0].rician_kappa);
    LegitEigen out;
    out.V = ge.vectors;
    out.omega_full = ge.raw;
    out.q = ge.rank;
    out.r = r;
    out.q_hat = std::min(ge.rank, r);
    out.omega_hat = ge.thresholded.head(out.q_hat);
    return out;
}

LinkParams link_params(const Scenario& scenario, int node_index, const Position3& p_u) {
    if (node_index < 0 || node_index >= static_cast<int>(scenario.nodes.size())) {
        std::ostringstream msg;
        msg << "node index " << node_index << " out of range";
        throw DomainError(msg.str());
    }
    const NodeSpec& node = scenario.nodes[node_index];
    const int n = node.antennas.element_count;
    const int k = scenario.K();

    LinkParams out;
    out.kappa = node.rician_kappa;
    out.gamma_bar = scenario.radio.gamma() / (node.rician_kappa + 1.0);
    out.z = path_gain_z(p_u, node.position, scenario.radio.alpha);
    out.s = std::min(n, k);
    out.t = std::max(n, k);
    out.los = los_matrix(scenario, node_index, p_u);
    const GramEigen ge = gram_eigen(out.los, node.rician_kappa);
    out.q = ge.rank;
    out.omega = ge.thresholded.head(out.s);
    return out;
}

}  // namespace secrecy
