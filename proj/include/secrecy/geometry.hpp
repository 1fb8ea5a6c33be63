// Physical scenario description and deterministic LoS channel construction.
#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "secrecy/errors.hpp"

namespace secrecy {

struct Position3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Eigen::Vector3d vec() const { return {x, y, z}; }
    static Position3 from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

double distance(const Position3& a, const Position3& b);

enum class ArrayKind { circular, linear };

/// Antenna array geometry. Circular arrays lie in the horizontal plane around
/// their center (azimuth rotates the first element); linear arrays lie in the
/// ground plane along the azimuth direction, centered on the node position.
struct AntennaArray {
    ArrayKind kind = ArrayKind::circular;
    int element_count = 1;
    double radius_m = 0.0;   // circular
    double spacing_m = 0.0;  // linear
    double azimuth_rad = 0.0;
};

enum class NodeRole { destination, eavesdropper };

struct NodeSpec {
    NodeRole role = NodeRole::eavesdropper;
    Position3 position;
    AntennaArray antennas;    // element_count = N_tau
    double rician_kappa = 0;  // >= 0
};

enum class PhaseModel { linear_distance, sqrt_distance };

struct RadioParams {
    double c_p = 1.0;       // propagation loss at unit distance (linear)
    double alpha = 2.0;     // path-loss exponent, >= 2
    double noise_nu = 1.0;  // noise power
    double p_max = 1.0;     // transmit power budget
    double wavelength_m = 0.06;
    PhaseModel phase_model = PhaseModel::linear_distance;

    /// gamma = p_max * c_p / noise_nu.
    double gamma() const { return p_max * c_p / noise_nu; }
};

struct OptimizerConfig;  // optimizer.hpp

struct Scenario {
    Position3 uav_start;
    AntennaArray uav_array;  // element_count = K
    double d_max = 1.0;      // total displacement ball radius, meters
    double d_delta = 0.5;    // per-step trust region, meters
    bool altitude_fixed = false;
    std::vector<NodeSpec> nodes;  // index 0 = destination, 1..T = eavesdroppers
    RadioParams radio;

    int K() const { return uav_array.element_count; }
    int eavesdropper_count() const { return static_cast<int>(nodes.size()) - 1; }
};

/// Per-receiver derived link quantities.
struct LinkParams {
    double gamma_bar = 0.0;  // gamma / (kappa + 1)
    double z = 0.0;          // ||p_u - p_tau||^alpha
    int s = 0;               // min(N, K)
    int t = 0;               // max(N, K)
    int q = 0;               // numerical rank of the scaled LoS Gram matrix
    Eigen::VectorXd omega;   // descending eigenvalues of kappa * Hd^H Hd, length s

    // Carried alongside the spec'd fields so Monte Carlo oracles can draw the
    // actual channel: unit-modulus LoS matrix (N x K) and the Rician factor.
    Eigen::MatrixXcd los;
    double kappa = 0.0;

    /// Receive antenna count N = s + t - K for a UAV with K elements.
    int n_rx(int K) const { return s + t - K; }
};

/// Eigenstructure of the legitimate link used to fix the transmit basis.
struct LegitEigen {
    Eigen::MatrixXcd V;          // K x K unitary eigenvectors, descending order
    Eigen::VectorXd omega_hat;   // first q_hat nonzero eigenvalues
    Eigen::VectorXd omega_full;  // all K raw eigenvalues, descending, unthresholded
    int q = 0;                   // rank
    int r = 0;                   // active eigenchannel count
    int q_hat = 0;               // min(q, r)
};

/// Checks structural invariants and normalizes node order (destination first).
/// Throws NoDestination / DuplicatePosition / NonPositiveParameter naming the
/// offending field.
Scenario validate_scenario(const Scenario& raw);

/// z = ||p_u - p_tau||^alpha. Throws CoincidentNodes below 1e-9 m separation.
double path_gain_z(const Position3& p_u, const Position3& p_tau, double alpha);

/// Element coordinates of an array centered at `center`.
std::vector<Position3> antenna_positions(const AntennaArray& array, const Position3& center);

/// Unit-modulus LoS matrix H_d for the given node: entry (n, k) has phase
/// (2*pi/lambda) * f(r_nk) with f the configured phase model.
Eigen::MatrixXcd los_matrix(const Scenario& scenario, int node_index, const Position3& p_u);

/// Eigendecomposition of kappa_0 * Hd0^H Hd0 for the destination link.
/// Requires r <= min(N0, K).
LegitEigen legit_eigen(const Scenario& scenario, const Position3& p_u, int r);

/// Assembles gamma_bar, z, s, t, q, omega (and the LoS matrix) for one link.
LinkParams link_params(const Scenario& scenario, int node_index, const Position3& p_u);

}  // namespace secrecy
