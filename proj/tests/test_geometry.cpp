// Unit tests for scenario validation, array geometry, LoS construction, and
// derived link parameters. Oracles: direct arithmetic, an independent SVD
// route for eigenvalues, trace identities, and isometry properties.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "secrecy/errors.hpp"
#include "secrecy/geometry.hpp"

namespace {

secrecy::AntennaArray circular(int k, double radius, double azimuth = 0.0) {
    secrecy::AntennaArray a;
    a.kind = secrecy::ArrayKind::circular;
    a.element_count = k;
    a.radius_m = radius;
    a.azimuth_rad = azimuth;
    return a;
}

secrecy::AntennaArray linear(int n, double spacing, double azimuth = 0.0) {
    secrecy::AntennaArray a;
    a.kind = secrecy::ArrayKind::linear;
    a.element_count = n;
    a.spacing_m = spacing;
    a.azimuth_rad = azimuth;
    return a;
}

// Single-destination baseline: UAV hovering at 10 m altitude, destination
// 20 m away on the ground, one eavesdropper off to the side.
secrecy::Scenario base_scenario(int K = 4, int N0 = 4, double kappa = 4.0) {
    secrecy::Scenario s;
    s.uav_start = {0.0, 0.0, 10.0};
    s.uav_array = circular(K, 0.6);
    s.d_max = 8.0;
    s.d_delta = 0.5;
    s.radio.c_p = 1.0;
    s.radio.alpha = 2.5;
    s.radio.noise_nu = 1.0;
    s.radio.p_max = 10.0;
    s.radio.wavelength_m = 0.06;

    secrecy::NodeSpec dest;
    dest.role = secrecy::NodeRole::destination;
    dest.position = {20.0, 0.0, 0.0};
    dest.antennas = linear(N0, 0.12, 0.3);
    dest.rician_kappa = kappa;
    s.nodes.push_back(dest);

    secrecy::NodeSpec eve;
    eve.role = secrecy::NodeRole::eavesdropper;
    eve.position = {10.0, 6.0, 0.0};
    eve.antennas = linear(2, 0.12, 1.1);
    eve.rician_kappa = kappa;
    s.nodes.push_back(eve);
    return s;
}

}  // namespace

TEST_CASE("validate_scenario: well-formed input accepted, destination first") {
    auto s = base_scenario();
    auto out = secrecy::validate_scenario(s);
    CHECK(out.nodes.size() == 2);
    CHECK(out.nodes[0].role == secrecy::NodeRole::destination);

    // Destination listed second gets moved to the front.
    std::swap(s.nodes[0], s.nodes[1]);
    auto reordered = secrecy::validate_scenario(s);
    CHECK(reordered.nodes[0].role == secrecy::NodeRole::destination);
    CHECK(reordered.nodes[0].position.x == 20.0);
}

TEST_CASE("validate_scenario: structural violations are named") {
    auto two_dest = base_scenario();
    two_dest.nodes[1].role = secrecy::NodeRole::destination;
    CHECK_THROWS_AS(secrecy::validate_scenario(two_dest), secrecy::NoDestination);

    auto no_dest = base_scenario();
    no_dest.nodes[0].role = secrecy::NodeRole::eavesdropper;
    CHECK_THROWS_AS(secrecy::validate_scenario(no_dest), secrecy::NoDestination);

    auto zero_dmax = base_scenario();
    zero_dmax.d_max = 0.0;
    CHECK_THROWS_AS(secrecy::validate_scenario(zero_dmax), secrecy::NonPositiveParameter);

    auto dup = base_scenario();
    dup.nodes[1].position = dup.nodes[0].position;
    CHECK_THROWS_AS(secrecy::validate_scenario(dup), secrecy::DuplicatePosition);

    auto on_uav = base_scenario();
    on_uav.nodes[1].position = on_uav.uav_start;
    CHECK_THROWS_AS(secrecy::validate_scenario(on_uav), secrecy::DuplicatePosition);

    auto bad_alpha = base_scenario();
    bad_alpha.radio.alpha = 1.5;
    CHECK_THROWS_AS(secrecy::validate_scenario(bad_alpha), secrecy::NonPositiveParameter);

    auto neg_kappa = base_scenario();
    neg_kappa.nodes[0].rician_kappa = -0.5;
    CHECK_THROWS_AS(secrecy::validate_scenario(neg_kappa), secrecy::NonPositiveParameter);
}

TEST_CASE("path_gain_z: direct arithmetic oracle") {
    CHECK(secrecy::path_gain_z({0, 0, 1}, {0, 0, 0}, 2.0) == doctest::Approx(1.0));
    // 20 m ground offset, 10 m altitude: squared distance 500.
    const double want = std::pow(500.0, 1.25);
    CHECK(secrecy::path_gain_z({0, 0, 10}, {20, 0, 0}, 2.5) ==
          doctest::Approx(want).epsilon(1e-14));
    // alpha = 2 equals the squared norm.
    Eigen::Vector3d a(1.3, -0.2, 4.0), b(0.4, 2.2, 0.0);
    CHECK(secrecy::path_gain_z(secrecy::Position3::from(a), secrecy::Position3::from(b), 2.0) ==
          doctest::Approx((a - b).squaredNorm()).epsilon(1e-14));
    CHECK_THROWS_AS(secrecy::path_gain_z({1, 1, 1}, {1, 1, 1 + 1e-12}, 2.0),
                    secrecy::CoincidentNodes);
}

TEST_CASE("path_gain_z: strictly increasing in distance") {
    double prev = 0.0;
    for (double d = 1.0; d <= 50.0; d += 1.0) {
        const double z = secrecy::path_gain_z({0, 0, d}, {0, 0, 0}, 2.5);
        CHECK(z > prev);
        prev = z;
    }
}

TEST_CASE("antenna_positions: circular symmetry and linear spacing") {
    auto quad = secrecy::antenna_positions(circular(4, 0.6), {0, 0, 0});
    REQUIRE(quad.size() == 4);
    CHECK(quad[0].x == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(quad[0].y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(quad[1].x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(quad[1].y == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(quad[2].x == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(quad[3].y == doctest::Approx(-0.6).epsilon(1e-12));
    for (const auto& p : quad) CHECK(p.z == 0.0);

    auto pair = secrecy::antenna_positions(linear(2, 0.12), {5, 1, 0});
    REQUIRE(pair.size() == 2);
    CHECK(secrecy::distance(pair[0], pair[1]) == doctest::Approx(0.12).epsilon(1e-12));
    CHECK(0.5 * (pair[0].x + pair[1].x) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(0.5 * (pair[0].y + pair[1].y) == doctest::Approx(1.0).epsilon(1e-12));

    auto solo = secrecy::antenna_positions(circular(1, 0.6), {0, 0, 0});
    REQUIRE(solo.size() == 1);
    CHECK(secrecy::distance(solo[0], {0, 0, 0}) == doctest::Approx(0.6).epsilon(1e-12));

    // Pairwise distinct for a dense circular array.
    auto many = secrecy::antenna_positions(circular(8, 0.6), {1, 2, 3});
    for (size_t i = 0; i < many.size(); ++i)
        for (size_t j = i + 1; j < many.size(); ++j)
            CHECK(secrecy::distance(many[i], many[j]) > 1e-6);
}

TEST_CASE("los_matrix: unit modulus everywhere") {
    auto s = base_scenario(4, 4);
    for (int node = 0; node < 2; ++node) {
        auto h = secrecy::los_matrix(s, node, s.uav_start);
        REQUIRE(h.rows() == (node == 0 ? 4 : 2));
        REQUIRE(h.cols() == 4);
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            for (Eigen::Index j = 0; j < h.cols(); ++j)
                CHECK(std::abs(std::abs(h(i, j)) - 1.0) < 1e-12);
    }
}

TEST_CASE("los_matrix: single-antenna phase matches the definition") {
    auto s = base_scenario(1, 1);
    s.uav_array = circular(1, 0.6);
    s.nodes[0].antennas = linear(1, 0.12);
    auto h = secrecy::los_matrix(s, 0, s.uav_start);
    REQUIRE(h.rows() == 1);
    REQUIRE(h.cols() == 1);
    const auto uav_el = secrecy::antenna_positions(s.uav_array, s.uav_start)[0];
    const auto dst_el = secrecy::antenna_positions(s.nodes[0].antennas, s.nodes[0].position)[0];
    const double r = secrecy::distance(uav_el, dst_el);
    const double phase = 2.0 * M_PI / s.radio.wavelength_m * r;
    const std::complex<double> want(std::cos(phase), std::sin(phase));
    CHECK(std::abs(h(0, 0) - want) < 1e-9);
}

TEST_CASE("los_matrix: sqrt phase model changes the phase as configured") {
    auto s = base_scenario(1, 1);
    s.uav_array = circular(1, 0.6);
    s.nodes[0].antennas = linear(1, 0.12);
    s.radio.phase_model = secrecy::PhaseModel::sqrt_distance;
    auto h = secrecy::los_matrix(s, 0, s.uav_start);
    const auto uav_el = secrecy::antenna_positions(s.uav_array, s.uav_start)[0];
    const auto dst_el = secrecy::antenna_positions(s.nodes[0].antennas, s.nodes[0].position)[0];
    const double r = secrecy::distance(uav_el, dst_el);
    const double phase = 2.0 * M_PI / s.radio.wavelength_m * std::sqrt(r);
    const std::complex<double> want(std::cos(phase), std::sin(phase));
    CHECK(std::abs(h(0, 0) - want) < 1e-9);
}

TEST_CASE("legit_eigen: SVD route reproduces the eigenvalues") {
    auto s = base_scenario(4, 4);
    auto eig = secrecy::legit_eigen(s, s.uav_start, 4);
    auto h = secrecy::los_matrix(s, 0, s.uav_start);
    const double kappa = s.nodes[0].rician_kappa;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h);
    Eigen::VectorXd sv = svd.singularValues();
    for (int i = 0; i < 4; ++i) {
        const double want = kappa * sv[i] * sv[i];
        CHECK(eig.omega_full[i] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("legit_eigen: reconstruction identity") {
    auto s = base_scenario(4, 4);
    auto eig = secrecy::legit_eigen(s, s.uav_start, 4);
    auto h = secrecy::los_matrix(s, 0, s.uav_start);
    const double kappa = s.nodes[0].rician_kappa;
    Eigen::MatrixXcd gram = kappa * (h.adjoint() * h);
    Eigen::MatrixXcd recon =
        eig.V * eig.omega_full.asDiagonal().toDenseMatrix().cast<std::complex<double>>() *
        eig.V.adjoint();
    CHECK((recon - gram).norm() / gram.norm() < 1e-9);
    // V is unitary.
    Eigen::MatrixXcd vhv = eig.V.adjoint() * eig.V;
    CHECK((vhv - Eigen::MatrixXcd::Identity(4, 4)).norm() < 1e-10);
}

TEST_CASE("legit_eigen: Rayleigh limit has empty LoS rank") {
    auto s = base_scenario(4, 4, 0.0);
    auto eig = secrecy::legit_eigen(s, s.uav_start, 4);
    CHECK(eig.q == 0);
    CHECK(eig.q_hat == 0);
    CHECK(eig.omega_hat.size() == 0);
    for (int i = 0; i < 4; ++i) CHECK(eig.omega_full[i] == 0.0);
}

TEST_CASE("legit_eigen: rank-1 geometries satisfy the trace identity") {
    // Exact rank 1: single receive antenna.
    auto s1 = base_scenario(4, 1, 3.0);
    auto e1 = secrecy::legit_eigen(s1, s1.uav_start, 1);
    CHECK(e1.q == 1);
    CHECK(e1.omega_hat[0] == doctest::Approx(3.0 * 1 * 4).epsilon(1e-12));

    // Far field: the LoS matrix approaches an outer product, so the top
    // eigenvalue absorbs the whole trace kappa*N*K.
    auto s2 = base_scenario(4, 4, 5.0);
    s2.nodes[0].position = {1e9, 0.0, 0.0};
    auto e2 = secrecy::legit_eigen(s2, s2.uav_start, 4);
    CHECK(e2.q == 1);
    CHECK(e2.omega_hat[0] == doctest::Approx(5.0 * 4 * 4).epsilon(1e-6));
}

TEST_CASE("legit_eigen: r precondition enforced") {
    auto s = base_scenario(4, 2);
    CHECK_THROWS_AS(secrecy::legit_eigen(s, s.uav_start, 3), secrecy::DomainError);
}

TEST_CASE("link_params: hand-composed values") {
    auto s = base_scenario(4, 4, 4.0);
    auto link = secrecy::link_params(s, 0, s.uav_start);
    const double gamma = s.radio.p_max * s.radio.c_p / s.radio.noise_nu;
    CHECK(link.gamma_bar == doctest::Approx(gamma / 5.0).epsilon(1e-14));
    CHECK(link.z == doctest::Approx(std::pow(500.0, 1.25)).epsilon(1e-14));
    CHECK(link.s == 4);
    CHECK(link.t == 4);
    CHECK(link.omega.size() == 4);
    CHECK(link.n_rx(4) == 4);

    // kappa = 0 leaves gamma unscaled.
    auto s0 = base_scenario(4, 4, 0.0);
    auto l0 = secrecy::link_params(s0, 0, s0.uav_start);
    CHECK(l0.gamma_bar == doctest::Approx(gamma).epsilon(1e-14));
    CHECK(l0.q == 0);

    // Doubling p_max doubles gamma_bar exactly.
    auto s2 = base_scenario(4, 4, 4.0);
    s2.radio.p_max *= 2.0;
    auto l2 = secrecy::link_params(s2, 0, s2.uav_start);
    CHECK(l2.gamma_bar == 2.0 * link.gamma_bar);

    // Eavesdropper link: N = 2, so s = 2, t = 4, N recovered by n_rx.
    auto le = secrecy::link_params(s, 1, s.uav_start);
    CHECK(le.s == 2);
    CHECK(le.t == 4);
    CHECK(le.n_rx(4) == 2);
    CHECK(le.omega.size() == 2);
    CHECK(le.los.rows() == 2);
    CHECK(le.los.cols() == 4);
}

TEST_CASE("link_params: omega agrees with an independent SVD route") {
    auto s = base_scenario(4, 2, 6.0);
    auto link = secrecy::link_params(s, 0, s.uav_start);
    auto h = secrecy::los_matrix(s, 0, s.uav_start);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h);
    Eigen::VectorXd sv = svd.singularValues();
    REQUIRE(link.omega.size() == 2);
    for (int i = 0; i < 2; ++i) {
        CHECK(link.omega[i] == doctest::Approx(6.0 * sv[i] * sv[i]).epsilon(1e-9));
    }
    // Trace identity: sum of omega = kappa * N * K.
    CHECK(link.omega.sum() == doctest::Approx(6.0 * 2 * 4).epsilon(1e-10));
}

TEST_CASE("translation isometry leaves link parameters unchanged") {
    auto s = base_scenario(4, 4, 4.0);
    const Eigen::Vector3d shift(13.0, -41.0, 7.0);
    auto moved = s;
    moved.uav_start = secrecy::Position3::from(s.uav_start.vec() + shift);
    for (auto& node : moved.nodes)
        node.position = secrecy::Position3::from(node.position.vec() + shift);

    for (int node = 0; node < 2; ++node) {
        auto a = secrecy::link_params(s, node, s.uav_start);
        auto b = secrecy::link_params(moved, node, moved.uav_start);
        CHECK(a.gamma_bar == doctest::Approx(b.gamma_bar).epsilon(1e-12));
        CHECK(a.z == doctest::Approx(b.z).epsilon(1e-12));
        CHECK(a.s == b.s);
        CHECK(a.t == b.t);
        CHECK(a.q == b.q);
        for (Eigen::Index i = 0; i < a.omega.size(); ++i) {
            if (a.omega[i] == 0.0) {
                CHECK(b.omega[i] == 0.0);
            } else {
                CHECK(a.omega[i] == doctest::Approx(b.omega[i]).epsilon(1e-12));
            }
        }
    }
}
