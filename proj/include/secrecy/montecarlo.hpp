// Randomized oracles: channel sampling, ergodic-rate estimation,
// Haar-averaged determinant estimation, and ECDF studies.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "secrecy/geometry.hpp"
#include "secrecy/rates.hpp"

namespace secrecy {

struct MCConfig {
    std::int64_t samples = 100000;
    std::uint64_t seed = 0;
    std::int64_t chunk_size = 8192;
};

struct MCSummary {
    double mean = 0.0;
    double standard_error = 0.0;
    std::int64_t samples_used = 0;
    bool heavy_tail_warning = false;  // kurtosis of the averaged quantity > 1e3
};

/// Deterministic per-chunk generator: splitmix64 of (seed, chunk index) feeds
/// a mt19937_64; Gaussians come from an explicit Box-Muller transform so the
/// stream is implementation-independent.
class ChunkRng {
public:
    ChunkRng(std::uint64_t seed, std::uint64_t chunk_index);
    double uniform();          // (0, 1]
    double gaussian();         // standard normal
    std::complex<double> cgaussian();  // CN(0, 1)

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Number of Monte Carlo worker threads: SECRECY_PLANNER_THREADS if set,
/// otherwise the hardware concurrency (at least 1). Results never depend on it.
int worker_thread_count();

/// Rician channel draw H = sqrt(kappa/(kappa+1)) Hd + sqrt(1/(kappa+1)) Hs
/// using the link's LoS matrix and Rician factor.
Eigen::MatrixXcd sample_rician(const LinkParams& link, ChunkRng& rng);

/// Haar-distributed K x K unitary: QR of a complex Gaussian draw with the
/// phase-of-diagonal correction.
Eigen::MatrixXcd sample_haar(int K, ChunkRng& rng);

/// Ergodic rate E{ log|I + (gamma_bar/z) H V Psi V^H H^H| } (natural log)
/// with the fixed precoder V, over Rician draws of the link's channel.
MCSummary mc_rate_true(const PowerAllocation& psi, const Eigen::MatrixXcd& V,
                       const LinkParams& link, const MCConfig& mc);

/// log E{ |I + (gamma_bar/z) X^H X T Psi T^H| } over joint Rician/Haar draws
/// (natural log). Means of determinants are accumulated in per-chunk scaled
/// form and combined in fixed chunk order; the standard error is the
/// delta-method error of the log.
MCSummary mc_rate_hmi(const PowerAllocation& psi, const LinkParams& link, const MCConfig& mc);

/// E{ sum(ln psi) + ln det (Om^1/2 + H)^H (Om^1/2 + H) } with H a t x r
/// standard complex Gaussian matrix and Om^1/2 the embedded sqrt(omega_hat):
/// the Monte Carlo certificate for the closed-form energy interior.
MCSummary mc_inner_logdet_G(const Eigen::VectorXd& psi_active, const Eigen::VectorXd& omega_hat,
                            int r, int t, const MCConfig& mc);

/// One ECDF row: a config label, an observed value, and its cumulative mass.
struct EcdfRow {
    std::string config_id;
    double error_value = 0.0;
    double cumulative_probability = 0.0;
};

/// Relative-error study of both closed forms on one link pair: draws
/// `psi_draws` random allocations and estimates the sampled true rate per draw
/// (inner sample count chosen from a pilot variance estimate). The lower
/// bound is scored against the destination rate (config suffix ":RL"); the
/// determinant-average approximation is scored against the first
/// eavesdropper's rate under the same destination-aligned precoder (suffix
/// ":RU"), which is the regime it is designed for — against the aligned
/// destination rate it overestimates badly and is not reported here.
struct EcdfStudy {
    std::vector<EcdfRow> rows;
    double median_abs_rl = 0.0;
    double median_abs_ru = 0.0;
    /// Fraction of draws where the lower bound stays below the sampled true
    /// rate plus 3 standard errors.
    double rl_below_fraction = 0.0;
};

EcdfStudy ecdf_relative_errors(const Scenario& scenario, const Position3& p_u,
                               int psi_draws, const MCConfig& mc, const std::string& config_id);

/// Instantaneous secrecy-rate ECDF under random fading at a fixed operating
/// point; values in bits. Outage mass is the fraction of draws whose raw
/// (unclamped) secrecy rate is <= 0.
struct SecrecyEcdf {
    std::vector<EcdfRow> rows;  // clamped instantaneous secrecy rate, bits
    double outage_fraction = 0.0;
    double mean_bits = 0.0;
};

SecrecyEcdf mc_instant_secrecy_ecdf(const PowerAllocation& psi, const Position3& p_u,
                                    const Scenario& scenario, const MCConfig& mc);

}  // namespace secrecy
