#include "secrecy/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "secrecy/errors.hpp"
#include "secrecy/specfun.hpp"

namespace secrecy {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Domain-separated stream id for nested estimators (one per outer draw).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x517cc1b727220a95ULL));
}

void require_samples(const MCConfig& mc) {
    if (mc.samples < 1000) throw DomainError("sample count below the reporting minimum of 1000");
    if (mc.chunk_size < 1) throw DomainError("chunk size must be positive");
}

/// Runs fn(chunk_index, count) over ceil(total/chunk_size) chunks on the
/// worker pool, storing results by chunk index so the later fold is ordered.
template <typename Partial, typename Fn>
std::vector<Partial> run_chunks(std::int64_t total, std::int64_t chunk_size, Fn&& fn) {
    const std::int64_t n_chunks = (total + chunk_size - 1) / chunk_size;
    std::vector<Partial> parts(static_cast<std::size_t>(n_chunks));
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&] {
        try {
            for (;;) {
                const std::int64_t c = next.fetch_add(1);
                if (c >= n_chunks) return;
                const std::int64_t count = std::min(chunk_size, total - c * chunk_size);
                parts[static_cast<std::size_t>(c)] = fn(c, count);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    const int threads = static_cast<int>(
        std::min<std::int64_t>(worker_thread_count(), n_chunks));
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return parts;
}

struct MomentPartial {
    double sum = 0.0;
    double sum2 = 0.0;
    std::int64_t n = 0;
};

MCSummary summarize(const std::vector<MomentPartial>& parts) {
    double sum = 0.0, sum2 = 0.0;
    std::int64_t n = 0;
    for (const auto& p : parts) {  // fixed chunk order
        sum += p.sum;
        sum2 += p.sum2;
        n += p.n;
    }
    MCSummary out;
    out.samples_used = n;
    out.mean = sum / static_cast<double>(n);
    const double ss = std::max(0.0, sum2 - static_cast<double>(n) * out.mean * out.mean);
    const double sd = (n > 1) ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    out.standard_error = sd / std::sqrt(static_cast<double>(n));
    return out;
}

// log det of the Hermitian positive-definite matrix I + c * B^H B.
double logdet_gram(const Eigen::MatrixXcd& b, double c) {
    const Eigen::Index r = b.cols();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(r, r) + c * (b.adjoint() * b);
    Eigen::LLT<Eigen::MatrixXcd> llt(m);
    double ld = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) ld += std::log(std::real(llt.matrixL()(i, i)));
    return 2.0 * ld;
}

// Active columns of the precoder scaled by the square roots of the powers.
Eigen::MatrixXcd scaled_active_columns(const Eigen::MatrixXcd& v, const PowerAllocation& psi) {
    const std::vector<int> idx = psi.active_indices();
    Eigen::MatrixXcd out(v.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t p = 0; p < idx.size(); ++p)
        out.col(static_cast<Eigen::Index>(p)) = v.col(idx[p]) * std::sqrt(psi.psi[idx[p]]);
    return out;
}

// Transmit eigenbasis of a link's LoS Gram matrix, strongest mode first.
Eigen::MatrixXcd los_eigenbasis(const LinkParams& link) {
    const Eigen::MatrixXcd gram = link.los.adjoint() * link.los;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    return es.eigenvectors().rowwise().reverse();
}

}  // namespace

ChunkRng::ChunkRng(std::uint64_t seed, std::uint64_t chunk_index)
    : gen_(splitmix64(splitmix64(seed) ^ (0x9e3779b97f4a7c15ULL * (chunk_index + 1)))) {}

double ChunkRng::uniform() {
    // 53-bit mantissa draw mapped to (0, 1].
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
}

double ChunkRng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

std::complex<double> ChunkRng::cgaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
}

int worker_thread_count() {
    if (const char* env = std::getenv("SECRECY_PLANNER_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

Eigen::MatrixXcd sample_rician(const LinkParams& link, ChunkRng& rng) {
    const Eigen::Index n = link.los.rows();
    const Eigen::Index k = link.los.cols();
    const double c_los = std::sqrt(link.kappa / (link.kappa + 1.0));
    const double c_scatter = std::sqrt(1.0 / (link.kappa + 1.0));
    Eigen::MatrixXcd h(n, k);
    for (Eigen::Index c = 0; c < k; ++c)  // fixed column-major draw order
        for (Eigen::Index r = 0; r < n; ++r)
            h(r, c) = c_los * link.los(r, c) + c_scatter * rng.cgaussian();
    return h;
}

Eigen::MatrixXcd sample_haar(int K, ChunkRng& rng) {
    if (K < 1) throw DomainError("unitary dimension must be at least 1");
    Eigen::MatrixXcd a(K, K);
    for (int c = 0; c < K; ++c)
        for (int r = 0; r < K; ++r) a(r, c) = rng.cgaussian();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(K, K);
    const Eigen::MatrixXcd r_fac = qr.matrixQR().triangularView<Eigen::Upper>();
    // Multiplying by the diagonal phases of R makes the distribution uniform
    // over the unitary group; plain QR is biased by the factorization's phase
    // convention.
    for (int j = 0; j < K; ++j) {
        const std::complex<double> d = r_fac(j, j);
        const double mag = std::abs(d);
        q.col(j) *= (mag > 0.0) ? d / mag : std::complex<double>(1.0, 0.0);
    }
    return q;
}

MCSummary mc_rate_true(const PowerAllocation& psi, const Eigen::MatrixXcd& V,
                       const LinkParams& link, const MCConfig& mc) {
    require_samples(mc);
    if (V.rows() != psi.psi.size())
        throw DomainError("precoder row count must match the power vector length");
    if (psi.r == 0) {
        MCSummary out;
        out.samples_used = mc.samples;
        return out;
    }
    const Eigen::MatrixXcd va = scaled_active_columns(V, psi);
    const double amp = std::sqrt(link.kappa + 1.0);
    const double gboz = link.gamma_bar / link.z;

    auto parts = run_chunks<MomentPartial>(
        mc.samples, mc.chunk_size, [&](std::int64_t chunk, std::int64_t count) {
            ChunkRng rng(mc.seed, static_cast<std::uint64_t>(chunk));
            MomentPartial p;
            for (std::int64_t i = 0; i < count; ++i) {
                const Eigen::MatrixXcd b = amp * sample_rician(link, rng) * va;
                const double ld = logdet_gram(b, gboz);
                p.sum += ld;
                p.sum2 += ld * ld;
            }
            p.n = count;
            return p;
        });
    return summarize(parts);
}

namespace {

// Scaled linear-domain accumulator for determinant averages: sums of
// exp(k * (logdet - offset)) for k = 1..4 with offset = chunk max, so every
// addend is <= 1 and the fourth moment cannot overflow.
struct DetPartial {
    double offset = 0.0;
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    std::int64_t n = 0;
};

DetPartial make_det_partial(const std::vector<double>& logdets) {
    DetPartial p;
    p.n = static_cast<std::int64_t>(logdets.size());
    if (logdets.empty()) return p;
    p.offset = *std::max_element(logdets.begin(), logdets.end());
    for (const double ld : logdets) {
        const double e = std::exp(ld - p.offset);
        const double e2 = e * e;
        p.s1 += e;
        p.s2 += e2;
        p.s3 += e2 * e;
        p.s4 += e2 * e2;
    }
    return p;
}

DetPartial fold_det(const DetPartial& a, const DetPartial& b) {
    if (a.n == 0) return b;
    if (b.n == 0) return a;
    DetPartial out;
    out.offset = std::max(a.offset, b.offset);
    const double fa = std::exp(a.offset - out.offset);
    const double fb = std::exp(b.offset - out.offset);
    out.s1 = a.s1 * fa + b.s1 * fb;
    out.s2 = a.s2 * (fa * fa) + b.s2 * (fb * fb);
    out.s3 = a.s3 * (fa * fa * fa) + b.s3 * (fb * fb * fb);
    out.s4 = a.s4 * (fa * fa * fa * fa) + b.s4 * (fb * fb * fb * fb);
    out.n = a.n + b.n;
    return out;
}

}  // namespace

MCSummary mc_rate_hmi(const PowerAllocation& psi, const LinkParams& link, const MCConfig& mc) {
    require_samples(mc);
    const int k_antennas = static_cast<int>(psi.psi.size());
    if (link.los.cols() != k_antennas)
        throw DomainError("power vector length must match the transmit antenna count");
    if (psi.r == 0) {
        MCSummary out;
        out.samples_used = mc.samples;
        return out;
    }
    const double amp = std::sqrt(link.kappa + 1.0);
    const double gboz = link.gamma_bar / link.z;

    auto parts = run_chunks<DetPartial>(
        mc.samples, mc.chunk_size, [&](std::int64_t chunk, std::int64_t count) {
            ChunkRng rng(mc.seed, static_cast<std::uint64_t>(chunk));
            std::vector<double> logdets;
            logdets.reserve(static_cast<std::size_t>(count));
            for (std::int64_t i = 0; i < count; ++i) {
                const Eigen::MatrixXcd x = amp * sample_rician(link, rng);
                const Eigen::MatrixXcd t = sample_haar(k_antennas, rng);
                const Eigen::MatrixXcd b = x * scaled_active_columns(t, psi);
                logdets.push_back(logdet_gram(b, gboz));
            }
            return make_det_partial(logdets);
        });

    DetPartial total;
    for (const auto& p : parts) total = fold_det(total, p);  // fixed chunk order

    const double n = static_cast<double>(total.n);
    const double m1 = total.s1 / n;
    const double m2 = total.s2 / n;
    const double m3 = total.s3 / n;
    const double m4 = total.s4 / n;

    MCSummary out;
    out.samples_used = total.n;
    out.mean = total.offset + std::log(m1);
    const double ss = std::max(0.0, total.s2 - n * m1 * m1);
    const double sd = (total.n > 1) ? std::sqrt(ss / (n - 1.0)) : 0.0;
    // Delta method: se(log mean) = se(mean) / mean; the offset cancels.
    out.standard_error = sd / (std::sqrt(n) * m1);

    const double c2 = m2 - m1 * m1;
    const double c4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1 * m1 * m1 * m1;
    out.heavy_tail_warning = (c2 > 0.0) && (c4 / (c2 * c2) > 1e3);
    return out;
}

MCSummary mc_inner_logdet_G(const Eigen::VectorXd& psi_active, const Eigen::VectorXd& omega_hat,
                            int r, int t, const MCConfig& mc) {
    require_samples(mc);
    const int q_hat = static_cast<int>(omega_hat.size());
    if (r < 1 || t < r || q_hat > r)
        throw DomainError("need q_hat <= r <= t for the equivalent-channel draw");
    if (psi_active.size() != r) throw DomainError("psi_active must have r entries");
    double sum_log_psi = 0.0;
    for (int i = 0; i < r; ++i) {
        if (psi_active[i] <= 0.0) throw DomainError("active powers must be positive");
        sum_log_psi += std::log(psi_active[i]);
    }

    auto parts = run_chunks<MomentPartial>(
        mc.samples, mc.chunk_size, [&](std::int64_t chunk, std::int64_t count) {
            ChunkRng rng(mc.seed, static_cast<std::uint64_t>(chunk));
            MomentPartial p;
            Eigen::MatrixXcd a(t, r);
            for (std::int64_t i = 0; i < count; ++i) {
                for (int c = 0; c < r; ++c)
                    for (int row = 0; row < t; ++row) a(row, c) = rng.cgaussian();
                for (int j = 0; j < q_hat; ++j) a(j, j) += std::sqrt(omega_hat[j]);
                Eigen::MatrixXcd g = a.adjoint() * a;
                Eigen::LLT<Eigen::MatrixXcd> llt(g);
                double ld = 0.0;
                for (int d = 0; d < r; ++d) ld += std::log(std::real(llt.matrixL()(d, d)));
                const double value = sum_log_psi + 2.0 * ld;
                p.sum += value;
                p.sum2 += value * value;
            }
            p.n = count;
            return p;
        });
    return summarize(parts);
}

EcdfStudy ecdf_relative_errors(const Scenario& scenario, const Position3& p_u,
                               int psi_draws, const MCConfig& mc, const std::string& config_id) {
    if (psi_draws < 1) throw DomainError("need at least one power draw");
    require_samples(mc);
    const LinkParams link0 = link_params(scenario, 0, p_u);
    int eve_index = -1;
    for (int i = 1; i < static_cast<int>(scenario.nodes.size()); ++i)
        if (scenario.nodes[i].role == NodeRole::eavesdropper) {
            eve_index = i;
            break;
        }
    if (eve_index < 0)
        throw DomainError("the relative-error study needs an eavesdropper node");
    const LinkParams link_e = link_params(scenario, eve_index, p_u);
    const int k_antennas = static_cast<int>(link0.los.cols());
    const int n0 = static_cast<int>(link0.los.rows());
    const int r_max = std::min(n0, k_antennas);
    const Eigen::MatrixXcd v = los_eigenbasis(link0);

    // Pilot runs at a uniform allocation size the per-draw sample counts so
    // the sampled-rate noise stays near 1e-3 relative, within the caller's
    // budget, separately for each side of the pair.
    auto pilot_count = [&](const LinkParams& link, std::uint64_t tag) {
        Eigen::VectorXd uniform = Eigen::VectorXd::Zero(k_antennas);
        for (int i = 0; i < r_max; ++i) uniform[i] = 1.0 / r_max;
        MCConfig pilot;
        pilot.samples = std::max<std::int64_t>(1024, mc.samples / 8);
        pilot.seed = mix_seed(mc.seed, tag);
        pilot.chunk_size = mc.chunk_size;
        const MCSummary probe = mc_rate_true(make_power_allocation(uniform), v, link, pilot);
        const double sd = probe.standard_error * std::sqrt(static_cast<double>(pilot.samples));
        const double target_se = std::max(1e-3 * std::abs(probe.mean) / 3.0, 1e-6);
        const double wanted = (sd / target_se) * (sd / target_se);
        return std::clamp<std::int64_t>(static_cast<std::int64_t>(wanted),
                                        std::max<std::int64_t>(1000, mc.samples / 4),
                                        mc.samples);
    };
    const std::int64_t inner0 = pilot_count(link0, 0xB11071ULL);
    const std::int64_t inner_e = pilot_count(link_e, 0xB11072ULL);

    // Power draws: activation count follows the LoS spectrum (a uniform level
    // selects how many modes clear it), powers are uniform on the simplex over
    // the strongest modes.
    ChunkRng draw_rng(mc.seed, 0xECDFULL);
    std::vector<double> rl_errors, ru_errors;
    rl_errors.reserve(psi_draws);
    ru_errors.reserve(psi_draws);
    int below = 0;

    for (int d = 0; d < psi_draws; ++d) {
        const double level = draw_rng.uniform();
        int r = 0;
        if (link0.q > 0) {
            for (int k = 0; k < link0.q; ++k)
                if (link0.omega[k] >= level * link0.omega[0]) ++r;
        } else {
            r = 1 + static_cast<int>(level * r_max);
        }
        r = std::clamp(r, 1, r_max);

        Eigen::VectorXd psi = Eigen::VectorXd::Zero(k_antennas);
        double total = 0.0;
        for (int i = 0; i < r; ++i) {
            psi[i] = -std::log(draw_rng.uniform());
            total += psi[i];
        }
        psi.head(r) /= total;
        const PowerAllocation alloc = make_power_allocation(psi);

        MCConfig inner;
        inner.samples = inner0;
        inner.seed = mix_seed(mc.seed, 2 * static_cast<std::uint64_t>(d) + 2);
        inner.chunk_size = mc.chunk_size;
        const MCSummary truth0 = mc_rate_true(alloc, v, link0, inner);

        inner.samples = inner_e;
        inner.seed = mix_seed(mc.seed, 2 * static_cast<std::uint64_t>(d) + 3);
        const MCSummary truth_e = mc_rate_true(alloc, v, link_e, inner);

        const double denom0 = std::max(std::abs(truth0.mean), 1e-12);
        const double denom_e = std::max(std::abs(truth_e.mean), 1e-12);
        const double rl = rate_legit_lower_nats(alloc, link0);
        const double ru = rate_eav_hmi_nats(alloc, link_e);
        rl_errors.push_back((rl - truth0.mean) / denom0);
        ru_errors.push_back((ru - truth_e.mean) / denom_e);
        if (rl <= truth0.mean + 3.0 * truth0.standard_error) ++below;
    }

    auto median_abs = [](std::vector<double> v) {
        for (auto& x : v) x = std::abs(x);
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + mid, v.end());
        return v[mid];
    };

    EcdfStudy study;
    study.median_abs_rl = median_abs(rl_errors);
    study.median_abs_ru = median_abs(ru_errors);
    study.rl_below_fraction = static_cast<double>(below) / psi_draws;

    std::sort(rl_errors.begin(), rl_errors.end());
    std::sort(ru_errors.begin(), ru_errors.end());
    study.rows.reserve(2 * static_cast<std::size_t>(psi_draws));
    for (int i = 0; i < psi_draws; ++i)
        study.rows.push_back({config_id + ":RL", rl_errors[static_cast<std::size_t>(i)],
                              static_cast<double>(i + 1) / psi_draws});
    for (int i = 0; i < psi_draws; ++i)
        study.rows.push_back({config_id + ":RU", ru_errors[static_cast<std::size_t>(i)],
                              static_cast<double>(i + 1) / psi_draws});
    return study;
}

namespace {

struct SecrecyPartial {
    std::vector<double> clamped_bits;
    double sum_bits = 0.0;
    std::int64_t outage = 0;
};

}  // namespace

SecrecyEcdf mc_instant_secrecy_ecdf(const PowerAllocation& psi, const Position3& p_u,
                                    const Scenario& scenario, const MCConfig& mc) {
    require_samples(mc);
    if (psi.r == 0) throw DomainError("instantaneous secrecy needs an active allocation");
    const LinkParams link0 = link_params(scenario, 0, p_u);
    const Eigen::MatrixXcd v = los_eigenbasis(link0);

    std::vector<LinkParams> eves;
    for (int i = 1; i < static_cast<int>(scenario.nodes.size()); ++i)
        if (scenario.nodes[i].role == NodeRole::eavesdropper)
            eves.push_back(link_params(scenario, i, p_u));

    auto parts = run_chunks<SecrecyPartial>(
        mc.samples, mc.chunk_size, [&](std::int64_t chunk, std::int64_t count) {
            ChunkRng rng(mc.seed, static_cast<std::uint64_t>(chunk));
            SecrecyPartial p;
            p.clamped_bits.reserve(static_cast<std::size_t>(count));
            const Eigen::MatrixXcd va0 = scaled_active_columns(v, psi);
            for (std::int64_t i = 0; i < count; ++i) {
                const double amp0 = std::sqrt(link0.kappa + 1.0);
                const Eigen::MatrixXcd b0 = amp0 * sample_rician(link0, rng) * va0;
                const double ld0 = logdet_gram(b0, link0.gamma_bar / link0.z);
                double worst = 0.0;
                for (const auto& le : eves) {
                    const double amp = std::sqrt(le.kappa + 1.0);
                    const Eigen::MatrixXcd be = amp * sample_rician(le, rng) * va0;
                    worst = std::max(worst, logdet_gram(be, le.gamma_bar / le.z));
                }
                const double raw_bits = (ld0 - worst) * kNatsToBits;
                const double clamped = std::max(0.0, raw_bits);
                p.clamped_bits.push_back(clamped);
                p.sum_bits += clamped;
                if (raw_bits <= 0.0) ++p.outage;
            }
            return p;
        });

    SecrecyEcdf out;
    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(mc.samples));
    double sum = 0.0;
    std::int64_t outage = 0;
    for (const auto& p : parts) {  // fixed chunk order
        all.insert(all.end(), p.clamped_bits.begin(), p.clamped_bits.end());
        sum += p.sum_bits;
        outage += p.outage;
    }
    std::sort(all.begin(), all.end());
    const double n = static_cast<double>(all.size());
    out.rows.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        out.rows.push_back({"instant_secrecy", all[i], static_cast<double>(i + 1) / n});
    out.outage_fraction = static_cast<double>(outage) / n;
    out.mean_bits = sum / n;
    return out;
}

}  // namespace secrecy
