#include "satqkd/finite_key.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace satqkd::finite_key {

using channel::Intensity;
using channel::IntensityMix;
using channel::TallySet;
using channel::idx;

void SecurityParams::validate() const {
    if (!(eps_sec > 0.0 && eps_sec < 1.0)) {
        throw std::invalid_argument("security.eps_sec must lie in (0, 1)");
    }
    if (!(eps_corr > 0.0 && eps_corr < 1.0)) {
        throw std::invalid_argument("security.eps_corr must lie in (0, 1)");
    }
    if (!(f_ec >= 1.0)) {
        throw std::invalid_argument("security.f_ec must be >= 1");
    }
}

std::string to_string(StatisticalBound bound) {
    return bound == StatisticalBound::hoeffding ? "hoeffding" : "chernoff";
}

StatisticalBound statistical_bound_from_string(const std::string& text) {
    if (text == "hoeffding") {
        return StatisticalBound::hoeffding;
    }
    if (text == "chernoff") {
        return StatisticalBound::chernoff;
    }
    throw std::invalid_argument("security.statistical_bound must be hoeffding or chernoff");
}

int penalty_constant(DecoyProtocol protocol) {
    return protocol == DecoyProtocol::one_decoy ? 19 : 21;
}

double binary_entropy(double x) {
    if (x <= 0.0 || x >= 1.0) {
        return 0.0;
    }
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double hoeffding_delta(double n, double eps) {
    if (n <= 0.0) {
        return 0.0;
    }
    return std::sqrt(n / 2.0 * std::log(1.0 / eps));
}

double chernoff_upper_deviation(double x, double eps) {
    // Lower tail P(X <= (1 - d) E) <= exp(-d^2 E / 2), solved for E.
    const double l = std::log(1.0 / eps);
    return l + std::sqrt(2.0 * std::max(0.0, x) * l + l * l);
}

double chernoff_lower_deviation(double x, double eps) {
    // Upper tail P(X >= (1 + d) E) <= exp(-d^2 E / (2 + d)), solved for E.
    const double l = std::log(1.0 / eps);
    const double c = std::max(0.0, x);
    return std::min(c, 0.5 * (l + std::sqrt(l * l + 8.0 * c * l)));
}

double emission_tau(std::span<const double> intensities, std::span<const double> probabilities,
                    int n) {
    if (intensities.size() != probabilities.size()) {
        throw std::invalid_argument("emission_tau: one probability per intensity required");
    }
    if (n < 0) {
        throw std::invalid_argument("emission_tau: photon number must be >= 0");
    }
    double factorial = 1.0;
    for (int i = 2; i <= n; ++i) {
        factorial *= i;
    }
    double tau = 0.0;
    for (std::size_t i = 0; i < intensities.size(); ++i) {
        const double k = intensities[i];
        tau += probabilities[i] * std::exp(-k) * std::pow(k, n) / factorial;
    }
    return tau;
}

double emission_tau(const IntensityMix& mix, int n) {
    const std::array<double, 3> k{mix.mu, mix.nu, 0.0};
    const std::array<double, 3> p{mix.p_mu, mix.p_nu, mix.p_vacuum()};
    return emission_tau(k, p, n);
}

double phase_error_correction(double a, double b, double c, double d) {
    if (c <= 0.0 || d <= 0.0) {
        return 0.5;
    }
    // The expression vanishes like b log(1/b) at the edges; keep it finite.
    const double bb = std::clamp(b, 1e-300, 0.5);
    const double spread = (c + d) * (1.0 - bb) * bb / (c * d * std::numbers::ln2);
    const double arg = (c + d) / (c * d * (1.0 - bb) * bb) * (21.0 * 21.0) / (a * a);
    const double log_term = std::log2(arg);
    if (!(log_term > 0.0)) {
        return 0.0;
    }
    return std::sqrt(spread * log_term);
}

namespace {

// Observed count rescaled to the photon-number-resolved basis:
// (e^k / p_k) (count + sign * delta).
double rescaled(const IntensityMix& mix, Intensity k, double count, double delta) {
    return std::exp(mix.intensity(k)) / mix.probability(k) * (count + delta);
}

// Deviation of the count of one intensity within a basis.
struct Deviation {
    const SecurityParams& security;
    double eps;

    double up(double count, double basis_total) const {
        if (!security.fluctuations) {
            return 0.0;
        }
        return security.bound == StatisticalBound::hoeffding ? hoeffding_delta(basis_total, eps)
                                                             : chernoff_upper_deviation(count, eps);
    }
    double low(double count, double basis_total) const {
        if (!security.fluctuations) {
            return 0.0;
        }
        return security.bound == StatisticalBound::hoeffding ? hoeffding_delta(basis_total, eps)
                                                             : chernoff_lower_deviation(count, eps);
    }
};

DecoyBounds aborted(DecoyBounds b, std::string reason) {
    b.aborted = true;
    b.reason = std::move(reason);
    b.phi_z_up = 0.5;
    return b;
}

// Turns the single-photon X-basis bounds into the phase-error bound.
DecoyBounds finish_phase_error(DecoyBounds b, const SecurityParams& security) {
    if (!(b.s_z1_low > 0.0)) {
        return aborted(b, "no single-photon detections in Z can be certified");
    }
    if (!(b.s_x1_low > 0.0)) {
        return aborted(b, "no single-photon detections in X can be certified");
    }
    b.v_x1_up = std::max(0.0, b.v_x1_up);
    const double ratio = b.v_x1_up / b.s_x1_low;
    const double correction =
        security.fluctuations
            ? phase_error_correction(security.eps_sec, ratio, b.s_z1_low, b.s_x1_low)
            : 0.0;
    b.phi_z_up = ratio + correction;
    if (b.phi_z_up > 0.5) {
        return aborted(b, "phase error bound exceeds 1/2");
    }
    return b;
}

void require_positive_probabilities(const IntensityMix& mix, bool with_vacuum) {
    if (!(mix.p_mu > 0.0 && mix.p_nu > 0.0)) {
        throw std::invalid_argument("decoy bounds need p_mu > 0 and p_nu > 0");
    }
    if (with_vacuum && !(mix.vacuum && mix.p_vacuum() > 0.0)) {
        throw std::invalid_argument("two-decoy bounds need a vacuum intensity");
    }
    if (!(mix.nu > 0.0 && mix.nu < mix.mu)) {
        throw std::invalid_argument("decoy bounds need 0 < nu < mu");
    }
}

}  // namespace

DecoyBounds two_decoy_bounds(const TallySet& tallies, const IntensityMix& mix,
                             const SecurityParams& security) {
    require_positive_probabilities(mix, true);
    const double mu = mix.mu;
    const double nu = mix.nu;
    const Deviation dev{security, security.eps_sec / penalty_constant(DecoyProtocol::two_decoy)};

    DecoyBounds b;
    b.tau0 = emission_tau(mix, 0);
    b.tau1 = emission_tau(mix, 1);
    if (tallies.total_n_z() <= 0.0 || tallies.total_n_x() <= 0.0) {
        return aborted(b, "no detections");
    }
    const double scale = b.tau1 * mu / (nu * (mu - nu));
    const double nu2_mu2 = nu * nu / (mu * mu);
    constexpr auto kS = idx(Intensity::signal);
    constexpr auto kD = idx(Intensity::decoy);
    constexpr auto kV = idx(Intensity::vacuum);

    // Vacuum and single-photon contributions in a basis.
    auto single_photon = [&](const auto& n, double& s0_low, double& s0_up) {
        const double total = n[0] + n[1] + n[2];
        const double n_mu_up = rescaled(mix, Intensity::signal, n[kS], dev.up(n[kS], total));
        const double n_nu_low = rescaled(mix, Intensity::decoy, n[kD], -dev.low(n[kD], total));
        const double n_0_low = rescaled(mix, Intensity::vacuum, n[kV], -dev.low(n[kV], total));
        const double n_0_up = rescaled(mix, Intensity::vacuum, n[kV], dev.up(n[kV], total));
        s0_low = std::max(0.0, b.tau0 * n_0_low);
        s0_up = b.tau0 * n_0_up;
        return scale * (n_nu_low - n_0_up - nu2_mu2 * (n_mu_up - s0_low / b.tau0));
    };

    double s_x0_low = 0.0;
    b.s_z1_low = single_photon(tallies.n_z, b.s_z0_low, b.s_z0_up);
    b.s_x1_low = single_photon(tallies.n_x, s_x0_low, b.s_x0_up);

    const auto& m = tallies.m_x;
    const double m_total = tallies.total_m_x();
    const double m_nu_up = rescaled(mix, Intensity::decoy, m[kD], dev.up(m[kD], m_total));
    const double m_0_low = rescaled(mix, Intensity::vacuum, m[kV], -dev.low(m[kV], m_total));
    b.v_x1_up = b.tau1 * (m_nu_up - m_0_low) / nu;
    return finish_phase_error(b, security);
}

DecoyBounds one_decoy_bounds(const TallySet& tallies, const IntensityMix& mix,
                             const SecurityParams& security) {
    require_positive_probabilities(mix, false);
    if (mix.vacuum && mix.p_vacuum() > 1e-12) {
        throw std::invalid_argument("one-decoy bounds expect exactly two intensities");
    }
    const double mu = mix.mu;
    const double nu = mix.nu;
    const Deviation dev{security, security.eps_sec / penalty_constant(DecoyProtocol::one_decoy)};

    DecoyBounds b;
    b.tau0 = emission_tau(mix, 0);
    b.tau1 = emission_tau(mix, 1);
    if (tallies.total_n_z() <= 0.0 || tallies.total_n_x() <= 0.0) {
        return aborted(b, "no detections");
    }
    const double scale = b.tau1 * mu / (nu * (mu - nu));
    const double nu2_mu2 = nu * nu / (mu * mu);
    constexpr auto kS = idx(Intensity::signal);
    constexpr auto kD = idx(Intensity::decoy);

    // Every error is attributed to vacuum, which errs half the time; the weak
    // decoy carries the largest vacuum share.
    auto vacuum_upper = [&](const auto& m, double n_total) {
        const double m_total = m[0] + m[1] + m[2];
        const double vacuum_errors =
            b.tau0 * rescaled(mix, Intensity::decoy, m[kD], dev.up(m[kD], m_total));
        const double spread = security.fluctuations ? hoeffding_delta(n_total, dev.eps) : 0.0;
        return 2.0 * (vacuum_errors + spread);
    };

    auto bounds_in_basis = [&](const auto& n, const auto& m, double& s0_low, double& s0_up) {
        const double total = n[0] + n[1] + n[2];
        s0_up = vacuum_upper(m, total);
        const double n_mu_up = rescaled(mix, Intensity::signal, n[kS], dev.up(n[kS], total));
        const double n_nu_low = rescaled(mix, Intensity::decoy, n[kD], -dev.low(n[kD], total));
        s0_low = std::max(0.0, b.tau0 * (mu * n_nu_low - nu * n_mu_up) / (mu - nu));
        return scale * (n_nu_low - nu2_mu2 * n_mu_up -
                        (mu * mu - nu * nu) / (mu * mu) * s0_up / b.tau0);
    };

    double s_x0_low = 0.0;
    b.s_z1_low = bounds_in_basis(tallies.n_z, tallies.m_z, b.s_z0_low, b.s_z0_up);
    b.s_x1_low = bounds_in_basis(tallies.n_x, tallies.m_x, s_x0_low, b.s_x0_up);

    const auto& m = tallies.m_x;
    const double m_total = tallies.total_m_x();
    const double m_mu_up = rescaled(mix, Intensity::signal, m[kS], dev.up(m[kS], m_total));
    const double m_nu_low = rescaled(mix, Intensity::decoy, m[kD], -dev.low(m[kD], m_total));
    b.v_x1_up = b.tau1 * (m_mu_up - m_nu_low) / (mu - nu);
    return finish_phase_error(b, security);
}

DecoyBounds decoy_bounds(const TallySet& tallies, const IntensityMix& mix,
                         const SecurityParams& security, DecoyProtocol protocol) {
    return protocol == DecoyProtocol::one_decoy ? one_decoy_bounds(tallies, mix, security)
                                                : two_decoy_bounds(tallies, mix, security);
}

SklResult secure_key_length(const DecoyBounds& bounds, const TallySet& tallies,
                            const SecurityParams& security, DecoyProtocol protocol) {
    SklResult r;
    auto& d = r.diagnostics;
    d.n_z = tallies.total_n_z();
    d.q_z = d.n_z > 0.0 ? tallies.total_m_z() / d.n_z : 0.0;
    d.s_z0 = bounds.s_z0_low;
    d.s_z1 = bounds.s_z1_low;
    d.phi = bounds.phi_z_up;
    d.h_phi = binary_entropy(std::min(bounds.phi_z_up, 0.5));
    if (security.fluctuations) {
        d.sec_penalty_bits = 6.0 * std::log2(penalty_constant(protocol) / security.eps_sec);
        d.corr_penalty_bits = std::log2(2.0 / security.eps_corr);
    }
    r.lambda_ec_bits = security.f_ec * d.n_z * binary_entropy(std::min(d.q_z, 0.5));

    if (bounds.aborted) {
        r.aborted = true;
        r.reason = bounds.reason;
        return r;
    }
    const double ell = d.s_z0 + d.s_z1 * (1.0 - d.h_phi) - r.lambda_ec_bits -
                       d.sec_penalty_bits - d.corr_penalty_bits;
    if (!(ell > 0.0)) {
        r.aborted = true;
        r.reason = "key length is not positive";
        return r;
    }
    r.skl_real = ell;
    r.skl_bits = std::floor(ell);
    return r;
}

SklResult evaluate(const TallySet& tallies, const IntensityMix& mix,
                   const SecurityParams& security, DecoyProtocol protocol) {
    return secure_key_length(decoy_bounds(tallies, mix, security, protocol), tallies, security,
                             protocol);
}

double asymptotic_skr(double eta, const channel::SourceSpec& source,
                      const channel::DetectorSpec& detector, const SecurityParams& security) {
    const double eta_total = eta * detector.efficiency;
    const double y0 = channel::background_yield(detector, source.pulse_rate_hz);
    const double dead = channel::sample_dead_time_factor(eta_total, y0, source, detector);
    const double p_zz = source.p_z_alice * source.p_z_bob;
    const auto& mix = source.mix;

    const double y1 = 1.0 - (1.0 - y0) * (1.0 - eta_total);
    if (!(y1 > 0.0)) {
        return 0.0;
    }
    const double phase_error = (0.5 * y0 + source.misalignment_x * eta_total) / y1;
    const double s0 = p_zz * emission_tau(mix, 0) * y0 * dead;
    const double s1 = p_zz * emission_tau(mix, 1) * y1 * dead;

    // Error correction sees the Z-basis sifted key as one block.
    double detected = 0.0;
    double errors = 0.0;
    for (Intensity k : {Intensity::signal, Intensity::decoy, Intensity::vacuum}) {
        const double p = mix.probability(k);
        const double mean = mix.intensity(k);
        detected += p * channel::pulse_gain(mean, eta_total, y0);
        errors += p * (0.5 * y0 - source.misalignment_z * std::expm1(-mean * eta_total));
    }
    const double q_z = detected > 0.0 ? errors / detected : 0.0;
    const double leaked =
        p_zz * detected * dead * security.f_ec * binary_entropy(std::min(q_z, 0.5));
    const double h_phase = binary_entropy(std::min(phase_error, 0.5));
    return std::max(0.0, s0 + s1 * (1.0 - h_phase) - leaked);
}

}  // namespace satqkd::finite_key
