// Finite-key secure key length for decoy-state BB84 with one decoy
// (signal + weak decoy) or two decoys (signal + weak decoy + vacuum).
//
// Observed tallies are turned into bounds on the vacuum and single-photon
// detections of the key basis and on the single-photon phase error via
// Hoeffding-corrected decoy estimators. Those bounds feed
//
//   l = s0 + s1 (1 - h(phi)) - lambda_EC - 6 log2(b / eps_sec) - log2(2 / eps_corr)
//
// with b = 19 (one decoy) or b = 21 (two decoys).
#pragma once

#include <span>
#include <string>

#include "satqkd/photon_channel.hpp"

namespace satqkd::finite_key {

/// Concentration inequality relating observed counts to their expectation.
/// Hoeffding applies one deviation, set by the basis total, to every
/// intensity; Chernoff scales with each individual count.
enum class StatisticalBound { hoeffding, chernoff };

std::string to_string(StatisticalBound bound);
StatisticalBound statistical_bound_from_string(const std::string& text);

struct SecurityParams {
    double eps_sec = 1e-9;
    double eps_corr = 1e-15;
    double f_ec = 1.16;
    /// When false, statistical deviations, the phase-error transfer term and
    /// the log penalty terms are all dropped (infinite-block surrogate).
    bool fluctuations = true;
    StatisticalBound bound = StatisticalBound::hoeffding;

    void validate() const;
};

enum class DecoyProtocol { one_decoy = 1, two_decoy = 2 };

/// The b constant of the composable penalty term.
int penalty_constant(DecoyProtocol protocol);

struct DecoyBounds {
    double tau0 = 0.0;
    double tau1 = 0.0;
    double s_z0_low = 0.0;
    double s_z0_up = 0.0;
    double s_z1_low = 0.0;
    double s_x0_up = 0.0;
    double s_x1_low = 0.0;
    double v_x1_up = 0.0;
    /// Upper bound on the single-photon phase error, in [0, 1/2] when valid.
    double phi_z_up = 0.5;
    bool aborted = false;
    std::string reason;
};

struct SklDiagnostics {
    double n_z = 0.0;
    double q_z = 0.0;
    double s_z0 = 0.0;
    double s_z1 = 0.0;
    double phi = 0.0;
    double h_phi = 0.0;
    double sec_penalty_bits = 0.0;
    double corr_penalty_bits = 0.0;
};

struct SklResult {
    double skl_bits = 0.0;  ///< floor of skl_real, zero when aborted
    double skl_real = 0.0;  ///< unfloored, clamped at zero
    double lambda_ec_bits = 0.0;
    bool aborted = false;
    std::string reason;
    SklDiagnostics diagnostics;
};

double binary_entropy(double x);

/// Hoeffding deviation sqrt(n/2 * ln(1/eps)).
double hoeffding_delta(double n, double eps);

/// Multiplicative Chernoff deviations for an observed count x: the
/// expectation lies in [x - lower, x + upper] except with probability eps
/// per side.
double chernoff_upper_deviation(double x, double eps);
double chernoff_lower_deviation(double x, double eps);
/// Probability that a pulse drawn from the Poisson mixture carries n photons.
double emission_tau(std::span<const double> intensities, std::span<const double> probabilities,
                    int n);
double emission_tau(const channel::IntensityMix& mix, int n);

/// Random-sampling correction from X-basis to Z-basis phase error:
/// a = eps_sec, b = observed single-photon X error rate, c = s_z1, d = s_x1.
double phase_error_correction(double a, double b, double c, double d);

DecoyBounds two_decoy_bounds(const channel::TallySet& tallies, const channel::IntensityMix& mix,
                             const SecurityParams& security);
DecoyBounds one_decoy_bounds(const channel::TallySet& tallies, const channel::IntensityMix& mix,
                             const SecurityParams& security);
DecoyBounds decoy_bounds(const channel::TallySet& tallies, const channel::IntensityMix& mix,
                         const SecurityParams& security, DecoyProtocol protocol);

SklResult secure_key_length(const DecoyBounds& bounds, const channel::TallySet& tallies,
                            const SecurityParams& security, DecoyProtocol protocol);

/// Bounds followed by the key length.
SklResult evaluate(const channel::TallySet& tallies, const channel::IntensityMix& mix,
                   const SecurityParams& security, DecoyProtocol protocol);

/// Infinite-block key rate per emitted pulse at link transmission `eta`
/// (detector efficiency applied internally): exact Poisson yields replace
/// the decoy bounds, only error correction is charged.
double asymptotic_skr(double eta, const channel::SourceSpec& source,
                      const channel::DetectorSpec& detector, const SecurityParams& security);

}  // namespace satqkd::finite_key
