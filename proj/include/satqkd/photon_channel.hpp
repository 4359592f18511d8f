// Weak-coherent-pulse detection model: per-intensity gains and error rates,
// pass-integrated expected tallies, and a seeded Monte Carlo sampler that
// tags every detection with the true photon number.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "satqkd/link_budget.hpp"
#include "satqkd/orbit.hpp"

namespace satqkd::channel {

struct DetectorSpec {
    double efficiency = 0.9;
    double dark_count_rate_hz = 90.0;
    double dead_time_ns = 30.0;
    double timing_jitter_ps = 30.0;
    double background_rate_hz = 8.0;
    int n_detectors = 2;
    double gate_width_ns = 1.0;

    void validate() const;
};

enum class Intensity : std::size_t { signal = 0, decoy = 1, vacuum = 2 };
inline constexpr std::size_t kIntensityCount = 3;

constexpr std::size_t idx(Intensity k) { return static_cast<std::size_t>(k); }

/// Signal/decoy/(optional) vacuum mixture emitted by the source.
struct IntensityMix {
    double mu = 0.6;
    double nu = 0.2;
    double p_mu = 0.8;
    double p_nu = 0.15;
    bool vacuum = true;

    double p_vacuum() const { return vacuum ? 1.0 - p_mu - p_nu : 0.0; }
    double intensity(Intensity k) const;
    double probability(Intensity k) const;
    void validate() const;
};

struct SourceSpec {
    double pulse_rate_hz = 1e9;
    IntensityMix mix;
    double p_z_alice = 0.9;
    double p_z_bob = 0.9;
    double misalignment_z = 0.01;
    double misalignment_x = 0.01;

    void validate() const;
};

/// Detections (n) and errors (m) per intensity, for matched Z and X bases.
/// Expected-value mode holds reals; Monte Carlo mode holds integral values.
struct TallySet {
    std::array<double, kIntensityCount> n_z{};
    std::array<double, kIntensityCount> n_x{};
    std::array<double, kIntensityCount> m_z{};
    std::array<double, kIntensityCount> m_x{};
    double n_sent = 0.0;

    double total_n_z() const;
    double total_n_x() const;
    double total_m_z() const;
    double total_m_x() const;

    TallySet& operator+=(const TallySet& other);
    /// Multiplies every count, including n_sent.
    TallySet scaled(double factor) const;
};

/// Dark plus background click probability per pulse over all detectors.
double background_yield(const DetectorSpec& det, double pulse_rate_hz);

/// Detection probability of a pulse with mean photon number k.
double pulse_gain(double k, double eta_total, double y0);

/// Error fraction of detected pulses; empty when the gain is zero.
std::optional<double> pulse_qber(double k, double eta_total, double y0, double e_mis);

double dead_time_factor(double click_rate_per_detector_hz, double dead_time_ns);

/// Detector-side multiplicative factor on every detection at this sample.
double sample_dead_time_factor(double eta_total, double y0, const SourceSpec& source,
                               const DetectorSpec& det);

/// Contribution of every pass sample, without any elevation cut.
/// `thinning` divides the pulse count; the dead-time factor keeps the
/// physical rate.
std::vector<TallySet> per_sample_tallies(const std::vector<link::LinkBudgetBreakdown>& budget,
                                         double sample_dt_s, const SourceSpec& source,
                                         const DetectorSpec& det, double thinning = 1.0);

TallySet expected_tallies(const orbit::PassGeometry& pass,
                          const std::vector<link::LinkBudgetBreakdown>& budget,
                          const SourceSpec& source, const DetectorSpec& det,
                          double min_elevation_deg, double thinning = 1.0);

/// Ground truth kept by the sampler alongside the observable tallies.
struct PhotonNumberTruth {
    /// Matched-basis detections whose pulse carried 0 or 1 photons.
    std::array<double, 2> z_detections{};
    std::array<double, 2> x_detections{};
    std::array<double, 2> x_errors{};
    std::array<double, 2> z_errors{};
};

struct MonteCarloTallies {
    TallySet tallies;
    PhotonNumberTruth truth;
};

MonteCarloTallies monte_carlo_tallies(std::uint64_t seed, const orbit::PassGeometry& pass,
                                      const std::vector<link::LinkBudgetBreakdown>& budget,
                                      const SourceSpec& source, const DetectorSpec& det,
                                      double min_elevation_deg, double thinning);

struct TallyDeviation {
    std::string field;  ///< e.g. "n_z.signal"
    double expected = 0.0;
    double observed = 0.0;
    /// (observed - expected) / sqrt(expected); zero when both are zero.
    double z_score = 0.0;
};

/// Field-by-field comparison of sampled against expected tallies, with the
/// Poisson standard deviation sqrt(expected).
std::vector<TallyDeviation> compare_tallies(const TallySet& expected, const TallySet& observed);

}  // namespace satqkd::channel
