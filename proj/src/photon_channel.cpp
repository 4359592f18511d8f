#include "satqkd/photon_channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace satqkd::channel {

namespace {

constexpr std::array<Intensity, kIntensityCount> kAllIntensities{
    Intensity::signal, Intensity::decoy, Intensity::vacuum};

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void DetectorSpec::validate() const {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) {
        throw std::invalid_argument("detector.efficiency must lie in (0, 1]");
    }
    if (!(dark_count_rate_hz >= 0.0)) {
        throw std::invalid_argument("detector.dark_count_rate_hz must be >= 0");
    }
    if (!(background_rate_hz >= 0.0)) {
        throw std::invalid_argument("detector.background_rate_hz must be >= 0");
    }
    if (!(dead_time_ns >= 0.0)) {
        throw std::invalid_argument("detector.dead_time_ns must be >= 0");
    }
    if (!(timing_jitter_ps >= 0.0)) {
        throw std::invalid_argument("detector.timing_jitter_ps must be >= 0");
    }
    if (n_detectors < 1) {
        throw std::invalid_argument("detector.n_detectors must be >= 1");
    }
    if (!(gate_width_ns > 0.0)) {
        throw std::invalid_argument("detector.gate_width_ns must be positive");
    }
}

double IntensityMix::intensity(Intensity k) const {
    switch (k) {
        case Intensity::signal: return mu;
        case Intensity::decoy: return nu;
        case Intensity::vacuum: return 0.0;
    }
    return 0.0;
}

double IntensityMix::probability(Intensity k) const {
    switch (k) {
        case Intensity::signal: return p_mu;
        case Intensity::decoy: return p_nu;
        case Intensity::vacuum: return p_vacuum();
    }
    return 0.0;
}

void IntensityMix::validate() const {
    if (!(nu > 0.0 && nu < mu)) {
        throw std::invalid_argument("source.nu must satisfy 0 < nu < mu");
    }
    if (!is_probability(p_mu) || !is_probability(p_nu)) {
        throw std::invalid_argument("source.p_mu and source.p_nu must lie in [0, 1]");
    }
    if (vacuum) {
        if (!(p_mu + p_nu < 1.0)) {
            throw std::invalid_argument("source.p_mu + source.p_nu must leave room for vacuum");
        }
    } else if (std::abs(p_mu + p_nu - 1.0) > 1e-12) {
        throw std::invalid_argument("source.p_mu + source.p_nu must equal 1 without vacuum");
    }
}

void SourceSpec::validate() const {
    if (!(pulse_rate_hz > 0.0)) {
        throw std::invalid_argument("source.pulse_rate_hz must be positive");
    }
    mix.validate();
    if (!(p_z_alice > 0.0 && p_z_alice < 1.0)) {
        throw std::invalid_argument("source.p_z_alice must lie in (0, 1)");
    }
    if (!(p_z_bob > 0.0 && p_z_bob < 1.0)) {
        throw std::invalid_argument("source.p_z_bob must lie in (0, 1)");
    }
    if (!(misalignment_z >= 0.0 && misalignment_z < 0.5)) {
        throw std::invalid_argument("source.misalignment_z must lie in [0, 0.5)");
    }
    if (!(misalignment_x >= 0.0 && misalignment_x < 0.5)) {
        throw std::invalid_argument("source.misalignment_x must lie in [0, 0.5)");
    }
}

double TallySet::total_n_z() const { return n_z[0] + n_z[1] + n_z[2]; }
double TallySet::total_n_x() const { return n_x[0] + n_x[1] + n_x[2]; }
double TallySet::total_m_z() const { return m_z[0] + m_z[1] + m_z[2]; }
double TallySet::total_m_x() const { return m_x[0] + m_x[1] + m_x[2]; }

TallySet& TallySet::operator+=(const TallySet& other) {
    for (std::size_t k = 0; k < kIntensityCount; ++k) {
        n_z[k] += other.n_z[k];
        n_x[k] += other.n_x[k];
        m_z[k] += other.m_z[k];
        m_x[k] += other.m_x[k];
    }
    n_sent += other.n_sent;
    return *this;
}

TallySet TallySet::scaled(double factor) const {
    TallySet out = *this;
    for (std::size_t k = 0; k < kIntensityCount; ++k) {
        out.n_z[k] *= factor;
        out.n_x[k] *= factor;
        out.m_z[k] *= factor;
        out.m_x[k] *= factor;
    }
    out.n_sent *= factor;
    return out;
}

double background_yield(const DetectorSpec& det, double pulse_rate_hz) {
    double window_s = det.gate_width_ns * 1e-9;
    if (pulse_rate_hz > 0.0) {
        window_s = std::min(window_s, 1.0 / pulse_rate_hz);
    }
    const double y0 =
        det.n_detectors * (det.dark_count_rate_hz + det.background_rate_hz) * window_s;
    return std::clamp(y0, 0.0, 1.0);
}

double pulse_gain(double k, double eta_total, double y0) {
    return y0 - (1.0 - y0) * std::expm1(-k * eta_total);
}

std::optional<double> pulse_qber(double k, double eta_total, double y0, double e_mis) {
    const double gain = pulse_gain(k, eta_total, y0);
    if (!(gain > 0.0)) {
        return std::nullopt;
    }
    return (0.5 * y0 - e_mis * std::expm1(-k * eta_total)) / gain;
}

double dead_time_factor(double click_rate_per_detector_hz, double dead_time_ns) {
    return 1.0 / (1.0 + click_rate_per_detector_hz * dead_time_ns * 1e-9);
}

double sample_dead_time_factor(double eta_total, double y0, const SourceSpec& source,
                               const DetectorSpec& det) {
    double mean_gain = 0.0;
    for (Intensity k : kAllIntensities) {
        mean_gain += source.mix.probability(k) * pulse_gain(source.mix.intensity(k), eta_total, y0);
    }
    return dead_time_factor(source.pulse_rate_hz * mean_gain / det.n_detectors, det.dead_time_ns);
}

std::vector<TallySet> per_sample_tallies(const std::vector<link::LinkBudgetBreakdown>& budget,
                                         double sample_dt_s, const SourceSpec& source,
                                         const DetectorSpec& det, double thinning) {
    const double y0 = background_yield(det, source.pulse_rate_hz);
    const double pulses = source.pulse_rate_hz * sample_dt_s / thinning;
    const double p_zz = source.p_z_alice * source.p_z_bob;
    const double p_xx = (1.0 - source.p_z_alice) * (1.0 - source.p_z_bob);

    std::vector<TallySet> out(budget.size());
    for (std::size_t s = 0; s < budget.size(); ++s) {
        const double eta = budget[s].eta * det.efficiency;
        const double dead = sample_dead_time_factor(eta, y0, source, det);
        TallySet& t = out[s];
        t.n_sent = pulses;
        for (Intensity k : kAllIntensities) {
            const std::size_t i = idx(k);
            const double p = source.mix.probability(k);
            const double mean = source.mix.intensity(k);
            const double gain = pulse_gain(mean, eta, y0);
            const double detected = pulses * p * gain * dead;
            t.n_z[i] = detected * p_zz;
            t.n_x[i] = detected * p_xx;
            // Error counts are formed directly (not e_k * n) so zero gain stays finite.
            const double noise_errors = 0.5 * y0;
            const double signal_clicks = -std::expm1(-mean * eta);
            t.m_z[i] = pulses * p * dead * p_zz *
                       (noise_errors + source.misalignment_z * signal_clicks);
            t.m_x[i] = pulses * p * dead * p_xx *
                       (noise_errors + source.misalignment_x * signal_clicks);
        }
    }
    return out;
}

TallySet expected_tallies(const orbit::PassGeometry& pass,
                          const std::vector<link::LinkBudgetBreakdown>& budget,
                          const SourceSpec& source, const DetectorSpec& det,
                          double min_elevation_deg, double thinning) {
    if (budget.size() != pass.samples.size()) {
        throw std::invalid_argument("expected_tallies: one budget entry per pass sample required");
    }
    const auto per_sample = per_sample_tallies(budget, pass.sample_dt_s, source, det, thinning);
    TallySet total;
    for (std::size_t s = 0; s < per_sample.size(); ++s) {
        if (pass.samples[s].elevation_deg >= min_elevation_deg) {
            total += per_sample[s];
        }
    }
    return total;
}

namespace {

using Count = long long;

Count draw_binomial(std::mt19937_64& rng, Count trials, double p) {
    if (trials <= 0 || p <= 0.0) {
        return 0;
    }
    if (p >= 1.0) {
        return trials;
    }
    std::binomial_distribution<Count> dist(trials, p);
    return dist(rng);
}

struct CellOutcome {
    Count detections = 0;
    Count errors = 0;
    std::array<Count, 2> detections_by_n{};
    std::array<Count, 2> errors_by_n{};
};

// Splits `pulses` of mean photon number `mean` by photon number, then draws
// detections and errors for each photon-number class.
CellOutcome sample_cell(std::mt19937_64& rng, Count pulses, double mean, double eta, double y0,
                        double dead, double e_mis) {
    constexpr int kMaxPhotons = 40;
    CellOutcome out;
    Count remaining = pulses;
    double tail = 1.0;  // P(N >= n)
    double pmf = std::exp(-mean);
    for (int n = 0; n <= kMaxPhotons && remaining > 0; ++n) {
        Count with_n = remaining;
        if (n < kMaxPhotons && tail > 0.0) {
            with_n = draw_binomial(rng, remaining, std::min(1.0, pmf / tail));
        }
        remaining -= with_n;
        tail -= pmf;
        pmf *= mean / (n + 1);

        const double no_signal = std::pow(1.0 - eta, n);
        const double p_det = 1.0 - (1.0 - y0) * no_signal;
        const double p_err = 0.5 * y0 + e_mis * (1.0 - no_signal);
        const Count dets = draw_binomial(rng, with_n, p_det * dead);
        const Count errs = p_det > 0.0 ? draw_binomial(rng, dets, p_err / p_det) : 0;
        out.detections += dets;
        out.errors += errs;
        if (n < 2) {
            out.detections_by_n[n] += dets;
            out.errors_by_n[n] += errs;
        }
    }
    return out;
}

}  // namespace

MonteCarloTallies monte_carlo_tallies(std::uint64_t seed, const orbit::PassGeometry& pass,
                                      const std::vector<link::LinkBudgetBreakdown>& budget,
                                      const SourceSpec& source, const DetectorSpec& det,
                                      double min_elevation_deg, double thinning) {
    if (budget.size() != pass.samples.size()) {
        throw std::invalid_argument("monte_carlo_tallies: one budget entry per pass sample required");
    }
    if (!(thinning >= 1.0)) {
        throw std::invalid_argument("monte_carlo_tallies: thinning must be >= 1");
    }
    std::mt19937_64 rng(seed);
    const double y0 = background_yield(det, source.pulse_rate_hz);
    const Count pulses_per_sample =
        std::llround(source.pulse_rate_hz * pass.sample_dt_s / thinning);
    const double p_zz = source.p_z_alice * source.p_z_bob;
    const double p_xx = (1.0 - source.p_z_alice) * (1.0 - source.p_z_bob);
    const auto& mix = source.mix;

    MonteCarloTallies out;
    for (std::size_t s = 0; s < pass.samples.size(); ++s) {
        if (pass.samples[s].elevation_deg < min_elevation_deg) {
            continue;
        }
        const double eta = budget[s].eta * det.efficiency;
        const double dead = sample_dead_time_factor(eta, y0, source, det);
        out.tallies.n_sent += static_cast<double>(pulses_per_sample);

        // Intensity choice: sequential binomial split of the multinomial.
        std::array<Count, kIntensityCount> per_intensity{};
        per_intensity[0] = draw_binomial(rng, pulses_per_sample, mix.p_mu);
        const Count rest = pulses_per_sample - per_intensity[0];
        const double p_rest = 1.0 - mix.p_mu;
        per_intensity[1] =
            mix.vacuum ? draw_binomial(rng, rest, p_rest > 0.0 ? mix.p_nu / p_rest : 0.0) : rest;
        per_intensity[2] = rest - per_intensity[1];

        for (Intensity k : kAllIntensities) {
            const std::size_t i = idx(k);
            const Count n_zz = draw_binomial(rng, per_intensity[i], p_zz);
            const Count n_xx = draw_binomial(rng, per_intensity[i] - n_zz,
                                             p_zz < 1.0 ? p_xx / (1.0 - p_zz) : 0.0);
            const double mean = mix.intensity(k);
            const CellOutcome z =
                sample_cell(rng, n_zz, mean, eta, y0, dead, source.misalignment_z);
            const CellOutcome x =
                sample_cell(rng, n_xx, mean, eta, y0, dead, source.misalignment_x);
            out.tallies.n_z[i] += static_cast<double>(z.detections);
            out.tallies.m_z[i] += static_cast<double>(z.errors);
            out.tallies.n_x[i] += static_cast<double>(x.detections);
            out.tallies.m_x[i] += static_cast<double>(x.errors);
            for (int n = 0; n < 2; ++n) {
                out.truth.z_detections[n] += static_cast<double>(z.detections_by_n[n]);
                out.truth.z_errors[n] += static_cast<double>(z.errors_by_n[n]);
                out.truth.x_detections[n] += static_cast<double>(x.detections_by_n[n]);
                out.truth.x_errors[n] += static_cast<double>(x.errors_by_n[n]);
            }
        }
    }
    return out;
}

std::vector<TallyDeviation> compare_tallies(const TallySet& expected, const TallySet& observed) {
    static constexpr const char* kNames[kIntensityCount] = {"signal", "decoy", "vacuum"};
    std::vector<TallyDeviation> out;
    auto push = [&](const char* group, const std::array<double, kIntensityCount>& e,
                    const std::array<double, kIntensityCount>& o) {
        for (std::size_t k = 0; k < kIntensityCount; ++k) {
            TallyDeviation d;
            d.field = std::string(group) + "." + kNames[k];
            d.expected = e[k];
            d.observed = o[k];
            if (e[k] > 0.0) {
                d.z_score = (o[k] - e[k]) / std::sqrt(e[k]);
            } else if (o[k] != 0.0) {
                d.z_score = std::numeric_limits<double>::infinity();
            }
            out.push_back(d);
        }
    };
    push("n_z", expected.n_z, observed.n_z);
    push("n_x", expected.n_x, observed.n_x);
    push("m_z", expected.m_z, observed.m_z);
    push("m_x", expected.m_x, observed.m_x);
    return out;
}

}  // namespace satqkd::channel
