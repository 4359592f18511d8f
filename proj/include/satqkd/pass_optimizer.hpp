// Whole-pass protocol-parameter optimisation: intensities, their
// probabilities, the basis bias and the post-processing elevation cut are
// held fixed over a pass and chosen to maximise the finite key length.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "satqkd/finite_key.hpp"
#include "satqkd/link_budget.hpp"
#include "satqkd/orbit.hpp"
#include "satqkd/photon_channel.hpp"

namespace satqkd::optimizer {

inline constexpr double kMinElevationLowDeg = 20.0;
inline constexpr double kMinElevationHighDeg = 80.0;
inline constexpr double kMinElevationStepDeg = 1.0;

struct ParamVector {
    double mu = 0.6;
    double nu = 0.2;
    double p_mu = 0.8;
    double p_nu = 0.15;
    double p_z = 0.9;
    double min_elevation_deg = 20.0;

    void validate(finite_key::DecoyProtocol protocol) const;
};

struct OptimizerConfig {
    int coarse_grid_steps = 8;
    int refine_iterations = 4;
    double rel_tolerance = 1e-3;
    std::uint64_t rng_seed = 1;
    /// Extra refinement starts drawn uniformly from the search box.
    int random_starts = 4;

    void validate() const;
};

enum class ReceiverBasis { active, passive };

/// Everything about the link that the optimiser does not choose.
struct Hardware {
    link::TransmitterSpec tx;
    link::ReceiverSpec rx;
    link::AtmosphereModel atm;
    channel::DetectorSpec det;
    /// Pulse rate, misalignments and (for a passive receiver) p_z_bob.
    channel::SourceSpec source;
    ReceiverBasis receiver_basis = ReceiverBasis::active;
};

/// Source with the protocol parameters applied.
channel::SourceSpec apply_params(const Hardware& hw, const ParamVector& params,
                                 finite_key::DecoyProtocol protocol);

struct Evaluation {
    ParamVector params;
    channel::TallySet tallies;
    finite_key::SklResult skl;
};

/// Key length for a fixed parameter choice over the pass.
Evaluation evaluate_params(const orbit::PassGeometry& pass, const Hardware& hw,
                           const finite_key::SecurityParams& security,
                           finite_key::DecoyProtocol protocol, const ParamVector& params);

struct TraceEntry {
    std::string phase;  ///< "grid" or "refine"
    ParamVector params;
    double skl_real = 0.0;
};

struct OptimizeResult {
    ParamVector params;
    finite_key::SklResult skl;
    channel::TallySet tallies;
    std::vector<TraceEntry> trace;
    bool all_aborted = true;
};

/// Coarse grid over the five continuous parameters with an exhaustive
/// 1-degree elevation cut, then coordinate-wise golden-section refinement.
OptimizeResult optimize_pass(const orbit::PassGeometry& pass, const Hardware& hw,
                             const finite_key::SecurityParams& security,
                             finite_key::DecoyProtocol protocol, const OptimizerConfig& config);

struct ProfilePoint {
    double t_s = 0.0;
    double elevation_deg = 0.0;
    double skr_per_pulse = 0.0;
    ParamVector params;  ///< min_elevation_deg unused
};

/// Asymptotic key rate optimised independently at every pass sample.
std::vector<ProfilePoint> pointwise_asymptotic_profile(const orbit::PassGeometry& pass,
                                                       const Hardware& hw,
                                                       const finite_key::SecurityParams& security,
                                                       const OptimizerConfig& config);

struct SweepRow {
    double max_elevation_deg = 0.0;
    double pass_duration_s = 0.0;
    ParamVector params;
    finite_key::SklResult skl;
};

std::vector<SweepRow> sweep_max_elevation(const orbit::OrbitSpec& orbit, double min_elevation_deg,
                                          const std::vector<double>& max_elevations_deg,
                                          const Hardware& hw,
                                          const finite_key::SecurityParams& security,
                                          finite_key::DecoyProtocol protocol,
                                          const OptimizerConfig& config, double sample_dt_s = 1.0);

struct LongTermRate {
    double altitude_km = 0.0;
    double skl_bits = 0.0;
    double pass_duration_s = 0.0;
    double availability = 0.0;
    /// skl / pass duration scaled by the global availability, bit/s.
    double rate_bps = 0.0;
};

LongTermRate long_term_rate(const orbit::OrbitSpec& orbit, const orbit::GroundStation& station,
                            const Hardware& hw, const finite_key::SecurityParams& security,
                            finite_key::DecoyProtocol protocol, const OptimizerConfig& config,
                            double sample_dt_s = 1.0);

}  // namespace satqkd::optimizer
