// Circular-orbit pass geometry over a spherical, non-rotating Earth.
#pragma once

#include <vector>

namespace satqkd::orbit {

inline constexpr double kEarthRadiusKm = 6378.137;
inline constexpr double kEarthMuKm3PerS2 = 398600.4418;
/// Reference radius of the sun-synchronous altitude/inclination relation.
inline constexpr double kSsoReferenceRadiusKm = 12352.0;

struct OrbitSpec {
    double altitude_km = 567.0;
    double inclination_deg = 97.66;

    void validate() const;
};

struct GroundStation {
    double min_elevation_deg = 20.0;
    double max_elevation_deg = 80.0;

    void validate() const;
};

struct PassSample {
    double t_s = 0.0;  ///< offset from culmination
    double elevation_deg = 0.0;
    double slant_range_km = 0.0;
};

struct PassGeometry {
    std::vector<PassSample> samples;
    double sample_dt_s = 1.0;

    bool empty() const { return samples.empty(); }
    /// Time between first and last sample.
    double duration_s() const;
};

struct Coverage {
    double area_km2 = 0.0;
    double availability = 0.0;  ///< globally averaged fraction of time in view
};

/// Inclination of a circular sun-synchronous orbit, in degrees.
/// Throws std::domain_error when the altitude admits no solution.
double sso_inclination(double altitude_km);

/// Largest ground separation of two stations that can see the satellite
/// simultaneously above `eps_min_deg`.
double max_ground_distance(double altitude_km, double eps_min_deg);

Coverage coverage_and_availability(double altitude_km);

/// Earth-centred angle between station and sub-satellite point at which the
/// satellite appears at `elevation_deg`.
double central_angle_at_elevation(double altitude_km, double elevation_deg);

/// Closed-form slant range for a given elevation.
double slant_range_at_elevation(double altitude_km, double elevation_deg);

double orbital_rate_rad_s(double altitude_km);

/// Symmetric pass about culmination, clipped to the station's minimum
/// elevation. Throws std::invalid_argument for an impossible scenario.
PassGeometry synth_pass(const OrbitSpec& orbit, const GroundStation& station,
                        double sample_dt_s = 1.0);

}  // namespace satqkd::orbit
