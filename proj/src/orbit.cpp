#include "satqkd/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace satqkd::orbit {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

void OrbitSpec::validate() const {
    if (!(altitude_km > 0.0)) {
        throw std::invalid_argument("orbit.altitude_km must be positive");
    }
    if (!(inclination_deg >= 0.0 && inclination_deg < 180.0)) {
        throw std::invalid_argument("orbit.inclination_deg must lie in [0, 180)");
    }
}

void GroundStation::validate() const {
    if (!(min_elevation_deg > 0.0)) {
        throw std::invalid_argument("station.min_elevation_deg must be positive");
    }
    if (!(max_elevation_deg <= 90.0)) {
        throw std::invalid_argument("station.max_elevation_deg must not exceed 90");
    }
    if (!(min_elevation_deg < max_elevation_deg)) {
        throw std::invalid_argument(
            "station.max_elevation_deg must exceed station.min_elevation_deg");
    }
}

double PassGeometry::duration_s() const {
    if (samples.size() < 2) {
        return 0.0;
    }
    return samples.back().t_s - samples.front().t_s;
}

double sso_inclination(double altitude_km) {
    if (!(altitude_km > 0.0)) {
        throw std::domain_error("altitude must be positive");
    }
    const double c = -std::pow((kEarthRadiusKm + altitude_km) / kSsoReferenceRadiusKm, 3.5);
    if (c < -1.0) {
        throw std::domain_error("no sun-synchronous solution above " +
                                std::to_string(kSsoReferenceRadiusKm - kEarthRadiusKm) +
                                " km altitude");
    }
    return std::acos(c) / kDeg;
}

double central_angle_at_elevation(double altitude_km, double elevation_deg) {
    const double eps = elevation_deg * kDeg;
    const double ratio = kEarthRadiusKm / (kEarthRadiusKm + altitude_km);
    return std::acos(ratio * std::cos(eps)) - eps;
}

double max_ground_distance(double altitude_km, double eps_min_deg) {
    if (!(altitude_km >= 0.0) || !(eps_min_deg >= 0.0 && eps_min_deg < 90.0)) {
        throw std::domain_error("max_ground_distance: need h >= 0 and 0 <= eps_min < 90");
    }
    return std::max(0.0, 2.0 * kEarthRadiusKm * central_angle_at_elevation(altitude_km, eps_min_deg));
}

Coverage coverage_and_availability(double altitude_km) {
    if (!(altitude_km > 0.0)) {
        throw std::domain_error("altitude must be positive");
    }
    const double share = altitude_km / (kEarthRadiusKm + altitude_km);
    return {2.0 * std::numbers::pi * kEarthRadiusKm * kEarthRadiusKm * share, 0.5 * share};
}

double slant_range_at_elevation(double altitude_km, double elevation_deg) {
    const double s = std::sin(elevation_deg * kDeg);
    const double r = kEarthRadiusKm;
    return -r * s + std::sqrt(r * r * s * s + altitude_km * altitude_km + 2.0 * r * altitude_km);
}

double orbital_rate_rad_s(double altitude_km) {
    const double rs = kEarthRadiusKm + altitude_km;
    return std::sqrt(kEarthMuKm3PerS2 / (rs * rs * rs));
}

PassGeometry synth_pass(const OrbitSpec& orbit, const GroundStation& station,
                        double sample_dt_s) {
    orbit.validate();
    station.validate();
    if (!(sample_dt_s > 0.0)) {
        throw std::invalid_argument("sample_dt_s must be positive");
    }

    const double r = kEarthRadiusKm;
    const double rs = r + orbit.altitude_km;
    const double ratio = r / rs;
    const double cos_psi_min =
        std::cos(central_angle_at_elevation(orbit.altitude_km, station.max_elevation_deg));
    const double omega = orbital_rate_rad_s(orbit.altitude_km);

    // One half of the pass, culmination first.
    std::vector<PassSample> half;
    for (long k = 0;; ++k) {
        const double t = static_cast<double>(k) * sample_dt_s;
        const double phase = omega * t;
        if (phase >= std::numbers::pi / 2.0) {
            break;
        }
        const double cos_psi = std::min(1.0, cos_psi_min * std::cos(phase));
        const double sin_psi = std::sqrt(std::max(0.0, 1.0 - cos_psi * cos_psi));
        double elevation = std::atan2(cos_psi - ratio, sin_psi) / kDeg;
        if (k == 0) {
            // Pin the culmination to the requested peak; atan2 round-off is ~1e-14 deg.
            elevation = station.max_elevation_deg;
        }
        if (elevation < station.min_elevation_deg) {
            break;
        }
        const double range =
            std::sqrt(orbit.altitude_km * orbit.altitude_km + 2.0 * r * rs * (1.0 - cos_psi));
        half.push_back({t, elevation, range});
    }

    PassGeometry pass;
    pass.sample_dt_s = sample_dt_s;
    pass.samples.reserve(2 * half.size());
    for (auto it = half.rbegin(); it != half.rend(); ++it) {
        pass.samples.push_back({0.0 - it->t_s, it->elevation_deg, it->slant_range_km});
    }
    for (std::size_t i = 1; i < half.size(); ++i) {
        pass.samples.push_back(half[i]);
    }
    return pass;
}

}  // namespace satqkd::orbit
