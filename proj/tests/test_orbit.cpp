#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "satqkd/orbit.hpp"

namespace satqkd::orbit {
namespace {

TEST(SsoInclination, ReferenceOrbit) { EXPECT_NEAR(sso_inclination(567.0), 97.66, 0.05); }

TEST(SsoInclination, FourHundredKm) {
    // arccos(-((6778.137/12352)^3.5))
    EXPECT_NEAR(sso_inclination(400.0), 97.031029, 1e-5);
}

TEST(SsoInclination, RetrogradeBoundary) {
    EXPECT_NEAR(sso_inclination(kSsoReferenceRadiusKm - kEarthRadiusKm), 180.0, 1e-9);
}

TEST(SsoInclination, NoSolutionAboveBoundary) {
    EXPECT_THROW(sso_inclination(6000.0), std::domain_error);
    EXPECT_THROW(sso_inclination(0.0), std::domain_error);
}

TEST(MaxGroundDistance, ReferenceAnchor) {
    EXPECT_NEAR(max_ground_distance(574.0, 20.0), 2325.0, 23.25);
    EXPECT_NEAR(max_ground_distance(574.0, 20.0), 2325.681525, 1e-5);
}

TEST(MaxGroundDistance, ClosedFormAt600Km) {
    EXPECT_NEAR(max_ground_distance(600.0, 10.0), 3523.191297, 1e-5);
}

TEST(MaxGroundDistance, VanishesWithAltitude) {
    EXPECT_EQ(max_ground_distance(0.0, 20.0), 0.0);
    for (double eps : {15.0, 45.0, 80.0}) {
        EXPECT_NEAR(max_ground_distance(1e-9, eps), 0.0, 1e-6) << eps;
    }
    // Grazing cut: D ~ 2 sqrt(2 R h) as h -> 0.
    const double h = 1e-6;
    EXPECT_NEAR(max_ground_distance(h, 0.0) / (2.0 * std::sqrt(2.0 * kEarthRadiusKm * h)), 1.0,
                1e-3);
}

TEST(MaxGroundDistance, MonotoneOnGrid) {
    for (double h = 300.0; h <= 1500.0; h += 100.0) {
        for (double eps = 0.0; eps < 85.0; eps += 5.0) {
            double d = max_ground_distance(h, eps);
            EXPECT_LT(d, max_ground_distance(h + 50.0, eps));
            EXPECT_GT(d, max_ground_distance(h, eps + 2.5));
        }
    }
}

TEST(Coverage, DerivedValues) {
    Coverage c = coverage_and_availability(574.0);
    EXPECT_NEAR(c.availability, 0.041282270, 1e-8);
    EXPECT_NEAR(c.area_km2, 2.11038225e7, 1.0);
}

TEST(Coverage, FractionApproachesHalf) {
    EXPECT_NEAR(coverage_and_availability(1e9).availability, 0.5, 1e-5);
    for (double h : {100.0, 574.0, 36000.0}) {
        double f = coverage_and_availability(h).availability;
        EXPECT_GT(f, 0.0);
        EXPECT_LT(f, 0.5);
    }
}

TEST(SlantRange, TwentyDegreesAt574Km) {
    EXPECT_NEAR(slant_range_at_elevation(574.0, 20.0), 1341.375259, 1e-5);
}

TEST(SlantRange, ZenithIsAltitude) { EXPECT_NEAR(slant_range_at_elevation(574.0, 90.0), 574.0, 1e-9); }

TEST(OrbitalRate, ReferenceOrbit) {
    EXPECT_NEAR(orbital_rate_rad_s(567.0), 1.0908063620e-3, 1e-12);
}

TEST(SynthPass, ZenithRangeEqualsAltitude) {
    PassGeometry pass = synth_pass({574.0, 97.7}, {20.0, 90.0}, 1.0);
    const PassSample* peak = nullptr;
    for (const auto& s : pass.samples) {
        if (s.t_s == 0.0) peak = &s;
    }
    ASSERT_NE(peak, nullptr);
    EXPECT_NEAR(peak->slant_range_km, 574.0, 1e-9);
    EXPECT_NEAR(peak->elevation_deg, 90.0, 1e-9);
}

TEST(SynthPass, SymmetricAboutCulmination) {
    PassGeometry pass = synth_pass({567.0, 97.66}, {20.0, 80.0}, 1.0);
    const auto& s = pass.samples;
    ASSERT_FALSE(s.empty());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& a = s[i];
        const auto& b = s[s.size() - 1 - i];
        EXPECT_DOUBLE_EQ(a.t_s, -b.t_s);
        EXPECT_DOUBLE_EQ(a.elevation_deg, b.elevation_deg);
        EXPECT_DOUBLE_EQ(a.slant_range_km, b.slant_range_km);
    }
}

TEST(SynthPass, RangeMinimalAtCulminationAndWithinBounds) {
    const double h = 567.0;
    PassGeometry pass = synth_pass({h, 97.66}, {20.0, 80.0}, 1.0);
    const double l_max = slant_range_at_elevation(h, 20.0);
    for (std::size_t i = 0; i < pass.samples.size(); ++i) {
        const auto& s = pass.samples[i];
        EXPECT_GE(s.slant_range_km, h);
        EXPECT_LE(s.slant_range_km, l_max + 1e-9);
        EXPECT_GE(s.elevation_deg, 20.0);
        EXPECT_LE(s.elevation_deg, 80.0 + 1e-9);
        if (i > 0) {
            const auto& prev = pass.samples[i - 1];
            if (s.t_s <= 0.0) {
                EXPECT_LT(s.slant_range_km, prev.slant_range_km);
                EXPECT_GT(s.elevation_deg, prev.elevation_deg);
            } else {
                EXPECT_GT(s.slant_range_km, prev.slant_range_km);
                EXPECT_LT(s.elevation_deg, prev.elevation_deg);
            }
        }
    }
}

TEST(SynthPass, PeakAtRequestedElevation) {
    PassGeometry pass = synth_pass({567.0, 97.66}, {20.0, 55.0}, 1.0);
    double peak = 0.0;
    for (const auto& s : pass.samples) peak = std::max(peak, s.elevation_deg);
    EXPECT_NEAR(peak, 55.0, 1e-9);
}

TEST(SynthPass, DurationCorridor) {
    PassGeometry pass = synth_pass({567.0, 97.66}, {20.0, 80.0}, 1.0);
    EXPECT_GE(pass.duration_s(), 250.0);
    EXPECT_LE(pass.duration_s(), 450.0);
    EXPECT_EQ(pass.samples.size(), static_cast<std::size_t>(pass.duration_s()) + 1);
}

TEST(SynthPass, SampleStepRespected) {
    PassGeometry pass = synth_pass({567.0, 97.66}, {20.0, 80.0}, 5.0);
    ASSERT_GT(pass.samples.size(), 2u);
    for (std::size_t i = 1; i < pass.samples.size(); ++i) {
        EXPECT_DOUBLE_EQ(pass.samples[i].t_s - pass.samples[i - 1].t_s, 5.0);
    }
}

TEST(SynthPass, RejectsImpossibleStation) {
    EXPECT_THROW(synth_pass({567.0, 97.66}, {50.0, 40.0}, 1.0), std::invalid_argument);
    EXPECT_THROW(synth_pass({567.0, 97.66}, {20.0, 80.0}, 0.0), std::invalid_argument);
    EXPECT_THROW(synth_pass({567.0, 97.66}, {20.0, 95.0}, 1.0), std::invalid_argument);
}

TEST(SynthPass, LowerCutWidensPass) {
    PassGeometry narrow = synth_pass({567.0, 97.66}, {30.0, 80.0}, 1.0);
    PassGeometry wide = synth_pass({567.0, 97.66}, {10.0, 80.0}, 1.0);
    EXPECT_GT(wide.samples.size(), narrow.samples.size());
}

}  // namespace
}  // namespace satqkd::orbit
