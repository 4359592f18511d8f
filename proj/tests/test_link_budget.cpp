#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "satqkd/link_budget.hpp"
#include "satqkd/orbit.hpp"

namespace satqkd::link {
namespace {

constexpr double kPi = 3.14159265358979323846;

TransmitterSpec terminal(double wavelength_nm) {
    TransmitterSpec tx;
    tx.wavelength_nm = wavelength_nm;
    return tx;
}

TEST(TxGain, ReferenceTerminal) {
    EXPECT_NEAR(tx_antenna_gain_db(terminal(1550.0)), 102.2, 0.3);
    EXPECT_NEAR(tx_antenna_gain_db(terminal(850.0)), 107.5, 0.3);
    EXPECT_NEAR(tx_antenna_gain_db(terminal(1550.0)), 102.2259673, 1e-6);
    EXPECT_NEAR(tx_antenna_gain_db(terminal(850.0)), 107.4442227, 1e-6);
}

TEST(TxGain, WavelengthDifference) {
    double diff = tx_antenna_gain_db(terminal(850.0)) - tx_antenna_gain_db(terminal(1550.0));
    EXPECT_NEAR(diff, 5.2, 0.05);
    EXPECT_NEAR(diff, 20.0 * std::log10(1550.0 / 850.0), 1e-9);
}

TEST(TxGain, IdealReduction) {
    TransmitterSpec tx = terminal(1550.0);
    tx.m_squared = 1.0;
    tx.truncation_efficiency = 1.0;
    double ideal = std::pow(kPi * tx.aperture_diam_m / 1550e-9, 2);
    EXPECT_NEAR(tx_antenna_gain_db(tx), 10.0 * std::log10(ideal), 1e-9);
}

TEST(TxGain, OnlyOptimalTruncationTabulated) {
    EXPECT_DOUBLE_EQ(truncation_efficiency(1.12), 0.81);
    EXPECT_THROW(truncation_efficiency(1.5), std::domain_error);
}

TEST(FreeSpaceLoss, DerivedValues) {
    EXPECT_NEAR(free_space_loss_db(1000.0, 1550.0), 258.1775633, 1e-6);
    EXPECT_NEAR(free_space_loss_db(1341.0, 1550.0) - free_space_loss_db(574.0, 1550.0), 7.370338,
                1e-6);
}

TEST(FreeSpaceLoss, DoublingRange) {
    EXPECT_NEAR(free_space_loss_db(2000.0, 850.0) - free_space_loss_db(1000.0, 850.0),
                20.0 * std::log10(2.0), 1e-12);
    EXPECT_THROW(free_space_loss_db(0.0, 850.0), std::domain_error);
}

TEST(AtmosphericLoss, Airmass) {
    EXPECT_NEAR(atmospheric_loss_db(90.0, 0.4), 0.4, 1e-12);
    EXPECT_NEAR(atmospheric_loss_db(30.0, 0.9), 1.8, 1e-12);
    EXPECT_NEAR(atmospheric_loss_db(20.0, 0.4), 1.1695218, 1e-6);
    EXPECT_THROW(atmospheric_loss_db(0.0, 0.4), std::domain_error);
    EXPECT_THROW(atmospheric_loss_db(-5.0, 0.4), std::domain_error);
}

TEST(AtmosphereTable, InterpolatesAndClamps) {
    AtmosphereTable table({{40.0, 1.0}, {20.0, 2.0}, {90.0, 0.5}});
    EXPECT_DOUBLE_EQ(table.loss_db(10.0), 2.0);
    EXPECT_DOUBLE_EQ(table.loss_db(30.0), 1.5);
    EXPECT_DOUBLE_EQ(table.loss_db(65.0), 0.75);
    EXPECT_DOUBLE_EQ(table.loss_db(90.0), 0.5);
    EXPECT_THROW(AtmosphereTable(std::vector<std::pair<double, double>>{}), std::invalid_argument);
    EXPECT_THROW(AtmosphereTable({{20.0, -1.0}}), std::invalid_argument);
}

TEST(AtmosphereTable, LoadsTextFile) {
    auto path = std::filesystem::temp_directory_path() / "satqkd_atm_table.csv";
    {
        std::ofstream out(path);
        out << "# elevation, loss\n20, 1.2\n\n50 0.5  # comment\n";
    }
    AtmosphereTable table = AtmosphereTable::load(path.string());
    ASSERT_EQ(table.rows().size(), 2u);
    EXPECT_DOUBLE_EQ(table.loss_db(35.0), 0.85);
    std::filesystem::remove(path);
}

TEST(EndToEnd, IdealGainMatchesCollectionBound) {
    TransmitterSpec tx = terminal(1550.0);
    tx.m_squared = 1.0;
    tx.truncation_efficiency = 1.0;
    tx.pointing_loss_db = 0.0;
    ReceiverSpec rx;
    rx.path_loss_db = 0.0;
    rx.coupling_loss_db = 0.0;
    AtmosphereModel atm;
    atm.zenith_loss_db[1550] = 0.0;
    orbit::PassSample s{0.0, 60.0, 800.0};
    LinkBudgetBreakdown b = end_to_end_transmission(s, tx, rx, atm);
    EXPECT_NEAR(b.eta / collection_bound(tx, rx, 800.0), 1.0, 1e-12);
}

TEST(EndToEnd, ReferencePassAnchors) {
    orbit::PassGeometry pass = orbit::synth_pass({567.0, 97.66}, {20.0, 80.0}, 1.0);
    auto budget = pass_budget(pass, terminal(1550.0), ReceiverSpec{}, AtmosphereModel{});
    ASSERT_EQ(budget.size(), pass.samples.size());
    const LinkBudgetBreakdown* peak = nullptr;
    for (const auto& b : budget) {
        if (!peak || b.elevation_deg > peak->elevation_deg) peak = &b;
    }
    EXPECT_GE(peak->total_db, 35.0);
    EXPECT_LE(peak->total_db, 50.0);
    EXPECT_NEAR(peak->total_db, 37.011405, 1e-5);
    EXPECT_NEAR(peak->slant_range_km, 575.017996, 1e-5);

    orbit::PassSample low{0.0, 20.0, orbit::slant_range_at_elevation(567.0, 20.0)};
    LinkBudgetBreakdown b20 =
        end_to_end_transmission(low, terminal(1550.0), ReceiverSpec{}, AtmosphereModel{});
    EXPECT_NEAR(b20.total_db, 45.042085, 1e-5);
}

TEST(EndToEnd, AdditivityBoundAndMonotonicity) {
    for (double wl : {850.0, 1550.0}) {
        orbit::PassGeometry pass = orbit::synth_pass({567.0, 97.66}, {20.0, 80.0}, 1.0);
        ReceiverSpec rx;
        if (wl == 850.0) {
            rx.coupling_mode = CouplingMode::free_space;
            rx.coupling_loss_db = 0.0;
        }
        TransmitterSpec tx = terminal(wl);
        auto budget = pass_budget(pass, tx, rx, AtmosphereModel{});
        for (std::size_t i = 0; i < budget.size(); ++i) {
            const auto& b = budget[i];
            EXPECT_NEAR(b.total_db - b.terms_sum_db(), 0.0, 1e-9);
            EXPECT_NEAR(b.eta, std::pow(10.0, -b.total_db / 10.0), 1e-18);
            EXPECT_LE(b.eta, collection_bound(tx, rx, b.slant_range_km));
            if (i > 0 && pass.samples[i].t_s <= 0.0) {
                EXPECT_LE(b.total_db, budget[i - 1].total_db);
            }
        }
    }
}

TEST(EndToEnd, NearFieldRejected) {
    orbit::PassSample s{0.0, 90.0, 1e-4};
    EXPECT_THROW(end_to_end_transmission(s, terminal(1550.0), ReceiverSpec{}, AtmosphereModel{}),
                 std::domain_error);
}

TEST(EndToEnd, OverrideTableReplacesAirmass) {
    AtmosphereModel atm;
    atm.override_table = AtmosphereTable({{20.0, 3.0}, {90.0, 3.0}});
    orbit::PassSample s{0.0, 45.0, 700.0};
    LinkBudgetBreakdown b = end_to_end_transmission(s, terminal(1550.0), ReceiverSpec{}, atm);
    EXPECT_DOUBLE_EQ(b.atmospheric_loss_db, 3.0);
}

TEST(BackgroundClicks, DarkSky) {
    AtmosphereModel atm;
    atm.sky_radiance[850] = 0.0;
    ReceiverSpec rx;
    rx.coupling_mode = CouplingMode::free_space;
    EXPECT_EQ(background_click_rate(rx, atm, 850.0, 0.58), 0.0);
}

TEST(BackgroundClicks, LinearInBandwidth) {
    ReceiverSpec rx;
    double base = background_click_rate(rx, AtmosphereModel{}, 1550.0, 0.9);
    rx.filter_bandwidth_nm *= 2.0;
    EXPECT_NEAR(background_click_rate(rx, AtmosphereModel{}, 1550.0, 0.9), 2.0 * base,
                1e-12 * base);
}

TEST(BackgroundClicks, RadiometricValues) {
    ReceiverSpec fs;
    fs.coupling_mode = CouplingMode::free_space;
    EXPECT_NEAR(fs.fov_half_angle_rad(), 6.25e-6, 1e-15);
    double free_space = background_click_rate(fs, AtmosphereModel{}, 850.0, 0.58);
    EXPECT_NEAR(free_space / 2.09007880e7, 1.0, 1e-8);
    double fiber = background_click_rate(ReceiverSpec{}, AtmosphereModel{}, 1550.0, 0.9);
    EXPECT_NEAR(fiber / 9.44819610e5, 1.0, 1e-8);
}

TEST(Validation, RejectsBadSpecs) {
    TransmitterSpec tx;
    tx.m_squared = 0.9;
    EXPECT_THROW(tx.validate(), std::invalid_argument);
    tx = TransmitterSpec{};
    tx.pointing_loss_db = -1.0;
    EXPECT_THROW(tx.validate(), std::invalid_argument);
    ReceiverSpec rx;
    rx.obscuration_diam_m = 0.9;
    EXPECT_THROW(rx.validate(), std::invalid_argument);
    rx = ReceiverSpec{};
    rx.coupling_loss_db = -0.1;
    EXPECT_THROW(rx.validate(), std::invalid_argument);
    AtmosphereModel atm;
    atm.zenith_loss_db[1550] = -0.4;
    EXPECT_THROW(atm.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace satqkd::link
