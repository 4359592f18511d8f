// Downlink optical budget: transmitter gain, Friis free-space loss, airmass
// atmospheric loss and ground-station losses, decomposed per pass sample.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "satqkd/orbit.hpp"

namespace satqkd::link {

inline constexpr double kPlanck = 6.62607015e-34;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Truncation ratio that maximises the far-field gain of a truncated
/// Gaussian beam, and the gain factor it achieves.
inline constexpr double kOptimalTruncationRatio = 1.12;
inline constexpr double kOptimalTruncationEfficiency = 0.81;

/// Far-field gain factor for the given truncation ratio. Only the optimal
/// ratio is tabulated; anything else throws std::domain_error.
double truncation_efficiency(double truncation_ratio);

struct TransmitterSpec {
    double aperture_diam_m = 0.085;
    double truncation_ratio = kOptimalTruncationRatio;
    double truncation_efficiency = kOptimalTruncationEfficiency;
    double m_squared = 1.2;
    double wavelength_nm = 1550.0;
    double pointing_loss_db = 3.0;

    double aperture_area_m2() const;
    void validate() const;
};

enum class CouplingMode { fiber_with_ao, free_space };

std::string to_string(CouplingMode mode);
CouplingMode coupling_mode_from_string(const std::string& text);

struct ReceiverSpec {
    double primary_diam_m = 0.8;
    double obscuration_diam_m = 0.3;
    double path_loss_db = 1.0;
    CouplingMode coupling_mode = CouplingMode::fiber_with_ao;
    double coupling_loss_db = 5.0;
    double field_stop_diam_um = 25.0;
    double effective_focal_length_m = 2.0;
    double filter_bandwidth_nm = 5.0;
    /// Single-mode fibre background coupling factor.
    double fiber_coupling_beta = 1.12;

    /// Annular collecting area of the Cassegrain primary.
    double area_m2() const;
    /// Field-of-view half-angle set by the field stop and focal length.
    double fov_half_angle_rad() const;
    void validate() const;
};

/// Piecewise-linear (elevation, loss) table that replaces the airmass model.
class AtmosphereTable {
public:
    AtmosphereTable() = default;
    explicit AtmosphereTable(std::vector<std::pair<double, double>> rows);

    /// Two whitespace- or comma-separated columns per line; '#' starts a comment.
    static AtmosphereTable load(const std::string& path);

    /// Loss at the elevation, linearly interpolated and held flat at the ends.
    double loss_db(double elevation_deg) const;
    const std::vector<std::pair<double, double>>& rows() const { return rows_; }

private:
    std::vector<std::pair<double, double>> rows_;
};

struct AtmosphereModel {
    /// Keyed by wavelength in nm.
    std::map<int, double> zenith_loss_db{{850, 0.9}, {1550, 0.4}};
    /// W / (m^2 sr nm), full-Moon diffuse sky radiance.
    std::map<int, double> sky_radiance{{850, 4e-2}, {1550, 1e-2}};
    std::optional<AtmosphereTable> override_table;

    double zenith_loss_at(double wavelength_nm) const;
    double radiance_at(double wavelength_nm) const;
    void validate() const;
};

struct LinkBudgetBreakdown {
    double elevation_deg = 0.0;
    double slant_range_km = 0.0;
    double tx_gain_db = 0.0;
    double free_space_loss_db = 0.0;
    double atmospheric_loss_db = 0.0;
    double pointing_loss_db = 0.0;
    double rx_area_gain_db = 0.0;
    double rx_path_loss_db = 0.0;
    double coupling_loss_db = 0.0;
    double total_db = 0.0;
    double eta = 0.0;

    /// Losses minus gains; equals total_db by construction.
    double terms_sum_db() const;
};

double tx_antenna_gain_db(const TransmitterSpec& tx);
double free_space_loss_db(double slant_range_km, double wavelength_nm);
/// Plane-parallel airmass scaling of the zenith loss.
double atmospheric_loss_db(double elevation_deg, double zenith_loss_db);
/// Receiver gain 4*pi*A/lambda^2 in dB.
double rx_area_gain_db(const ReceiverSpec& rx, double wavelength_nm);

/// Diffraction-limited far-field collection bound A_tx*A_rx/(L*lambda)^2.
double collection_bound(const TransmitterSpec& tx, const ReceiverSpec& rx,
                        double slant_range_km);

/// Throws std::domain_error ("near-field regime unsupported") if the
/// assembled transmission exceeds one.
LinkBudgetBreakdown end_to_end_transmission(const orbit::PassSample& sample,
                                            const TransmitterSpec& tx,
                                            const ReceiverSpec& rx,
                                            const AtmosphereModel& atm);

std::vector<LinkBudgetBreakdown> pass_budget(const orbit::PassGeometry& pass,
                                             const TransmitterSpec& tx,
                                             const ReceiverSpec& rx,
                                             const AtmosphereModel& atm);

/// Radiometric estimate of background clicks per second from diffuse sky
/// light at the transmitter wavelength.
double background_click_rate(const ReceiverSpec& rx, const AtmosphereModel& atm,
                             double wavelength_nm, double detector_efficiency);

}  // namespace satqkd::link
