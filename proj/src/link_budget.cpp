#include "satqkd/link_budget.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace satqkd::link {

namespace {

constexpr double kPi = std::numbers::pi;

double to_db(double ratio) { return 10.0 * std::log10(ratio); }

int wavelength_key(double wavelength_nm) {
    return static_cast<int>(std::lround(wavelength_nm));
}

}  // namespace

double truncation_efficiency(double truncation_ratio) {
    if (std::abs(truncation_ratio - kOptimalTruncationRatio) > 1e-9) {
        throw std::domain_error("truncation efficiency is tabulated only for alpha = 1.12");
    }
    return kOptimalTruncationEfficiency;
}

double TransmitterSpec::aperture_area_m2() const {
    return kPi / 4.0 * aperture_diam_m * aperture_diam_m;
}

void TransmitterSpec::validate() const {
    if (!(aperture_diam_m > 0.0)) {
        throw std::invalid_argument("transmitter.aperture_diam_m must be positive");
    }
    if (!(truncation_ratio >= 1.0)) {
        throw std::invalid_argument("transmitter.truncation_ratio must be >= 1");
    }
    if (!(truncation_efficiency > 0.0 && truncation_efficiency <= 1.0)) {
        throw std::invalid_argument("transmitter.truncation_efficiency must lie in (0, 1]");
    }
    if (!(m_squared >= 1.0)) {
        throw std::invalid_argument("transmitter.m_squared must be >= 1");
    }
    if (!(wavelength_nm > 0.0)) {
        throw std::invalid_argument("transmitter.wavelength_nm must be positive");
    }
    if (!(pointing_loss_db >= 0.0)) {
        throw std::invalid_argument("transmitter.pointing_loss_db must be >= 0");
    }
}

std::string to_string(CouplingMode mode) {
    return mode == CouplingMode::fiber_with_ao ? "fiber_with_ao" : "free_space";
}

CouplingMode coupling_mode_from_string(const std::string& text) {
    if (text == "fiber_with_ao") {
        return CouplingMode::fiber_with_ao;
    }
    if (text == "free_space") {
        return CouplingMode::free_space;
    }
    throw std::invalid_argument("receiver.coupling_mode must be fiber_with_ao or free_space");
}

double ReceiverSpec::area_m2() const {
    return kPi / 4.0 *
           (primary_diam_m * primary_diam_m - obscuration_diam_m * obscuration_diam_m);
}

double ReceiverSpec::fov_half_angle_rad() const {
    return 0.5 * field_stop_diam_um * 1e-6 / effective_focal_length_m;
}

void ReceiverSpec::validate() const {
    if (!(primary_diam_m > 0.0)) {
        throw std::invalid_argument("receiver.primary_diam_m must be positive");
    }
    if (!(obscuration_diam_m >= 0.0 && obscuration_diam_m < primary_diam_m)) {
        throw std::invalid_argument(
            "receiver.obscuration_diam_m must be non-negative and below primary_diam_m");
    }
    if (!(path_loss_db >= 0.0)) {
        throw std::invalid_argument("receiver.path_loss_db must be >= 0");
    }
    if (!(coupling_loss_db >= 0.0)) {
        throw std::invalid_argument("receiver.coupling_loss_db must be >= 0");
    }
    if (!(field_stop_diam_um > 0.0)) {
        throw std::invalid_argument("receiver.field_stop_diam_um must be positive");
    }
    if (!(effective_focal_length_m > 0.0)) {
        throw std::invalid_argument("receiver.effective_focal_length_m must be positive");
    }
    if (!(filter_bandwidth_nm > 0.0)) {
        throw std::invalid_argument("receiver.filter_bandwidth_nm must be positive");
    }
    if (!(fiber_coupling_beta > 0.0)) {
        throw std::invalid_argument("receiver.fiber_coupling_beta must be positive");
    }
}

AtmosphereTable::AtmosphereTable(std::vector<std::pair<double, double>> rows)
    : rows_(std::move(rows)) {
    if (rows_.empty()) {
        throw std::invalid_argument("atmosphere table is empty");
    }
    std::sort(rows_.begin(), rows_.end());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (rows_[i].second < 0.0) {
            throw std::invalid_argument("atmosphere table has a negative loss");
        }
        if (i > 0 && rows_[i].first == rows_[i - 1].first) {
            throw std::invalid_argument("atmosphere table repeats an elevation");
        }
    }
}

AtmosphereTable AtmosphereTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open atmosphere table " + path);
    }
    std::vector<std::pair<double, double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double elevation = 0.0;
        double loss = 0.0;
        if (!(fields >> elevation)) {
            continue;
        }
        if (!(fields >> loss)) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected two columns");
        }
        rows.emplace_back(elevation, loss);
    }
    return AtmosphereTable(std::move(rows));
}

double AtmosphereTable::loss_db(double elevation_deg) const {
    if (elevation_deg <= rows_.front().first) {
        return rows_.front().second;
    }
    if (elevation_deg >= rows_.back().first) {
        return rows_.back().second;
    }
    auto hi = std::upper_bound(rows_.begin(), rows_.end(), elevation_deg,
                               [](double e, const auto& row) { return e < row.first; });
    auto lo = std::prev(hi);
    const double w = (elevation_deg - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

double AtmosphereModel::zenith_loss_at(double wavelength_nm) const {
    auto it = zenith_loss_db.find(wavelength_key(wavelength_nm));
    if (it == zenith_loss_db.end()) {
        throw std::invalid_argument("atmosphere.zenith_loss_db has no entry for " +
                                    std::to_string(wavelength_key(wavelength_nm)) + " nm");
    }
    return it->second;
}

double AtmosphereModel::radiance_at(double wavelength_nm) const {
    auto it = sky_radiance.find(wavelength_key(wavelength_nm));
    if (it == sky_radiance.end()) {
        throw std::invalid_argument("atmosphere.sky_radiance has no entry for " +
                                    std::to_string(wavelength_key(wavelength_nm)) + " nm");
    }
    return it->second;
}

void AtmosphereModel::validate() const {
    for (const auto& [wl, loss] : zenith_loss_db) {
        if (!(loss >= 0.0)) {
            throw std::invalid_argument("atmosphere.zenith_loss_db must be >= 0");
        }
    }
    for (const auto& [wl, radiance] : sky_radiance) {
        if (!(radiance >= 0.0)) {
            throw std::invalid_argument("atmosphere.sky_radiance must be >= 0");
        }
    }
}

double LinkBudgetBreakdown::terms_sum_db() const {
    return free_space_loss_db + atmospheric_loss_db + pointing_loss_db + rx_path_loss_db +
           coupling_loss_db - tx_gain_db - rx_area_gain_db;
}

double tx_antenna_gain_db(const TransmitterSpec& tx) {
    const double lambda_m = tx.wavelength_nm * 1e-9;
    const double ideal = std::pow(kPi * tx.aperture_diam_m / lambda_m, 2);
    const double beam_quality = tx.m_squared * tx.m_squared;
    return to_db(tx.truncation_efficiency * ideal / beam_quality);
}

double free_space_loss_db(double slant_range_km, double wavelength_nm) {
    if (!(slant_range_km > 0.0)) {
        throw std::domain_error("slant range must be positive");
    }
    return 20.0 * std::log10(4.0 * kPi * slant_range_km * 1e3 / (wavelength_nm * 1e-9));
}

double atmospheric_loss_db(double elevation_deg, double zenith_loss_db) {
    if (!(elevation_deg > 0.0 && elevation_deg <= 90.0)) {
        throw std::domain_error("elevation must lie in (0, 90] degrees");
    }
    return zenith_loss_db / std::sin(elevation_deg * kPi / 180.0);
}

double rx_area_gain_db(const ReceiverSpec& rx, double wavelength_nm) {
    const double lambda_m = wavelength_nm * 1e-9;
    return to_db(4.0 * kPi * rx.area_m2() / (lambda_m * lambda_m));
}

double collection_bound(const TransmitterSpec& tx, const ReceiverSpec& rx,
                        double slant_range_km) {
    const double l = slant_range_km * 1e3;
    const double lambda_m = tx.wavelength_nm * 1e-9;
    return tx.aperture_area_m2() * rx.area_m2() / (l * l * lambda_m * lambda_m);
}

LinkBudgetBreakdown end_to_end_transmission(const orbit::PassSample& sample,
                                            const TransmitterSpec& tx,
                                            const ReceiverSpec& rx,
                                            const AtmosphereModel& atm) {
    LinkBudgetBreakdown b;
    b.elevation_deg = sample.elevation_deg;
    b.slant_range_km = sample.slant_range_km;
    b.tx_gain_db = tx_antenna_gain_db(tx);
    b.free_space_loss_db = free_space_loss_db(sample.slant_range_km, tx.wavelength_nm);
    b.atmospheric_loss_db =
        atm.override_table ? atm.override_table->loss_db(sample.elevation_deg)
                           : atmospheric_loss_db(sample.elevation_deg,
                                                 atm.zenith_loss_at(tx.wavelength_nm));
    b.pointing_loss_db = tx.pointing_loss_db;
    b.rx_area_gain_db = rx_area_gain_db(rx, tx.wavelength_nm);
    b.rx_path_loss_db = rx.path_loss_db;
    b.coupling_loss_db = rx.coupling_loss_db;
    b.total_db = b.terms_sum_db();
    b.eta = std::pow(10.0, -b.total_db / 10.0);
    if (b.eta > 1.0) {
        throw std::domain_error("near-field regime unsupported");
    }
    return b;
}

std::vector<LinkBudgetBreakdown> pass_budget(const orbit::PassGeometry& pass,
                                             const TransmitterSpec& tx,
                                             const ReceiverSpec& rx,
                                             const AtmosphereModel& atm) {
    std::vector<LinkBudgetBreakdown> out;
    out.reserve(pass.samples.size());
    for (const auto& s : pass.samples) {
        out.push_back(end_to_end_transmission(s, tx, rx, atm));
    }
    return out;
}

double background_click_rate(const ReceiverSpec& rx, const AtmosphereModel& atm,
                             double wavelength_nm, double detector_efficiency) {
    const double radiance = atm.radiance_at(wavelength_nm);
    const double lambda_m = wavelength_nm * 1e-9;
    double power_w = 0.0;
    if (rx.coupling_mode == CouplingMode::fiber_with_ao) {
        // Single-mode etendue ~ beta * lambda^2.
        power_w = rx.fiber_coupling_beta * radiance * lambda_m * lambda_m * rx.filter_bandwidth_nm;
    } else {
        const double theta = rx.fov_half_angle_rad();
        power_w = radiance * rx.area_m2() * kPi * theta * theta * rx.filter_bandwidth_nm *
                  std::pow(10.0, -rx.path_loss_db / 10.0);
    }
    return power_w * lambda_m / (kPlanck * kSpeedOfLight) * detector_efficiency;
}

}  // namespace satqkd::link
