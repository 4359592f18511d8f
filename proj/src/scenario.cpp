#include "satqkd/scenario.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace satqkd::scenario {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were used so that anything
// left over can be rejected.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw ScenarioError(path_, "must be an object");
        }
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const json* v = take(key, fallback.has_value());
        if (!v) {
            return *fallback;
        }
        if (!v->is_number()) {
            throw ScenarioError(field(key), "must be a number");
        }
        return v->get<double>();
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
        const json* v = take(key, fallback.has_value());
        if (!v) {
            return *fallback;
        }
        if (!v->is_number_integer()) {
            throw ScenarioError(field(key), "must be an integer");
        }
        return v->get<std::int64_t>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        const json* v = take(key, fallback.has_value());
        if (!v) {
            return *fallback;
        }
        if (!v->is_string()) {
            throw ScenarioError(field(key), "must be a string");
        }
        return v->get<std::string>();
    }

    bool flag(const std::string& key, bool fallback) {
        const json* v = take(key, true);
        if (!v) {
            return fallback;
        }
        if (!v->is_boolean()) {
            throw ScenarioError(field(key), "must be true or false");
        }
        return v->get<bool>();
    }

    /// Object keyed by integer wavelength in nm.
    std::map<int, double> wavelength_table(const std::string& key, std::map<int, double> fallback) {
        const json* v = take(key, true);
        if (!v) {
            return fallback;
        }
        if (!v->is_object()) {
            throw ScenarioError(field(key), "must map wavelength in nm to a number");
        }
        std::map<int, double> out;
        for (const auto& [wl, value] : v->items()) {
            int nm = 0;
            try {
                std::size_t used = 0;
                nm = std::stoi(wl, &used);
                if (used != wl.size()) {
                    throw std::invalid_argument(wl);
                }
            } catch (const std::exception&) {
                throw ScenarioError(field(key) + "." + wl, "key must be a wavelength in nm");
            }
            if (!value.is_number()) {
                throw ScenarioError(field(key) + "." + wl, "must be a number");
            }
            out[nm] = value.get<double>();
        }
        return out;
    }

    Reader child(const std::string& key) {
        const json* v = take(key, false);
        return Reader(*v, field(key));
    }

    void finish() const {
        for (const auto& item : node_.items()) {
            if (!used_.count(item.key())) {
                throw ScenarioError(field(item.key()), "unknown field");
            }
        }
    }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const json* take(const std::string& key, bool optional) {
        used_.insert(key);
        auto it = node_.find(key);
        if (it == node_.end()) {
            if (!optional) {
                throw ScenarioError(field(key), "missing required field");
            }
            return nullptr;
        }
        return &*it;
    }

    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

// Module validators report "section.field message"; lift the field out.
template <typename F>
void validated(F&& check) {
    try {
        check();
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        std::string what = e.what();
        const auto end = what.find_first_of(" :");
        throw ScenarioError(what.substr(0, end), what.substr(std::min(what.size(), end + 1)));
    }
}

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) {
        throw ScenarioError(field, message);
    }
}


}  // namespace

std::string to_string(Encoding encoding) {
    return encoding == Encoding::polarisation ? "polarisation" : "time_bin";
}

std::string Scenario::digest() const {
    const std::string canonical = document.dump();
    unsigned char hash[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), hash, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex += fmt::format("{:02x}", hash[i]);
    }
    return hex;
}

Scenario parse_scenario(const json& document, const std::filesystem::path& base_dir) {
    Scenario sc;
    sc.document = document;
    Reader root(document, "");
    sc.name = root.text("name", std::string("unnamed"));

    const std::string encoding = root.text("encoding");
    if (encoding == "polarisation") {
        sc.encoding = Encoding::polarisation;
    } else if (encoding == "time_bin") {
        sc.encoding = Encoding::time_bin;
    } else {
        throw ScenarioError("encoding", "must be polarisation or time_bin");
    }
    const auto n_decoys = root.integer("n_decoys");
    require(n_decoys == 1 || n_decoys == 2, "n_decoys", "must be 1 or 2");
    sc.protocol = n_decoys == 1 ? finite_key::DecoyProtocol::one_decoy
                                : finite_key::DecoyProtocol::two_decoy;

    {
        Reader r = root.child("orbit");
        sc.orbit.altitude_km = r.number("altitude_km");
        require(sc.orbit.altitude_km > 0.0, "orbit.altitude_km", "must be positive");
        if (r.has("inclination_deg")) {
            sc.orbit.inclination_deg = r.number("inclination_deg");
        } else {
            try {
                sc.orbit.inclination_deg = orbit::sso_inclination(sc.orbit.altitude_km);
            } catch (const std::domain_error& e) {
                throw ScenarioError("orbit.inclination_deg", e.what());
            }
        }
        r.finish();
        validated([&] { sc.orbit.validate(); });
    }
    {
        Reader r = root.child("station");
        sc.station.min_elevation_deg = r.number("min_elevation_deg", 20.0);
        sc.station.max_elevation_deg = r.number("max_elevation_deg", 80.0);
        sc.sample_dt_s = r.number("sample_dt_s", 1.0);
        r.finish();
        validated([&] { sc.station.validate(); });
        require(sc.sample_dt_s > 0.0, "station.sample_dt_s", "must be positive");
    }

    auto& hw = sc.hardware;
    {
        Reader r = root.child("transmitter");
        hw.tx.aperture_diam_m = r.number("aperture_diam_m", 0.085);
        hw.tx.truncation_ratio = r.number("truncation_ratio", link::kOptimalTruncationRatio);
        hw.tx.m_squared = r.number("m_squared", 1.2);
        hw.tx.wavelength_nm = r.number("wavelength_nm");
        hw.tx.pointing_loss_db = r.number("pointing_loss_db", 3.0);
        r.finish();
        validated([&] { hw.tx.validate(); });
        try {
            hw.tx.truncation_efficiency = link::truncation_efficiency(hw.tx.truncation_ratio);
        } catch (const std::domain_error& e) {
            throw ScenarioError("transmitter.truncation_ratio", e.what());
        }
    }
    {
        Reader r = root.child("receiver");
        try {
            hw.rx.coupling_mode = link::coupling_mode_from_string(r.text("coupling_mode"));
        } catch (const std::invalid_argument& e) {
            if (dynamic_cast<const ScenarioError*>(&e)) {
                throw;
            }
            throw ScenarioError("receiver.coupling_mode", "must be fiber_with_ao or free_space");
        }
        const bool fiber = hw.rx.coupling_mode == link::CouplingMode::fiber_with_ao;
        hw.rx.primary_diam_m = r.number("primary_diam_m", 0.8);
        hw.rx.obscuration_diam_m = r.number("obscuration_diam_m", 0.3);
        hw.rx.path_loss_db = r.number("path_loss_db", 1.0);
        hw.rx.coupling_loss_db = r.number("coupling_loss_db", fiber ? 5.0 : 0.0);
        hw.rx.field_stop_diam_um = r.number("field_stop_diam_um", 25.0);
        hw.rx.effective_focal_length_m = r.number("effective_focal_length_m", 2.0);
        hw.rx.filter_bandwidth_nm = r.number("filter_bandwidth_nm", 5.0);
        hw.rx.fiber_coupling_beta = r.number("fiber_coupling_beta", 1.12);
        r.finish();
        validated([&] { hw.rx.validate(); });
    }
    {
        Reader r = root.child("atmosphere");
        hw.atm.zenith_loss_db = r.wavelength_table("zenith_loss_db", hw.atm.zenith_loss_db);
        hw.atm.sky_radiance = r.wavelength_table("sky_radiance_w_m2_sr_nm", hw.atm.sky_radiance);
        if (r.has("override_table")) {
            std::filesystem::path table = r.text("override_table");
            if (table.is_relative() && !base_dir.empty()) {
                table = base_dir / table;
            }
            try {
                hw.atm.override_table = link::AtmosphereTable::load(table.string());
            } catch (const std::exception& e) {
                throw ScenarioError("atmosphere.override_table", e.what());
            }
        }
        r.finish();
        for (const auto& [wl, loss] : hw.atm.zenith_loss_db) {
            require(loss >= 0.0, "atmosphere.zenith_loss_db", "must be >= 0");
        }
        for (const auto& [wl, radiance] : hw.atm.sky_radiance) {
            require(radiance >= 0.0, "atmosphere.sky_radiance_w_m2_sr_nm", "must be >= 0");
        }
        const int wl = static_cast<int>(std::lround(hw.tx.wavelength_nm));
        require(hw.atm.override_table || hw.atm.zenith_loss_db.count(wl),
                "atmosphere.zenith_loss_db", fmt::format("has no entry for {} nm", wl));
        require(hw.atm.sky_radiance.count(wl) > 0, "atmosphere.sky_radiance_w_m2_sr_nm",
                fmt::format("has no entry for {} nm", wl));
    }
    {
        Reader r = root.child("detector");
        sc.detector_name = r.text("name", std::string("detector"));
        if (r.has("wavelength_nm")) {
            require(std::abs(r.number("wavelength_nm") - hw.tx.wavelength_nm) < 1e-9,
                    "detector.wavelength_nm", "does not match transmitter.wavelength_nm");
        }
        hw.det.efficiency = r.number("efficiency");
        hw.det.dark_count_rate_hz = r.number("dark_count_rate_hz");
        hw.det.dead_time_ns = r.number("dead_time_ns");
        hw.det.timing_jitter_ps = r.number("timing_jitter_ps", 0.0);
        hw.det.background_rate_hz = r.number("background_rate_hz");
        hw.det.n_detectors = static_cast<int>(r.integer("n_detectors", 2));
        hw.det.gate_width_ns = r.number("gate_width_ns", 1.0);
        r.finish();
        validated([&] { hw.det.validate(); });
    }
    {
        Reader r = root.child("source");
        const bool time_bin = sc.encoding == Encoding::time_bin;
        auto& src = hw.source;
        src.pulse_rate_hz = r.number("pulse_rate_hz");
        require(src.pulse_rate_hz > 0.0, "source.pulse_rate_hz", "must be positive");
        if (r.flag("hold_slot_rate", false) && time_bin) {
            // Three time slots per time-bin qubit.
            src.pulse_rate_hz /= 3.0;
        }
        src.misalignment_z = r.number("misalignment_z", time_bin ? 0.001 : 0.01);
        src.misalignment_x = r.number("misalignment_x", 0.01);
        const std::string basis = r.text("receiver_basis", std::string("active"));
        if (basis == "active") {
            hw.receiver_basis = optimizer::ReceiverBasis::active;
        } else if (basis == "passive") {
            hw.receiver_basis = optimizer::ReceiverBasis::passive;
        } else {
            throw ScenarioError("source.receiver_basis", "must be active or passive");
        }
        src.p_z_bob = r.number("p_z_bob", 0.5);
        require(src.p_z_bob > 0.0 && src.p_z_bob < 1.0, "source.p_z_bob", "must lie in (0, 1)");

        auto& p = sc.params;
        p.mu = r.number("mu", 0.6);
        p.nu = r.number("nu", 0.15);
        p.p_mu = r.number("p_mu", 0.8);
        p.p_nu = r.number("p_nu", n_decoys == 1 ? 1.0 - p.p_mu : 0.15);
        p.p_z = r.number("p_z", 0.9);
        p.min_elevation_deg = r.number(
            "min_elevation_deg", std::max(sc.station.min_elevation_deg, optimizer::kMinElevationLowDeg));
        r.finish();

        require(p.min_elevation_deg >= optimizer::kMinElevationLowDeg &&
                    p.min_elevation_deg <= optimizer::kMinElevationHighDeg,
                "source.min_elevation_deg", "must lie in [20, 80]");
        require(p.mu > 0.0 && p.mu <= 1.0, "source.mu", "must lie in (0, 1]");
        require(p.nu > 0.0 && p.nu < p.mu, "source.nu", "must satisfy 0 < nu < mu");
        require(p.p_mu > 0.0 && p.p_mu < 1.0, "source.p_mu", "must lie in (0, 1)");
        require(p.p_nu > 0.0 && p.p_nu < 1.0, "source.p_nu", "must lie in (0, 1)");
        if (n_decoys == 2) {
            require(p.p_mu + p.p_nu < 1.0, "source.p_nu", "p_mu + p_nu must be < 1 with a vacuum decoy");
        } else {
            require(std::abs(p.p_mu + p.p_nu - 1.0) < 1e-9, "source.p_nu",
                    "p_mu + p_nu must equal 1 for one decoy");
        }
        require(p.p_z > 0.0 && p.p_z < 1.0, "source.p_z", "must lie in (0, 1)");
        validated([&] { optimizer::apply_params(hw, p, sc.protocol).validate(); });
    }
    {
        Reader r = root.child("security");
        sc.security.eps_sec = r.number("eps_sec", 1e-9);
        sc.security.eps_corr = r.number("eps_corr", 1e-15);
        sc.security.f_ec = r.number("f_ec", 1.16);
        try {
            sc.security.bound = finite_key::statistical_bound_from_string(
                r.text("statistical_bound", std::string("hoeffding")));
        } catch (const ScenarioError&) {
            throw;
        } catch (const std::invalid_argument&) {
            throw ScenarioError("security.statistical_bound", "must be hoeffding or chernoff");
        }
        r.finish();
        validated([&] { sc.security.validate(); });
    }
    {
        Reader r = root.child("optimizer");
        sc.optimizer.coarse_grid_steps = static_cast<int>(r.integer("coarse_grid_steps", 8));
        sc.optimizer.refine_iterations = static_cast<int>(r.integer("refine_iterations", 4));
        sc.optimizer.rel_tolerance = r.number("rel_tolerance", 1e-3);
        const auto seed = r.integer("rng_seed", 1);
        require(seed >= 0, "optimizer.rng_seed", "must be >= 0");
        sc.optimizer.rng_seed = static_cast<std::uint64_t>(seed);
        sc.optimizer.random_starts = static_cast<int>(r.integer("random_starts", 4));
        r.finish();
        validated([&] { sc.optimizer.validate(); });
    }
    root.finish();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ScenarioError("scenario", "cannot open " + path.string());
    }
    json document;
    try {
        document = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ScenarioError("scenario", std::string("invalid JSON: ") + e.what());
    }
    return parse_scenario(document, path.parent_path());
}

std::string pass_csv(const orbit::PassGeometry& pass) {
    std::string out = "t_s,elevation_deg,slant_range_km\n";
    for (const auto& s : pass.samples) {
        out += fmt::format("{},{},{}\n", s.t_s, s.elevation_deg, s.slant_range_km);
    }
    return out;
}

orbit::PassGeometry parse_pass_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "t_s,elevation_deg,slant_range_km") {
        throw std::invalid_argument("pass CSV: unexpected header");
    }
    orbit::PassGeometry pass;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        orbit::PassSample s;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(row, cell, ',')) {
            values.push_back(std::stod(cell));
        }
        if (values.size() != 3) {
            throw std::invalid_argument("pass CSV: expected three columns");
        }
        pass.samples.push_back({values[0], values[1], values[2]});
    }
    if (pass.samples.size() >= 2) {
        pass.sample_dt_s = pass.samples[1].t_s - pass.samples[0].t_s;
    }
    return pass;
}

std::string budget_csv(const orbit::PassGeometry& pass,
                       const std::vector<link::LinkBudgetBreakdown>& budget) {
    std::string out =
        "t_s,elevation_deg,slant_range_km,tx_gain_db,free_space_loss_db,atmospheric_loss_db,"
        "pointing_loss_db,rx_area_gain_db,rx_path_loss_db,coupling_loss_db,total_db,eta\n";
    for (std::size_t i = 0; i < budget.size(); ++i) {
        const auto& b = budget[i];
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", pass.samples[i].t_s,
                           b.elevation_deg, b.slant_range_km, b.tx_gain_db, b.free_space_loss_db,
                           b.atmospheric_loss_db, b.pointing_loss_db, b.rx_area_gain_db,
                           b.rx_path_loss_db, b.coupling_loss_db, b.total_db, b.eta);
    }
    return out;
}

std::string sweep_csv(const std::vector<optimizer::SweepRow>& rows) {
    std::string out =
        "max_elevation_deg,pass_duration_s,skl_bits,aborted,min_elevation_deg,mu,nu,p_mu,p_nu,p_z\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.max_elevation_deg,
                           r.pass_duration_s, r.skl.skl_bits, r.skl.aborted ? 1 : 0,
                           r.params.min_elevation_deg, r.params.mu, r.params.nu, r.params.p_mu,
                           r.params.p_nu, r.params.p_z);
    }
    return out;
}

std::string trace_csv(const std::vector<optimizer::TraceEntry>& trace) {
    std::string out = "index,phase,mu,nu,p_mu,p_nu,p_z,min_elevation_deg,skl_bits\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& e = trace[i];
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", i, e.phase, e.params.mu, e.params.nu,
                           e.params.p_mu, e.params.p_nu, e.params.p_z,
                           e.params.min_elevation_deg, e.skl_real);
    }
    return out;
}

json to_json(const orbit::PassGeometry& pass) {
    json rows = json::array();
    for (const auto& s : pass.samples) {
        rows.push_back({{"t_s", s.t_s},
                        {"elevation_deg", s.elevation_deg},
                        {"slant_range_km", s.slant_range_km}});
    }
    return rows;
}

json to_json(const std::vector<link::LinkBudgetBreakdown>& budget) {
    json rows = json::array();
    for (const auto& b : budget) {
        rows.push_back({{"elevation_deg", b.elevation_deg},
                        {"slant_range_km", b.slant_range_km},
                        {"tx_gain_db", b.tx_gain_db},
                        {"free_space_loss_db", b.free_space_loss_db},
                        {"atmospheric_loss_db", b.atmospheric_loss_db},
                        {"pointing_loss_db", b.pointing_loss_db},
                        {"rx_area_gain_db", b.rx_area_gain_db},
                        {"rx_path_loss_db", b.rx_path_loss_db},
                        {"coupling_loss_db", b.coupling_loss_db},
                        {"total_db", b.total_db},
                        {"eta", b.eta}});
    }
    return rows;
}

json to_json(const optimizer::ParamVector& p) {
    return {{"mu", p.mu},     {"nu", p.nu},   {"p_mu", p.p_mu},
            {"p_nu", p.p_nu}, {"p_z", p.p_z}, {"min_elevation_deg", p.min_elevation_deg}};
}

json to_json(const finite_key::SklResult& r) {
    const auto& d = r.diagnostics;
    return {{"skl_bits", r.skl_bits},
            {"skl_real", r.skl_real},
            {"lambda_ec_bits", r.lambda_ec_bits},
            {"aborted", r.aborted},
            {"reason", r.reason},
            {"diagnostics",
             {{"n_z", d.n_z},
              {"q_z", d.q_z},
              {"s_z0", d.s_z0},
              {"s_z1", d.s_z1},
              {"phi", d.phi},
              {"h_phi", d.h_phi},
              {"sec_penalty_bits", d.sec_penalty_bits},
              {"corr_penalty_bits", d.corr_penalty_bits}}}};
}

json to_json(const finite_key::DecoyBounds& b) {
    return {{"tau0", b.tau0},         {"tau1", b.tau1},         {"s_z0_low", b.s_z0_low},
            {"s_z0_up", b.s_z0_up},   {"s_z1_low", b.s_z1_low}, {"s_x0_up", b.s_x0_up},
            {"s_x1_low", b.s_x1_low}, {"v_x1_up", b.v_x1_up},   {"phi_z_up", b.phi_z_up},
            {"aborted", b.aborted},   {"reason", b.reason}};
}

json to_json(const channel::TallySet& t) {
    auto arr = [](const std::array<double, channel::kIntensityCount>& a) {
        return json{{"signal", a[0]}, {"decoy", a[1]}, {"vacuum", a[2]}};
    };
    return {{"n_z", arr(t.n_z)},
            {"n_x", arr(t.n_x)},
            {"m_z", arr(t.m_z)},
            {"m_x", arr(t.m_x)},
            {"n_sent", t.n_sent}};
}

json to_json(const std::vector<optimizer::SweepRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"max_elevation_deg", r.max_elevation_deg},
                       {"pass_duration_s", r.pass_duration_s},
                       {"params", to_json(r.params)},
                       {"skl", to_json(r.skl)}});
    }
    return out;
}

json run_report(const Scenario* scenario, const std::string& command, std::uint64_t seed,
                json result) {
    json report;
    report["toolkit_version"] = kToolkitVersion;
    report["command"] = command;
    report["seed"] = seed;
    report["scenario_digest"] = scenario ? json(scenario->digest()) : json(nullptr);
    report["scenario_name"] = scenario ? json(scenario->name) : json(nullptr);
    report["result"] = std::move(result);
    return report;
}

}  // namespace satqkd::scenario
