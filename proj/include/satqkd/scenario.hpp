// Declarative scenario documents and the tabular/JSON outputs of the CLI.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "satqkd/finite_key.hpp"
#include "satqkd/link_budget.hpp"
#include "satqkd/orbit.hpp"
#include "satqkd/pass_optimizer.hpp"
#include "satqkd/photon_channel.hpp"

namespace satqkd::scenario {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Rejected scenario content. `field()` is the dotted path of the culprit.
class ScenarioError : public std::invalid_argument {
public:
    ScenarioError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class Encoding { polarisation, time_bin };

struct Scenario {
    std::string name;
    Encoding encoding = Encoding::polarisation;
    finite_key::DecoyProtocol protocol = finite_key::DecoyProtocol::two_decoy;
    orbit::OrbitSpec orbit;
    orbit::GroundStation station;
    double sample_dt_s = 1.0;
    std::string detector_name;
    optimizer::Hardware hardware;
    /// Parameters used by `skl` when none are given on the command line.
    optimizer::ParamVector params;
    finite_key::SecurityParams security;
    optimizer::OptimizerConfig optimizer;
    /// The document as loaded; its dump has sorted keys.
    nlohmann::json document;

    /// SHA-256 of the canonical document, hex encoded.
    std::string digest() const;
};

/// Relative paths inside the document (the atmosphere table) resolve
/// against `base_dir`.
Scenario parse_scenario(const nlohmann::json& document,
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

std::string to_string(Encoding encoding);

// ---------------------------------------------------------------------------
// Output formats

/// Comma separated, header row, LF endings, shortest round-trip decimals.
std::string pass_csv(const orbit::PassGeometry& pass);
orbit::PassGeometry parse_pass_csv(const std::string& text);

std::string budget_csv(const orbit::PassGeometry& pass,
                       const std::vector<link::LinkBudgetBreakdown>& budget);
std::string sweep_csv(const std::vector<optimizer::SweepRow>& rows);
std::string trace_csv(const std::vector<optimizer::TraceEntry>& trace);

nlohmann::json to_json(const orbit::PassGeometry& pass);
nlohmann::json to_json(const std::vector<link::LinkBudgetBreakdown>& budget);
nlohmann::json to_json(const optimizer::ParamVector& params);
nlohmann::json to_json(const finite_key::SklResult& skl);
nlohmann::json to_json(const finite_key::DecoyBounds& bounds);
nlohmann::json to_json(const channel::TallySet& tallies);
nlohmann::json to_json(const std::vector<optimizer::SweepRow>& rows);

/// Envelope shared by every JSON report.
nlohmann::json run_report(const Scenario* scenario, const std::string& command,
                          std::uint64_t seed, nlohmann::json result);

}  // namespace satqkd::scenario
