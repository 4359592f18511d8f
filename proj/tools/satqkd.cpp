// Command-line driver: pass geometry, link budgets, key lengths, parameter
// optimisation, sweeps, Monte Carlo validation and the relay demo.
#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>

#include "satqkd/relay.hpp"
#include "satqkd/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace satqkd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStatistical = 1;
constexpr int kExitValidation = 2;
constexpr int kExitAborted = 3;

struct Options {
    std::string scenario_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format = "csv";

    std::optional<double> mu, nu, p_mu, p_nu, p_z, min_elevation;
    std::vector<double> max_elevations{30, 40, 50, 60, 70, 80, 90};
    int seeds = 10;
    double thinning = 1.0;
    std::vector<std::size_t> lengths{256, 1024, 4096};
};

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

void emit(const Options& opt, const std::string& file_name, const std::string& content) {
    std::cout << content;
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        std::ofstream out(fs::path(opt.out_dir) / file_name, std::ios::binary);
        out << content;
        if (!out) {
            throw std::runtime_error("cannot write " + file_name);
        }
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void require_json(const Options& opt, const std::string& command) {
    if (opt.format != "json") {
        throw ValidationError(command + " only supports --format json");
    }
}

scenario::Scenario load(const Options& opt) {
    if (opt.scenario_path.empty()) {
        throw ValidationError("--scenario is required");
    }
    auto sc = scenario::load_scenario(opt.scenario_path);
    if (opt.seed) {
        sc.optimizer.rng_seed = *opt.seed;
    }
    return sc;
}

std::uint64_t seed_of(const Options& opt, const scenario::Scenario& sc) {
    return opt.seed.value_or(sc.optimizer.rng_seed);
}

optimizer::ParamVector cli_params(const Options& opt, const scenario::Scenario& sc) {
    auto p = sc.params;
    if (opt.mu) p.mu = *opt.mu;
    if (opt.nu) p.nu = *opt.nu;
    if (opt.p_mu) p.p_mu = *opt.p_mu;
    if (opt.p_nu) p.p_nu = *opt.p_nu;
    else if (opt.p_mu && sc.protocol == finite_key::DecoyProtocol::one_decoy) p.p_nu = 1.0 - p.p_mu;
    if (opt.p_z) p.p_z = *opt.p_z;
    if (opt.min_elevation) p.min_elevation_deg = *opt.min_elevation;
    try {
        p.validate(sc.protocol);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    return p;
}

int cmd_pass(const Options& opt) {
    const auto sc = load(opt);
    const auto pass = orbit::synth_pass(sc.orbit, sc.station, sc.sample_dt_s);
    if (opt.format == "json") {
        emit(opt, "pass.json", dump(scenario::run_report(&sc, "pass", seed_of(opt, sc), scenario::to_json(pass))));
    } else {
        emit(opt, "pass.csv", scenario::pass_csv(pass));
    }
    return kExitOk;
}

int cmd_budget(const Options& opt) {
    const auto sc = load(opt);
    const auto& hw = sc.hardware;
    const auto pass = orbit::synth_pass(sc.orbit, sc.station, sc.sample_dt_s);
    const auto budget = link::pass_budget(pass, hw.tx, hw.rx, hw.atm);
    if (opt.format == "json") {
        emit(opt, "budget.json",
             dump(scenario::run_report(&sc, "budget", seed_of(opt, sc), scenario::to_json(budget))));
    } else {
        emit(opt, "budget.csv", scenario::budget_csv(pass, budget));
    }
    return kExitOk;
}

int cmd_skl(const Options& opt) {
    require_json(opt, "skl");
    const auto sc = load(opt);
    const auto params = cli_params(opt, sc);
    const auto pass = orbit::synth_pass(sc.orbit, sc.station, sc.sample_dt_s);
    const auto ev = optimizer::evaluate_params(pass, sc.hardware, sc.security, sc.protocol, params);
    const auto source = optimizer::apply_params(sc.hardware, params, sc.protocol);
    const auto bounds = finite_key::decoy_bounds(ev.tallies, source.mix, sc.security, sc.protocol);
    json result{{"params", scenario::to_json(params)},
                {"skl", scenario::to_json(ev.skl)},
                {"bounds", scenario::to_json(bounds)},
                {"tallies", scenario::to_json(ev.tallies)}};
    emit(opt, "skl.json", dump(scenario::run_report(&sc, "skl", seed_of(opt, sc), result)));
    return ev.skl.aborted ? kExitAborted : kExitOk;
}

int cmd_optimize(const Options& opt) {
    require_json(opt, "optimize");
    const auto sc = load(opt);
    const auto pass = orbit::synth_pass(sc.orbit, sc.station, sc.sample_dt_s);
    const auto res =
        optimizer::optimize_pass(pass, sc.hardware, sc.security, sc.protocol, sc.optimizer);
    json trace_path = nullptr;
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        const auto path = fs::path(opt.out_dir) / "optimize_trace.csv";
        std::ofstream out(path, std::ios::binary);
        out << scenario::trace_csv(res.trace);
        trace_path = "optimize_trace.csv";
    }
    json result{{"params", scenario::to_json(res.params)},
                {"skl", scenario::to_json(res.skl)},
                {"tallies", scenario::to_json(res.tallies)},
                {"evaluations", res.trace.size()},
                {"trace_path", trace_path}};
    emit(opt, "optimize.json", dump(scenario::run_report(&sc, "optimize", seed_of(opt, sc), result)));
    return res.all_aborted || res.skl.aborted ? kExitAborted : kExitOk;
}

int cmd_sweep(const Options& opt) {
    const auto sc = load(opt);
    const auto rows = optimizer::sweep_max_elevation(
        sc.orbit, sc.station.min_elevation_deg, opt.max_elevations, sc.hardware, sc.security,
        sc.protocol, sc.optimizer, sc.sample_dt_s);
    if (opt.format == "json") {
        emit(opt, "sweep_elevation.json",
             dump(scenario::run_report(&sc, "sweep-elevation", seed_of(opt, sc), scenario::to_json(rows))));
    } else {
        emit(opt, "sweep_elevation.csv", scenario::sweep_csv(rows));
    }
    return kExitOk;
}

int cmd_mc_validate(const Options& opt) {
    require_json(opt, "mc-validate");
    if (opt.seeds < 1) {
        throw ValidationError("--seeds must be >= 1");
    }
    if (!(opt.thinning >= 1.0)) {
        throw ValidationError("--thinning must be >= 1");
    }
    const auto sc = load(opt);
    const auto params = cli_params(opt, sc);
    const auto first_seed = opt.seed.value_or(1);
    const auto pass = orbit::synth_pass(sc.orbit, sc.station, sc.sample_dt_s);
    const auto budget = link::pass_budget(pass, sc.hardware.tx, sc.hardware.rx, sc.hardware.atm);
    const auto source = optimizer::apply_params(sc.hardware, params, sc.protocol);
    const auto expected = channel::expected_tallies(pass, budget, source, sc.hardware.det,
                                                    params.min_elevation_deg, opt.thinning);
    json runs = json::array();
    std::size_t outside = 0;
    std::size_t compared = 0;
    for (int i = 0; i < opt.seeds; ++i) {
        const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
        const auto mc = channel::monte_carlo_tallies(seed, pass, budget, source, sc.hardware.det,
                                                     params.min_elevation_deg, opt.thinning);
        json fields = json::object();
        double worst = 0.0;
        for (const auto& d : channel::compare_tallies(expected, mc.tallies)) {
            const bool ok = std::abs(d.z_score) <= 3.0;
            outside += ok ? 0 : 1;
            ++compared;
            worst = std::max(worst, std::abs(d.z_score));
            fields[d.field] = {{"expected", d.expected},
                               {"observed", d.observed},
                               {"z_score", d.z_score},
                               {"within_3_sigma", ok}};
        }
        runs.push_back({{"seed", seed}, {"max_abs_z", worst}, {"fields", fields}});
    }
    json result{{"params", scenario::to_json(params)},
                {"thinning", opt.thinning},
                {"expected", scenario::to_json(expected)},
                {"runs", runs},
                {"comparisons", compared},
                {"outside_3_sigma", outside},
                {"pass", outside == 0}};
    emit(opt, "mc_validate.json", dump(scenario::run_report(&sc, "mc-validate", first_seed, result)));
    return outside == 0 ? kExitOk : kExitStatistical;
}

int cmd_relay_demo(const Options& opt) {
    require_json(opt, "relay-demo");
    if (opt.lengths.empty()) {
        throw ValidationError("--lengths must not be empty");
    }
    const std::uint64_t seed = opt.seed.value_or(1);
    std::mt19937_64 rng(seed);
    relay::KeyStore store;
    json rounds = json::array();
    bool all_ok = true;
    for (const auto n : opt.lengths) {
        if (n == 0) {
            throw ValidationError("--lengths entries must be positive");
        }
        auto k_a = relay::BitString::random(n, rng);
        auto k_b = relay::BitString::random(n, rng);
        const auto id_a = store.store_key("OGS-A", k_a);
        const auto id_b = store.store_key("OGS-B", k_b);
        const auto consumed_before = store.bits_consumed();
        const auto msg = store.combine_and_broadcast(id_a, id_b);
        const auto recovered = relay::recover(k_b, msg);
        const bool match = recovered == k_a;
        const bool erased =
            store.records_holding(k_a).empty() && store.records_holding(k_b).empty();
        const auto consumed = store.bits_consumed() - consumed_before;
        all_ok = all_ok && match && erased && consumed == 2 * n;
        rounds.push_back({{"n_bits", n},
                          {"key_id_a", id_a},
                          {"key_id_b", id_b},
                          {"payload_hex", msg.payload.to_hex()},
                          {"recovered_equals_k_a", match},
                          {"inputs_erased", erased},
                          {"bits_consumed", consumed}});
        k_a.wipe();
        k_b.wipe();
    }
    json result{{"rounds", rounds},
                {"bits_consumed", store.bits_consumed()},
                {"bits_relayed", store.bits_relayed()},
                {"ok", all_ok},
                {"snapshot", nullptr}};
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        std::ofstream out(fs::path(opt.out_dir) / "relay_snapshot.bin", std::ios::binary);
        store.save(out);
        result["snapshot"] = "relay_snapshot.bin";
    }
    emit(opt, "relay_demo.json", dump(scenario::run_report(nullptr, "relay-demo", seed, result)));
    return all_ok ? kExitOk : kExitStatistical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Satellite QKD mission analysis"};
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* sub, const std::string& default_format) {
        opt.format = default_format;
        sub->add_option("--scenario", opt.scenario_path, "Scenario JSON file");
        sub->add_option("--seed", opt.seed, "Random seed");
        sub->add_option("--out", opt.out_dir, "Directory for output files");
        sub->add_option("--format", opt.format, "Output format")
            ->check(CLI::IsMember({"csv", "json"}));
    };
    auto param_flags = [&](CLI::App* sub) {
        sub->add_option("--mu", opt.mu, "Signal intensity");
        sub->add_option("--nu", opt.nu, "Decoy intensity");
        sub->add_option("--p-mu", opt.p_mu, "Signal probability");
        sub->add_option("--p-nu", opt.p_nu, "Decoy probability");
        sub->add_option("--p-z", opt.p_z, "Key-basis probability");
        sub->add_option("--min-elevation", opt.min_elevation, "Elevation cut in degrees");
    };

    std::map<CLI::App*, std::function<int(const Options&)>> handlers;
    auto add = [&](const std::string& name, const std::string& about,
                   std::function<int(const Options&)> fn) {
        auto* sub = app.add_subcommand(name, about);
        handlers[sub] = std::move(fn);
        return sub;
    };

    auto* pass = add("pass", "Pass time series (t_s, elevation_deg, slant_range_km)", cmd_pass);
    auto* budget = add("budget", "Link budget breakdown per pass sample", cmd_budget);
    auto* skl = add("skl", "Secure key length for fixed parameters", cmd_skl);
    auto* optimize = add("optimize", "Optimise protocol parameters over the pass", cmd_optimize);
    auto* sweep = add("sweep-elevation", "Optimised key length against maximum elevation", cmd_sweep);
    auto* mc = add("mc-validate", "Monte Carlo tallies against the analytic expectation",
                   cmd_mc_validate);
    auto* relay_demo = add("relay-demo", "Trusted-node XOR relay transcript", cmd_relay_demo);

    // Defaults are fixed per subcommand before parsing.
    for (auto* sub : {pass, budget, sweep}) {
        sub->preparse_callback([&](std::size_t) { opt.format = "csv"; });
    }
    for (auto* sub : {skl, optimize, mc, relay_demo}) {
        sub->preparse_callback([&](std::size_t) { opt.format = "json"; });
    }
    for (auto* sub : {pass, budget, skl, optimize, sweep, mc, relay_demo}) {
        common(sub, "csv");
    }
    param_flags(skl);
    param_flags(mc);
    sweep->add_option("--max-elevations", opt.max_elevations, "Maximum elevations in degrees")
        ->delimiter(',');
    mc->add_option("--seeds", opt.seeds, "Number of consecutive seeds");
    mc->add_option("--thinning", opt.thinning, "Divide the pulse count by this factor");
    relay_demo->add_option("--lengths", opt.lengths, "Key lengths in bits")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        for (auto& [sub, fn] : handlers) {
            if (sub->parsed()) {
                return fn(opt);
            }
        }
    } catch (const scenario::ScenarioError& e) {
        std::cerr << "invalid scenario: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}
