#include "satqkd/pass_optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

namespace satqkd::optimizer {

using finite_key::DecoyProtocol;

namespace {

constexpr std::size_t kDims = 5;
using Unit = std::array<double, kDims>;

constexpr double kMuLow = 0.1;
constexpr double kMuHigh = 1.0;
constexpr double kNuLow = 0.01;
constexpr double kNuGap = 0.01;
constexpr double kProbLow = 0.01;
constexpr double kProbHigh = 0.99;
constexpr double kPzLow = 0.5;

// Maps the unit cube onto the feasible parameter box. The decoy intensity is
// a fraction of the room below mu, and p_nu a fraction of 1 - p_mu, so every
// point of the cube is feasible.
ParamVector from_unit(const Unit& u, DecoyProtocol protocol) {
    ParamVector p;
    p.mu = kMuLow + (kMuHigh - kMuLow) * u[0];
    p.nu = kNuLow + (p.mu - kNuLow - kNuGap) * u[1];
    p.p_mu = kProbLow + (kProbHigh - kProbLow) * u[2];
    if (protocol == DecoyProtocol::two_decoy) {
        p.p_nu = (1.0 - p.p_mu) * (kProbLow + (kProbHigh - kProbLow) * u[3]);
    } else {
        p.p_nu = 1.0 - p.p_mu;
    }
    p.p_z = kPzLow + (kProbHigh - kPzLow) * u[4];
    return p;
}

std::vector<std::size_t> active_dims(DecoyProtocol protocol) {
    if (protocol == DecoyProtocol::two_decoy) {
        return {0, 1, 2, 3, 4};
    }
    return {0, 1, 2, 4};
}

using Observer = std::function<void(const Unit&, double, bool grid)>;

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tolerance, double& best_x) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tolerance) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if (fc >= fd) {
        best_x = c;
        return fc;
    }
    best_x = d;
    return fd;
}

struct Maximum {
    Unit u{};
    double value = -1.0;
};

// Grid scan followed by coordinate-wise golden-section refinement from the
// best grid points and a few seeded random starts.
Maximum maximize(const std::function<double(const Unit&)>& objective,
                 const std::vector<std::size_t>& dims, const OptimizerConfig& config,
                 const Observer& observe) {
    const int steps = config.coarse_grid_steps;
    std::vector<Maximum> grid_points;
    std::vector<int> counter(dims.size(), 0);
    Unit u;
    u.fill(0.5);
    for (;;) {
        for (std::size_t j = 0; j < dims.size(); ++j) {
            u[dims[j]] = (counter[j] + 0.5) / steps;
        }
        const double value = objective(u);
        if (observe) {
            observe(u, value, true);
        }
        grid_points.push_back({u, value});
        std::size_t j = 0;
        while (j < dims.size() && ++counter[j] == steps) {
            counter[j] = 0;
            ++j;
        }
        if (j == dims.size()) {
            break;
        }
    }

    // Stable: ties keep grid order, so the scan order decides.
    std::vector<std::size_t> order(grid_points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return grid_points[a].value > grid_points[b].value;
    });

    Maximum best = grid_points[order.front()];
    std::vector<Maximum> starts;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, order.size()); ++i) {
        starts.push_back(grid_points[order[i]]);
    }
    std::mt19937_64 rng(config.rng_seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int i = 0; i < config.random_starts; ++i) {
        Unit r;
        r.fill(0.5);
        for (std::size_t d : dims) {
            r[d] = uniform(rng);
        }
        const double value = objective(r);
        if (observe) {
            observe(r, value, false);
        }
        starts.push_back({r, value});
    }

    for (Maximum point : starts) {
        double width = 1.0 / steps;
        for (int sweep = 0; sweep < config.refine_iterations; ++sweep) {
            const double before = point.value;
            for (std::size_t d : dims) {
                Unit probe = point.u;
                auto along = [&](double x) {
                    probe[d] = x;
                    const double value = objective(probe);
                    if (observe) {
                        observe(probe, value, false);
                    }
                    return value;
                };
                double x = point.u[d];
                const double value =
                    golden_section_max(along, std::max(0.0, point.u[d] - width),
                                       std::min(1.0, point.u[d] + width),
                                       config.rel_tolerance, x);
                if (value > point.value) {
                    point.value = value;
                    point.u[d] = x;
                }
            }
            width *= 0.5;
            if (point.value <= before * (1.0 + config.rel_tolerance)) {
                break;
            }
        }
        if (point.value > best.value) {
            best = point;
        }
    }
    return best;
}

std::vector<double> elevation_cuts() {
    std::vector<double> cuts;
    const int n = static_cast<int>(
        std::lround((kMinElevationHighDeg - kMinElevationLowDeg) / kMinElevationStepDeg));
    for (int i = 0; i <= n; ++i) {
        cuts.push_back(kMinElevationLowDeg + i * kMinElevationStepDeg);
    }
    return cuts;
}

// Pass objective with the elevation cut maximised exhaustively. Samples are
// accumulated from the culmination outwards so every cut is a prefix sum.
class PassObjective {
public:
    PassObjective(const orbit::PassGeometry& pass, const Hardware& hw,
                  const finite_key::SecurityParams& security, DecoyProtocol protocol)
        : pass_(pass), hw_(hw), security_(security), protocol_(protocol), cuts_(elevation_cuts()) {
        budget_ = link::pass_budget(pass, hw.tx, hw.rx, hw.atm);
        order_.resize(pass.samples.size());
        std::iota(order_.begin(), order_.end(), 0);
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            return pass.samples[a].elevation_deg > pass.samples[b].elevation_deg;
        });
        for (double cut : cuts_) {
            std::size_t count = 0;
            while (count < order_.size() && pass.samples[order_[count]].elevation_deg >= cut) {
                ++count;
            }
            cut_counts_.push_back(count);
        }
    }

    Evaluation evaluate(ParamVector params) const {
        const auto source = apply_params(hw_, params, protocol_);
        const auto per_sample =
            channel::per_sample_tallies(budget_, pass_.sample_dt_s, source, hw_.det);
        std::vector<channel::TallySet> prefix(order_.size() + 1);
        for (std::size_t i = 0; i < order_.size(); ++i) {
            prefix[i + 1] = prefix[i];
            prefix[i + 1] += per_sample[order_[i]];
        }

        Evaluation best;
        bool have = false;
        for (std::size_t j = 0; j < cuts_.size(); ++j) {
            const auto& tallies = prefix[cut_counts_[j]];
            auto skl = finite_key::evaluate(tallies, source.mix, security_, protocol_);
            if (!have || skl.skl_real > best.skl.skl_real) {
                params.min_elevation_deg = cuts_[j];
                best = {params, tallies, std::move(skl)};
                have = true;
            }
        }
        return best;
    }

private:
    const orbit::PassGeometry& pass_;
    const Hardware& hw_;
    finite_key::SecurityParams security_;
    DecoyProtocol protocol_;
    std::vector<double> cuts_;
    std::vector<link::LinkBudgetBreakdown> budget_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> cut_counts_;
};

}  // namespace

void ParamVector::validate(DecoyProtocol protocol) const {
    if (!(nu > 0.0 && nu < mu && mu <= 1.0)) {
        throw std::invalid_argument("params: need 0 < nu < mu <= 1");
    }
    if (!(p_mu > 0.0 && p_nu > 0.0)) {
        throw std::invalid_argument("params: p_mu and p_nu must be positive");
    }
    if (protocol == DecoyProtocol::two_decoy) {
        if (!(p_mu + p_nu < 1.0)) {
            throw std::invalid_argument("params: p_mu + p_nu must be < 1 with a vacuum decoy");
        }
    } else if (std::abs(p_mu + p_nu - 1.0) > 1e-9) {
        throw std::invalid_argument("params: p_mu + p_nu must equal 1 for one decoy");
    }
    if (!(p_z > 0.0 && p_z < 1.0)) {
        throw std::invalid_argument("params: p_z must lie in (0, 1)");
    }
    if (!(min_elevation_deg >= kMinElevationLowDeg && min_elevation_deg <= kMinElevationHighDeg)) {
        throw std::invalid_argument("params: min_elevation_deg must lie in [20, 80]");
    }
}

void OptimizerConfig::validate() const {
    if (coarse_grid_steps < 1) {
        throw std::invalid_argument("optimizer.coarse_grid_steps must be positive");
    }
    if (refine_iterations < 0) {
        throw std::invalid_argument("optimizer.refine_iterations must be >= 0");
    }
    if (!(rel_tolerance > 0.0)) {
        throw std::invalid_argument("optimizer.rel_tolerance must be positive");
    }
    if (random_starts < 0) {
        throw std::invalid_argument("optimizer.random_starts must be >= 0");
    }
}

channel::SourceSpec apply_params(const Hardware& hw, const ParamVector& params,
                                 DecoyProtocol protocol) {
    channel::SourceSpec source = hw.source;
    source.mix.mu = params.mu;
    source.mix.nu = params.nu;
    source.mix.p_mu = params.p_mu;
    source.mix.p_nu = params.p_nu;
    source.mix.vacuum = protocol == DecoyProtocol::two_decoy;
    source.p_z_alice = params.p_z;
    if (hw.receiver_basis == ReceiverBasis::active) {
        source.p_z_bob = params.p_z;
    }
    return source;
}

Evaluation evaluate_params(const orbit::PassGeometry& pass, const Hardware& hw,
                           const finite_key::SecurityParams& security, DecoyProtocol protocol,
                           const ParamVector& params) {
    params.validate(protocol);
    const auto source = apply_params(hw, params, protocol);
    const auto budget = link::pass_budget(pass, hw.tx, hw.rx, hw.atm);
    Evaluation out;
    out.params = params;
    out.tallies =
        channel::expected_tallies(pass, budget, source, hw.det, params.min_elevation_deg);
    out.skl = finite_key::evaluate(out.tallies, source.mix, security, protocol);
    return out;
}

OptimizeResult optimize_pass(const orbit::PassGeometry& pass, const Hardware& hw,
                             const finite_key::SecurityParams& security, DecoyProtocol protocol,
                             const OptimizerConfig& config) {
    config.validate();
    security.validate();
    OptimizeResult result;
    if (pass.empty()) {
        result.params = from_unit(Unit{0.5, 0.5, 0.5, 0.5, 0.5}, protocol);
        result.skl.aborted = true;
        result.skl.reason = "empty pass";
        return result;
    }

    const PassObjective objective(pass, hw, security, protocol);
    // The trace needs the chosen cut of each probe; cache the last probe so
    // the observer does not evaluate it twice.
    std::optional<std::pair<Unit, Evaluation>> last;
    auto evaluate_cached = [&](const Unit& u) -> const Evaluation& {
        if (!last || last->first != u) {
            last.emplace(u, objective.evaluate(from_unit(u, protocol)));
        }
        return last->second;
    };
    const Maximum best = maximize(
        [&](const Unit& u) { return evaluate_cached(u).skl.skl_real; }, active_dims(protocol),
        config, [&](const Unit& u, double value, bool grid) {
            result.trace.push_back(
                {grid ? "grid" : "refine", evaluate_cached(u).params, value});
        });

    const Evaluation final_eval = objective.evaluate(from_unit(best.u, protocol));
    result.params = final_eval.params;
    result.skl = final_eval.skl;
    result.tallies = final_eval.tallies;
    result.all_aborted = std::all_of(result.trace.begin(), result.trace.end(),
                                     [](const TraceEntry& e) { return !(e.skl_real > 0.0); });
    return result;
}

std::vector<ProfilePoint> pointwise_asymptotic_profile(const orbit::PassGeometry& pass,
                                                       const Hardware& hw,
                                                       const finite_key::SecurityParams& security,
                                                       const OptimizerConfig& config) {
    config.validate();
    const auto budget = link::pass_budget(pass, hw.tx, hw.rx, hw.atm);
    const auto dims = active_dims(DecoyProtocol::two_decoy);
    std::vector<ProfilePoint> out;
    out.reserve(pass.samples.size());
    for (std::size_t s = 0; s < pass.samples.size(); ++s) {
        const double eta = budget[s].eta;
        auto rate = [&](const Unit& u) {
            const auto source = apply_params(hw, from_unit(u, DecoyProtocol::two_decoy),
                                             DecoyProtocol::two_decoy);
            return finite_key::asymptotic_skr(eta, source, hw.det, security);
        };
        const Maximum best = maximize(rate, dims, config, nullptr);
        ProfilePoint point;
        point.t_s = pass.samples[s].t_s;
        point.elevation_deg = pass.samples[s].elevation_deg;
        point.skr_per_pulse = std::max(0.0, best.value);
        point.params = from_unit(best.u, DecoyProtocol::two_decoy);
        out.push_back(point);
    }
    return out;
}

std::vector<SweepRow> sweep_max_elevation(const orbit::OrbitSpec& orbit, double min_elevation_deg,
                                          const std::vector<double>& max_elevations_deg,
                                          const Hardware& hw,
                                          const finite_key::SecurityParams& security,
                                          DecoyProtocol protocol, const OptimizerConfig& config,
                                          double sample_dt_s) {
    std::vector<SweepRow> rows;
    for (double max_elevation : max_elevations_deg) {
        if (!(max_elevation > 0.0 && max_elevation <= 90.0)) {
            throw std::invalid_argument("sweep: max elevations must lie in (0, 90]");
        }
        SweepRow row;
        row.max_elevation_deg = max_elevation;
        if (max_elevation <= min_elevation_deg) {
            row.params = from_unit(Unit{0.5, 0.5, 0.5, 0.5, 0.5}, protocol);
            row.skl.aborted = true;
            row.skl.reason = "empty pass";
            rows.push_back(row);
            continue;
        }
        const auto pass =
            orbit::synth_pass(orbit, {min_elevation_deg, max_elevation}, sample_dt_s);
        const auto opt = optimize_pass(pass, hw, security, protocol, config);
        row.pass_duration_s = pass.duration_s();
        row.params = opt.params;
        row.skl = opt.skl;
        rows.push_back(row);
    }
    return rows;
}

LongTermRate long_term_rate(const orbit::OrbitSpec& orbit, const orbit::GroundStation& station,
                            const Hardware& hw, const finite_key::SecurityParams& security,
                            DecoyProtocol protocol, const OptimizerConfig& config,
                            double sample_dt_s) {
    const auto pass = orbit::synth_pass(orbit, station, sample_dt_s);
    const auto opt = optimize_pass(pass, hw, security, protocol, config);
    LongTermRate out;
    out.altitude_km = orbit.altitude_km;
    out.skl_bits = opt.skl.skl_bits;
    out.pass_duration_s = pass.duration_s();
    out.availability = orbit::coverage_and_availability(orbit.altitude_km).availability;
    out.rate_bps = out.pass_duration_s > 0.0
                       ? out.skl_bits / out.pass_duration_s * out.availability
                       : 0.0;
    return out;
}

}  // namespace satqkd::optimizer
