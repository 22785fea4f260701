#include "hadm/prognostics/prognostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <thread>

#include "hadm/core/errors.hpp"
#include "hadm/core/format.hpp"

namespace hadm::prognostics {

namespace {

bool finite_all(std::initializer_list<double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// Health comparisons absorb the rounding of repeated step subtraction.
double event_level(const DegradationModel& model, const EventThreshold& threshold) {
    return threshold.min_health + 1e-9 * std::max(1.0, model.initial_health);
}

void check_threshold(const DegradationModel& model, const EventThreshold& threshold) {
    if (!std::isfinite(threshold.min_health) || threshold.min_health >= model.initial_health) {
        throw ConfigError("event threshold must be finite and below the initial health");
    }
}

std::size_t window_steps(const DegradationModel& model, const PrognosisRequest& req) {
    return static_cast<std::size_t>(std::floor(req.horizon / model.dt + 1e-9));
}

double step_health(const DegradationModel& model, double start, std::size_t steps, std::size_t high) {
    return start - static_cast<double>(steps) * model.nominal_step_loss() - static_cast<double>(high) * model.extra_loss;
}

EolDistribution from_counts(const std::vector<std::size_t>& counts, std::size_t residual, std::size_t samples,
                            const DegradationModel& model, const PrognosisRequest& req) {
    EolDistribution d;
    const double n = static_cast<double>(samples);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) continue;
        d.events.push_back({k, req.prediction_time + static_cast<double>(k) * model.dt, static_cast<double>(counts[k]) / n});
    }
    d.residual = static_cast<double>(residual) / n;
    return d;
}

}  // namespace

void DegradationModel::validate() const {
    if (!finite_all({initial_health, nominal_rate, high_rate_probability, extra_loss, dt})) {
        throw ConfigError("degradation parameters must be finite");
    }
    if (initial_health <= 0.0) throw ConfigError("initial health must be positive");
    if (nominal_rate <= 0.0) throw ConfigError("nominal degradation rate must be positive");
    if (extra_loss < 0.0) throw ConfigError("extra loss must be nonnegative");
    if (high_rate_probability < 0.0 || high_rate_probability > 1.0) {
        throw ConfigError("high-rate probability must lie in [0,1]");
    }
    if (dt <= 0.0) throw ConfigError("step duration must be positive");
}

void PrognosisRequest::validate() const {
    if (!finite_all({health_fraction, prediction_time, horizon})) throw ConfigError("prognosis request must be finite");
    if (health_fraction <= 0.0 || health_fraction > 1.0) throw ConfigError("health fraction must lie in (0,1]");
    if (horizon <= 0.0) throw ConfigError("prediction horizon must be positive");
    if (prediction_time < 0.0) throw ConfigError("prediction time must be nonnegative");
}

double EolDistribution::total_mass() const {
    double m = residual;
    for (const auto& e : events) m += e.probability;
    return m;
}

double EolDistribution::mean_step() const {
    double mass = 0.0;
    double weighted = 0.0;
    for (const auto& e : events) {
        mass += e.probability;
        weighted += e.probability * static_cast<double>(e.step);
    }
    if (mass == 0.0) throw DomainError("event never fires inside the prediction window");
    return weighted / mass;
}

std::optional<std::size_t> EolDistribution::min_step() const {
    if (events.empty()) return std::nullopt;
    return events.front().step;
}

std::optional<std::size_t> EolDistribution::max_step() const {
    if (events.empty()) return std::nullopt;
    return events.back().step;
}

double EolDistribution::probability_at(std::size_t step) const {
    for (const auto& e : events) {
        if (e.step == step) return e.probability;
    }
    return 0.0;
}

double eol_deterministic(const DegradationModel& model, const PrognosisRequest& req) {
    model.validate();
    req.validate();
    return req.health_fraction * model.initial_health / model.nominal_rate;
}

double eol_stochastic(const DegradationModel& model, const PrognosisRequest& req) {
    model.validate();
    req.validate();
    return req.health_fraction * model.initial_health / model.expected_rate();
}

double sigma(const DegradationModel& model, const PrognosisRequest& req) {
    return std::abs(eol_deterministic(model, req) - eol_stochastic(model, req));
}

std::optional<double> max_prediction_health(const DegradationModel& model, double sigma_max) {
    model.validate();
    if (!std::isfinite(sigma_max) || sigma_max < 0.0) throw ConfigError("sigma_max must be finite and nonnegative");
    if (model.high_rate_probability * model.extra_loss == 0.0) return std::nullopt;
    const double per_unit = model.initial_health * std::abs(1.0 / model.nominal_rate - 1.0 / model.expected_rate());
    return std::min(1.0, sigma_max / per_unit);
}

double nominal_prediction_time(const DegradationModel& model, double health_fraction) {
    model.validate();
    if (!(health_fraction > 0.0 && health_fraction <= 1.0)) throw ConfigError("health fraction must lie in (0,1]");
    return (1.0 - health_fraction) * model.initial_health / model.nominal_rate;
}

double rul(const DegradationModel& model, const PrognosisRequest& req, const EventThreshold& threshold) {
    model.validate();
    req.validate();
    check_threshold(model, threshold);
    const double remaining = req.health_fraction * model.initial_health - threshold.min_health;
    return std::max(0.0, remaining / model.nominal_rate);
}

EolDistribution eol_distribution(const DegradationModel& model, const PrognosisRequest& req,
                                 const EventThreshold& threshold, std::size_t node_cap) {
    model.validate();
    req.validate();
    check_threshold(model, threshold);
    const double start = req.health_fraction * model.initial_health;
    const double level = event_level(model, threshold);
    const std::size_t steps = window_steps(model, req);
    const double p = model.high_rate_probability;

    EolDistribution d;
    auto absorb = [&](std::size_t step, double mass) {
        if (mass == 0.0) return;
        if (!d.events.empty() && d.events.back().step == step) {
            d.events.back().probability += mass;
        } else {
            d.events.push_back({step, req.prediction_time + static_cast<double>(step) * model.dt, mass});
        }
    };

    if (start <= level) {
        absorb(0, 1.0);
        return d;
    }
    // alive[j]: probability of having taken j high-rate steps without the event.
    std::vector<double> alive{1.0};
    std::size_t nodes = 1;
    for (std::size_t n = 1; n <= steps; ++n) {
        std::vector<double> next(alive.size() + 1, 0.0);
        for (std::size_t j = 0; j < alive.size(); ++j) {
            if (alive[j] == 0.0) continue;
            next[j] += alive[j] * (1.0 - p);
            next[j + 1] += alive[j] * p;
        }
        nodes += next.size();
        if (nodes > node_cap) throw ResourceError("prognosis exceeded the node cap of " + std::to_string(node_cap));
        for (std::size_t j = 0; j < next.size(); ++j) {
            if (next[j] != 0.0 && step_health(model, start, n, j) <= level) {
                absorb(n, next[j]);
                next[j] = 0.0;
            }
        }
        while (next.size() > 1 && next.back() == 0.0) next.pop_back();
        alive = std::move(next);
    }
    for (double v : alive) d.residual += v;
    return d;
}

EolDistribution sample_eol_distribution(const DegradationModel& model, const PrognosisRequest& req,
                                        const EventThreshold& threshold, const MonteCarloConfig& config) {
    model.validate();
    req.validate();
    check_threshold(model, threshold);
    if (config.samples == 0) throw ConfigError("sample count must be positive");
    const double start = req.health_fraction * model.initial_health;
    const double level = event_level(model, threshold);
    const std::size_t steps = window_steps(model, req);
    const std::size_t blocks = (config.samples + kMonteCarloBlock - 1) / kMonteCarloBlock;

    struct Tally {
        std::vector<std::size_t> counts;
        std::size_t residual = 0;
    };
    std::vector<Tally> tallies(blocks, Tally{std::vector<std::size_t>(steps + 1, 0), 0});

    auto run_block = [&](std::size_t b) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(b)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const std::size_t first = b * kMonteCarloBlock;
        const std::size_t count = std::min(kMonteCarloBlock, config.samples - first);
        Tally& t = tallies[b];
        for (std::size_t i = 0; i < count; ++i) {
            if (start <= level) {
                ++t.counts[0];
                continue;
            }
            std::size_t high = 0;
            bool fired = false;
            for (std::size_t n = 1; n <= steps; ++n) {
                if (u(rng) < model.high_rate_probability) ++high;
                if (step_health(model, start, n, high) <= level) {
                    ++t.counts[n];
                    fired = true;
                    break;
                }
            }
            if (!fired) ++t.residual;
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, blocks);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t b = w; b < blocks; b += workers) run_block(b);
            });
        }
    }

    std::vector<std::size_t> counts(steps + 1, 0);
    std::size_t residual = 0;
    for (const auto& t : tallies) {
        for (std::size_t k = 0; k <= steps; ++k) counts[k] += t.counts[k];
        residual += t.residual;
    }
    return from_counts(counts, residual, config.samples, model, req);
}

double total_variation(const EolDistribution& a, const EolDistribution& b) {
    std::size_t last = 0;
    if (auto m = a.max_step()) last = std::max(last, *m);
    if (auto m = b.max_step()) last = std::max(last, *m);
    double l1 = std::abs(a.residual - b.residual);
    for (std::size_t k = 0; k <= last; ++k) l1 += std::abs(a.probability_at(k) - b.probability_at(k));
    return 0.5 * l1;
}

PrognosisResult prognose(const DegradationModel& model, const PrognosisRequest& req, const EventThreshold& threshold) {
    PrognosisResult r;
    r.eol_deterministic = eol_deterministic(model, req);
    r.eol_stochastic = eol_stochastic(model, req);
    r.sigma = std::abs(r.eol_deterministic - r.eol_stochastic);
    r.rul = rul(model, req, threshold);
    r.distribution = eol_distribution(model, req, threshold);
    return r;
}

void write_distribution_csv(std::ostream& out, const EolDistribution& d) {
    using core::format_number;
    out << "step,time,probability\n";
    for (const auto& e : d.events) {
        out << e.step << ',' << format_number(e.time) << ',' << format_number(e.probability) << '\n';
    }
    out << "residual,," << format_number(d.residual) << '\n';
}

}  // namespace hadm::prognostics
