#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace hadm::prognostics {

/// Two-rate stochastic health decay. Each step of length `dt` removes
/// `nominal_rate * dt` health, plus `extra_loss` with probability
/// `high_rate_probability`.
struct DegradationModel {
    double initial_health = 1.0;
    double nominal_rate = 0.05;
    double high_rate_probability = 0.2;
    double extra_loss = 0.05;
    double dt = 1.0;

    /// Throws ConfigError on any violated range.
    void validate() const;
    double nominal_step_loss() const { return nominal_rate * dt; }
    /// Expected health loss per unit time.
    double expected_rate() const { return nominal_rate + high_rate_probability * extra_loss / dt; }
};

/// Event fires once health drops to `min_health` or below.
struct EventThreshold {
    double min_health = 0.0;
};

struct PrognosisRequest {
    /// Fraction of initial health remaining at prediction time, in (0, 1].
    double health_fraction = 1.0;
    /// Prediction time, in the model's time unit.
    double prediction_time = 0.0;
    /// Prediction window length, in the model's time unit.
    double horizon = 20.0;

    void validate() const;
};

struct EventProbability {
    std::size_t step = 0;
    double time = 0.0;
    double probability = 0.0;
};

/// Distribution of the first step at which the event fires, counted from the
/// prediction time. `residual` is the mass not absorbed inside the window.
struct EolDistribution {
    std::vector<EventProbability> events;
    double residual = 0.0;

    double total_mass() const;
    /// Mean event step over the absorbed mass, in steps.
    double mean_step() const;
    std::optional<std::size_t> min_step() const;
    std::optional<std::size_t> max_step() const;
    double probability_at(std::size_t step) const;
};

struct PrognosisResult {
    double eol_deterministic = 0.0;
    double eol_stochastic = 0.0;
    double sigma = 0.0;
    double rul = 0.0;
    EolDistribution distribution;
};

/// Remaining time to the default threshold under the nominal rate alone.
double eol_deterministic(const DegradationModel& model, const PrognosisRequest& req);
/// Remaining health divided by the expected rate.
double eol_stochastic(const DegradationModel& model, const PrognosisRequest& req);
/// |eol_deterministic - eol_stochastic|.
double sigma(const DegradationModel& model, const PrognosisRequest& req);

/// Largest health fraction whose sigma stays within `sigma_max`, capped at 1.
/// Nullopt when the two rate models coincide and sigma is identically zero.
std::optional<double> max_prediction_health(const DegradationModel& model, double sigma_max);

/// Time elapsed under the nominal rate until `health_fraction` remains.
double nominal_prediction_time(const DegradationModel& model, double health_fraction);

/// Remaining useful life against `threshold` under the nominal rate, floored at 0.
double rul(const DegradationModel& model, const PrognosisRequest& req, const EventThreshold& threshold);

inline constexpr std::size_t kDefaultNodeCap = 1'000'000;

/// Exact first-passage distribution by forward dynamic programming over
/// (steps, high-rate steps) nodes. Throws ResourceError past `node_cap`.
EolDistribution eol_distribution(const DegradationModel& model, const PrognosisRequest& req,
                                 const EventThreshold& threshold, std::size_t node_cap = kDefaultNodeCap);

/// Samples are drawn in blocks of kMonteCarloBlock; block b uses an mt19937_64
/// seeded from seed_seq{seed, b}, so results do not depend on `workers`.
inline constexpr std::size_t kMonteCarloBlock = 4096;

struct MonteCarloConfig {
    std::size_t samples = 100'000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

EolDistribution sample_eol_distribution(const DegradationModel& model, const PrognosisRequest& req,
                                        const EventThreshold& threshold, const MonteCarloConfig& config);

/// Half the L1 distance, counting the residual as one more outcome.
double total_variation(const EolDistribution& a, const EolDistribution& b);

PrognosisResult prognose(const DegradationModel& model, const PrognosisRequest& req, const EventThreshold& threshold);

/// CSV with columns step,time,probability and a final residual row.
void write_distribution_csv(std::ostream& out, const EolDistribution& d);

}  // namespace hadm::prognostics
