#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hadm/loop/loop.hpp"
#include "hadm/rover/model.hpp"
#include "hadm/rover/plant.hpp"
#include "hadm/rover/scenario.hpp"
#include "hadm/shm/shm.hpp"

namespace hadm::mission {

/// Drives a rover plant from the loop. Observations are the reached state ids
/// of the compiled problem; sensors are the plant's channel readings.
class RoverEnvironment final : public loop::Environment {
public:
    RoverEnvironment(const rover::CompiledScenario& compiled, rover::GroundTruth truth);

    loop::Feedback step(core::ActionId a) override;
    std::optional<shm::SensorObservation> sensors() const override { return plant_.observe(); }
    const rover::Plant& plant() const { return plant_; }

private:
    rover::Plant plant_;
};

enum class Strategy { hadm, shm_baseline, phm_commit, fixed_plan };

std::string to_string(Strategy s);
/// Accepts hadm, shm-baseline, phm-commit, fixed-plan. Throws ConfigError otherwise.
Strategy parse_strategy(std::string_view text);
inline constexpr Strategy kAllStrategies[] = {Strategy::hadm, Strategy::shm_baseline, Strategy::phm_commit,
                                              Strategy::fixed_plan};

/// Emergency-response policy over a compiled scenario plus the states in
/// which the response counts as complete.
struct SerSetup {
    loop::SerPolicy policy;
    std::function<bool(core::StateId)> safe;
};

/// Members are the non-terminal states whose sensed condition holds; the
/// declared action is tabulated wherever it is admissible. Safe states are
/// those outside the condition where the rover is intact (not burnt out or
/// stranded); missed goals do not count against safety. Throws ConfigError when
/// the action does not exist in the compiled problem.
SerSetup build_ser(const rover::CompiledScenario& compiled, const rover::SerConfig& config);

struct PathStep {
    core::ActionId action;
    core::StateId next;
};

/// Follows `policy` from the root, taking the most likely outcome of each
/// action (the first on ties), until a terminal state.
std::vector<PathStep> most_likely_path(const rover::CompiledScenario& compiled, const core::Policy& policy);

struct MissionOptions {
    /// phm-commit and the phm route choice re-run the prognoser at every later
    /// branching instead of committing once.
    bool rerun_prognosis = false;
    /// Apply the scenario's emergency-response layer when it declares one.
    bool use_ser = true;
    loop::LoopOptions loop;
    rover::CompileOptions compile;
};

struct EpisodeResult {
    rover::GroundTruth truth;
    loop::LoopTrace trace;
    rover::RoverState final_state;
    /// Mission status, or "aborted"/"truncated" when the loop stopped early.
    std::string outcome;
    std::vector<shm::PipelineEvent> shm_events;
    /// The strategy drew from the generator while acting.
    bool used_rng = false;

    double value() const { return trace.total_reward(); }
};

struct RolloutSummary {
    std::size_t runs = 0;
    double mean = 0.0;
    double standard_error = 0.0;
    std::map<std::string, std::size_t> outcomes;
    /// Per-run values in run order.
    std::vector<double> values;
};

/// A compiled scenario shared by every episode run on it. Safe to use from
/// several threads at once.
class Mission {
public:
    explicit Mission(rover::ScenarioSpec spec, MissionOptions options = {});
    ~Mission();
    Mission(const Mission&) = delete;
    Mission& operator=(const Mission&) = delete;

    const rover::ScenarioSpec& spec() const { return compiled_.spec(); }
    const rover::CompiledScenario& compiled() const { return compiled_; }
    const MissionOptions& options() const { return options_; }
    const SerSetup* ser() const { return ser_ ? &*ser_ : nullptr; }

    /// One episode against `truth`. Strategy randomness draws from `rng`.
    EpisodeResult run(Strategy strategy, const rover::GroundTruth& truth, std::mt19937_64& rng) const;

    /// Samples the ground truth from `seed`, applies `overrides`, then runs
    /// with the same generator.
    EpisodeResult run_seeded(Strategy strategy, std::span<const std::string> overrides, std::uint64_t seed) const;

    /// Exact expected value by enumerating every ground truth consistent with
    /// `overrides`. Nullopt when the strategy randomizes on some truth.
    std::optional<double> analytic_value(Strategy strategy, std::span<const std::string> overrides = {}) const;

    /// Runs `runs` episodes with seeds seed, seed+1, ... on up to `threads`
    /// worker threads (0 picks the hardware concurrency).
    RolloutSummary rollouts(Strategy strategy, std::span<const std::string> overrides, std::uint64_t seed,
                            std::size_t runs, std::size_t threads = 0) const;

    /// Optimal actions along the most likely outcome path from the root.
    const std::vector<core::ActionId>& fixed_plan() const { return plan_; }

    /// Prognostic route choice among the admissible actions of `s`, memoized.
    core::ActionId phm_route(core::StateId s) const;

    /// Health-unaware model the separated baseline plans with: one containing
    /// `root` from the cache, or a fresh compile rooted there.
    std::shared_ptr<const rover::CompiledScenario> decision_model(const rover::RoverState& root) const;

private:
    MissionOptions options_;
    rover::CompiledScenario compiled_;
    std::optional<SerSetup> ser_;
    std::vector<core::ActionId> plan_;
    mutable std::unique_ptr<loop::OnlineProvider> online_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::shared_ptr<const rover::CompiledScenario>> dm_cache_;
    mutable std::map<core::StateId, core::ActionId> phm_cache_;
};

}  // namespace hadm::mission
