#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hadm/core/belief.hpp"
#include "hadm/core/errors.hpp"
#include "hadm/core/ids.hpp"
#include "hadm/core/planning.hpp"
#include "hadm/core/problem.hpp"
#include "hadm/core/solvers.hpp"
#include "hadm/shm/shm.hpp"

namespace hadm::loop {

using core::ActionId;
using core::Belief;
using core::ObservationId;
using core::Problem;
using core::StateId;

/// What the world returns for one executed action. In a problem without an
/// observation model the observation id is the id of the reached state.
struct Feedback {
    ObservationId observation;
    double reward = 0.0;
};

/// The system being controlled. Implementations own their hidden state.
class Environment {
public:
    virtual ~Environment() = default;

    virtual Feedback step(ActionId a) = 0;
    /// Raw sensor readings at the current instant, when the environment has any.
    virtual std::optional<shm::SensorObservation> sensors() const { return std::nullopt; }
};

/// Samples a Problem's own transition and observation model with a seeded
/// generator. Terminal states self-loop with their stored reward.
class ProblemPlant final : public Environment {
public:
    ProblemPlant(const Problem& problem, StateId s0, std::uint64_t seed);

    Feedback step(ActionId a) override;
    StateId state() const { return state_; }

private:
    const Problem* problem_;
    StateId state_;
    std::mt19937_64 rng_;
};

/// Raised by a provider that cannot produce an action for the current belief.
/// The loop records the diagnostic and stops.
class ProviderExhausted : public Error {
public:
    using Error::Error;
};

/// Raised when the SER predicate holds but no SER action is tabulated.
class SerFault : public Error {
public:
    using Error::Error;
};

class PolicyProvider {
public:
    virtual ~PolicyProvider() = default;

    /// Action for `b` at loop step `step`; `sensors` is null when the
    /// environment reports none.
    virtual ActionId select(const Belief& b, std::size_t step, const shm::SensorObservation* sensors) = 0;
    /// Tag recorded in the trace.
    virtual std::string name() const = 0;
};

/// Looks up a precomputed policy at the most likely state.
class OfflineProvider final : public PolicyProvider {
public:
    explicit OfflineProvider(core::Policy policy, std::string name = "HADM");

    ActionId select(const Belief& b, std::size_t step, const shm::SensorObservation* sensors) override;
    std::string name() const override { return name_; }

private:
    core::Policy policy_;
    std::string name_;
};

/// Exhaustive expectimax from the current belief with the decisions left until
/// the horizon (at least one). Queries are serialized, so one instance can be
/// shared by loops running in parallel.
class OnlineProvider final : public PolicyProvider {
public:
    /// `horizon` defaults to the problem's; InvalidConfigError when neither is set.
    explicit OnlineProvider(const Problem& problem, core::ActionFilter filter = {},
                            std::optional<std::size_t> horizon = std::nullopt, std::string name = "HADM");

    ActionId select(const Belief& b, std::size_t step, const shm::SensorObservation* sensors) override;
    std::string name() const override { return name_; }
    /// Value of the last selected action.
    double last_value() const;

private:
    core::Expectimax search_;
    std::size_t horizon_;
    std::string name_;
    mutable std::mutex mutex_;
    double last_value_ = 0.0;
};

/// Emergency-response layer: a set of states (or a sensor trigger) on which a
/// tabulated action overrides the provider.
class SerPolicy {
public:
    /// Holds when the belief mass on `members` reaches `belief_threshold`.
    SerPolicy(std::vector<StateId> members, std::map<StateId, ActionId> actions, std::vector<std::string> coverage,
              double belief_threshold = 0.5);
    /// Holds when `trigger` fires on the environment's sensors.
    static SerPolicy on_observation(shm::ThresholdPredicate trigger, std::map<StateId, ActionId> actions,
                                    std::vector<std::string> coverage);

    bool holds(const Belief& b, const shm::SensorObservation* sensors) const;
    /// Tabulated action for the most likely state inside the SER set (state
    /// trigger) or overall (observation trigger). Throws SerFault when missing.
    ActionId action(const Belief& b) const;

    /// States the validator starts from: the members, or the table keys for an
    /// observation trigger.
    std::vector<StateId> states() const;
    bool contains(StateId s) const;
    const std::map<StateId, ActionId>& table() const { return actions_; }
    const std::vector<std::string>& coverage() const { return coverage_; }
    const std::optional<shm::ThresholdPredicate>& trigger() const { return trigger_; }

private:
    SerPolicy() = default;

    std::vector<StateId> members_;
    std::map<StateId, ActionId> actions_;
    std::vector<std::string> coverage_;
    double belief_threshold_ = 0.5;
    std::optional<shm::ThresholdPredicate> trigger_;
};

struct Arbitration {
    ActionId action;
    std::string provider;
};

inline constexpr const char* kSerTag = "SER";

/// SER when its predicate holds, the provider otherwise.
Arbitration arbitrate(const Belief& b, const shm::SensorObservation* sensors, const SerPolicy* ser,
                      PolicyProvider& provider, std::size_t step);

struct SerViolation {
    enum class Kind { missing_action, inadmissible_action, cycle, step_bound, unsafe_exit };
    Kind kind;
    StateId state;
    std::string message;
};

struct SerReport {
    std::vector<SerViolation> violations;

    bool ok() const { return violations.empty(); }
};

std::string to_string(SerViolation::Kind k);

/// Follows every outcome of the SER actions from every SER state and checks
/// that each path reaches a state accepted by `safe` within `max_steps`
/// actions without cycling or leaving the SER set elsewhere.
SerReport validate_ser(const Problem& problem, const SerPolicy& ser, const std::function<bool(StateId)>& safe,
                       std::size_t max_steps);

struct LoopOptions {
    /// Belief mass on terminal states at which the loop stops.
    double terminal_threshold = 0.999;
    std::size_t step_cap = 1000;
};

struct TraceStep {
    std::size_t step = 0;
    /// Most likely state before acting.
    StateId believed_state;
    std::string belief;
    ActionId action;
    std::string action_label;
    std::string provider;
    std::string observation;
    double reward = 0.0;
    double cumulative = 0.0;
};

struct LoopTrace {
    std::vector<TraceStep> steps;
    bool terminal = false;
    bool truncated = false;
    /// Set when the loop stopped on an impossible observation or an exhausted provider.
    std::optional<std::string> aborted;
    /// Most likely state at the end.
    StateId final_state;
    std::string final_label;

    double total_reward() const { return steps.empty() ? 0.0 : steps.back().cumulative; }
};

/// Estimate, arbitrate, act, observe and update until the belief is terminal,
/// the step cap is hit, or the run aborts.
LoopTrace run_loop(Environment& env, const Problem& problem, PolicyProvider& provider, const SerPolicy* ser, Belief b0,
                   const LoopOptions& options = {});

/// "label" for a point mass, otherwise the three most likely states with their mass.
std::string summarize_belief(const Problem& problem, const Belief& b);

/// One JSON object per step.
void write_trace_jsonl(std::ostream& out, const LoopTrace& trace);
void write_trace_table(std::ostream& out, const LoopTrace& trace);

}  // namespace hadm::loop
