#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hadm/core/ids.hpp"

namespace hadm::core {

/// Probability-mass tolerance used when validating rows and beliefs.
inline constexpr double kProbabilityTolerance = 1e-9;

/// One named component of a state vector, e.g. {"battery_wh", "300"}.
struct StateComponent {
    std::string name;
    std::string value;

    friend bool operator==(const StateComponent&, const StateComponent&) = default;
};

/// A state as an ordered list of named discrete components. A state built from
/// a bare label has a single component named "state".
class StateVector {
public:
    StateVector() = default;
    explicit StateVector(std::string label);
    explicit StateVector(std::vector<StateComponent> components);

    const std::vector<StateComponent>& components() const { return components_; }
    const std::string* find(std::string_view name) const;

    /// "name=value;name=value", or the bare value for single-component labels.
    std::string label() const;

private:
    std::vector<StateComponent> components_;
};

/// One successor of a (state, action) pair. `reward` is the reward realized
/// when this outcome occurs; R(s,a) is the probability-weighted sum.
struct Outcome {
    StateId next;
    double probability = 0.0;
    double reward = 0.0;
};

/// An admissible action in a state together with its outcome distribution.
struct Choice {
    ActionId action;
    std::vector<Outcome> outcomes;
    double expected_reward = 0.0;
};

struct ObservationOutcome {
    ObservationId observation;
    double probability = 0.0;
};

/// Finite state/action/observation decision problem. Immutable once built;
/// obtain one through ProblemBuilder, which validates every row.
class Problem {
public:
    std::size_t state_count() const { return states_.size(); }
    std::size_t action_count() const { return action_labels_.size(); }

    const StateVector& state(StateId s) const { return states_.at(s.value); }
    const std::string& state_label(StateId s) const { return state_labels_.at(s.value); }
    const std::string& action_label(ActionId a) const { return action_labels_.at(a.value); }
    std::optional<StateId> find_state(std::string_view label) const;
    std::optional<ActionId> find_action(std::string_view label) const;

    /// Admissible actions of `s` in their declared order.
    std::span<const Choice> choices(StateId s) const { return choices_.at(s.value); }
    const Choice* find_choice(StateId s, ActionId a) const;
    /// Throws DomainError when `a` is not admissible in `s`.
    const Choice& choice(StateId s, ActionId a) const;
    bool admissible(StateId s, ActionId a) const { return find_choice(s, a) != nullptr; }

    /// R(s,a): expected immediate reward.
    double reward(StateId s, ActionId a) const { return choice(s, a).expected_reward; }
    std::span<const Outcome> transitions(StateId s, ActionId a) const { return choice(s, a).outcomes; }

    bool is_terminal(StateId s) const { return terminal_flags_.at(s.value); }
    std::span<const StateId> terminal_states() const { return terminals_; }
    /// The self-loop action every terminal state carries.
    ActionId stay_action() const { return stay_; }

    double discount() const { return discount_; }
    /// Nullopt when unbounded. Horizon H means decisions at steps 0..H.
    std::optional<std::size_t> horizon() const { return horizon_; }
    std::span<const StateId> initial_states() const { return initial_; }

    bool has_observation_model() const { return !observation_labels_.empty(); }
    /// Size of the observation alphabet; equals the state count under the
    /// identity (fully observable) model.
    std::size_t observation_count() const;
    const std::string& observation_label(ObservationId o) const;
    std::optional<ObservationId> find_observation(std::string_view label) const;
    /// O(s', a, .): the identity distribution when no model was declared.
    std::vector<ObservationOutcome> observations(StateId next, ActionId a) const;
    double observation_probability(StateId next, ActionId a, ObservationId o) const;

private:
    friend class ProblemBuilder;

    static std::size_t pair_key(StateId s, ActionId a, std::size_t action_count) {
        return s.value * action_count + a.value;
    }

    std::vector<StateVector> states_;
    std::vector<std::string> state_labels_;
    std::unordered_map<std::string, StateId> state_index_;
    std::vector<std::string> action_labels_;
    std::unordered_map<std::string, ActionId> action_index_;
    std::vector<std::vector<Choice>> choices_;
    std::vector<bool> terminal_flags_;
    std::vector<StateId> terminals_;
    std::vector<StateId> initial_;
    ActionId stay_;
    double discount_ = 1.0;
    std::optional<std::size_t> horizon_;

    std::vector<std::string> observation_labels_;
    std::unordered_map<std::string, ObservationId> observation_index_;
    std::unordered_map<std::size_t, std::vector<ObservationOutcome>> observation_rows_;
};

/// Accumulates a Problem and validates it on build(): probabilities in [0,1]
/// with rows summing to 1, finite rewards, at least one action per
/// non-terminal state, terminal states self-looping only, complete
/// observation rows, bounded horizon when gamma = 1, and every state
/// reachable from the declared initial states.
class ProblemBuilder {
public:
    static constexpr const char* kStayLabel = "stay";

    ProblemBuilder();

    StateId add_state(StateVector state);
    StateId add_state(std::string label) { return add_state(StateVector(std::move(label))); }
    /// Returns the existing id when the label was already declared.
    ActionId add_action(std::string label);
    ObservationId add_observation(std::string label);

    /// Outcomes with per-outcome rewards.
    void add_choice(StateId s, ActionId a, std::vector<Outcome> outcomes);
    /// Outcomes sharing one reward R(s,a).
    void add_choice(StateId s, ActionId a, double reward,
                    const std::vector<std::pair<StateId, double>>& successors);

    /// Marks `s` terminal; it receives the single self-loop action "stay".
    void set_terminal(StateId s, double self_loop_reward = 0.0);
    void set_observations(StateId next, ActionId a, std::vector<ObservationOutcome> row);
    void add_initial_state(StateId s);

    ProblemBuilder& discount(double gamma);
    ProblemBuilder& horizon(std::optional<std::size_t> h);

    std::size_t state_count() const { return problem_.states_.size(); }

    Problem build() &&;

private:
    struct PendingObservations {
        StateId next;
        ActionId action;
        std::vector<ObservationOutcome> row;
    };

    Problem problem_;
    std::vector<PendingObservations> pending_observations_;
    std::vector<double> terminal_rewards_;
    std::vector<bool> terminal_marked_;
};

}  // namespace hadm::core
