#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "hadm/core/belief.hpp"
#include "hadm/core/ids.hpp"
#include "hadm/core/problem.hpp"
#include "hadm/core/solvers.hpp"

namespace hadm::core {

/// Uniform random choice among admissible actions once `prefix` is used up.
struct UniformRandom {
    Plan prefix;
};

/// A fixed behavior that ignores observations.
using Behavior = std::variant<Plan, UniformRandom>;

/// One fully enumerated trajectory outcome.
struct Scenario {
    double probability = 0.0;
    double total_reward = 0.0;
    StateId final_state;
};

struct OpenLoopResult {
    double expected = 0.0;
    std::vector<Scenario> scenarios;
};

inline constexpr std::size_t kDefaultScenarioCap = 1'000'000;

/// Expected cumulative reward of `behavior` from `s0` over the problem horizon,
/// with every probability-weighted trajectory listed in depth-first order.
/// A Plan runs for min(H+1, plan length) decisions. Throws InvalidConfigError
/// for unbounded horizons and ResourceError past `scenario_cap` trajectories.
OpenLoopResult open_loop_expectation(const Problem& problem, StateId s0, const Behavior& behavior,
                                     std::size_t scenario_cap = kDefaultScenarioCap);

/// Restricts which actions the closed-loop search may consider in a state.
using ActionFilter = std::function<bool(StateId, ActionId)>;

struct Decision {
    ActionId action;
    double value = 0.0;
};

/// Exhaustive finite-horizon expectimax. Depth d means d+1 remaining decisions,
/// matching U*_d. Under the identity observation model the search collapses to
/// a memo over (state, depth); otherwise it branches on observations over
/// unnormalized beliefs. Not thread-safe: the memo is mutated by queries.
class Expectimax {
public:
    explicit Expectimax(const Problem& problem, ActionFilter filter = {});

    double value(StateId s, std::size_t depth);
    double value(const Belief& b, std::size_t depth);

    /// Best admissible action; ties go to the earliest admissible action.
    /// Throws DomainError when the filter leaves no action.
    Decision best(StateId s, std::size_t depth);
    Decision best(const Belief& b, std::size_t depth);

    const Problem& problem() const { return *problem_; }

private:
    using Weights = std::vector<double>;

    double weights_value(const Weights& w, std::size_t depth);
    std::optional<Decision> weights_best(const Weights& w, std::size_t depth);
    double action_value(const Weights& w, ActionId a, std::size_t depth);
    std::vector<ActionId> candidate_actions(const Weights& w) const;
    double state_value(StateId s, std::size_t depth);
    double terminal_value(StateId s, std::size_t depth) const;
    bool allowed(StateId s, ActionId a) const { return !filter_ || filter_(s, a); }

    const Problem* problem_;
    ActionFilter filter_;
    std::unordered_map<std::size_t, double> memo_;
};

/// Expectimax value at the problem horizon. Throws InvalidConfigError when
/// the horizon is unbounded.
double closed_loop_value(const Problem& problem, StateId s0);
double closed_loop_value(const Problem& problem, const Belief& b0);

/// Best action for `b` with `depth` further decisions, honoring `filter`.
Decision best_action(const Problem& problem, const Belief& b, std::size_t depth, const ActionFilter& filter = {});

}  // namespace hadm::core
