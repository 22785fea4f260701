#pragma once

#include <cstdint>
#include <vector>

#include "hadm/core/belief.hpp"
#include "hadm/core/problem.hpp"
#include "hadm/core/solvers.hpp"

// Independent brute-force reference computations. None of these call the
// library solvers; they only read the model through Problem's accessors.
namespace oracle {

using hadm::core::Policy;
using hadm::core::Problem;
using hadm::core::StateId;

/// Random finite MDP with 1..4 states, up to 3 admissible actions per state,
/// per-outcome rewards, an occasional terminal state and horizon 0..3.
Problem random_mdp(std::uint64_t seed);

/// Sum over every trajectory of probability times discounted reward when
/// `schedule[k]` acts with k further steps remaining.
double trajectory_value(const Problem& problem, const std::vector<Policy>& schedule, StateId s);

/// Same as above for a stationary policy run for t+1 decisions.
double trajectory_value(const Problem& problem, const Policy& policy, StateId s, std::size_t t);

/// Per-state maximum of U_t over every non-stationary deterministic Markov
/// policy. Stage rules are enumerated exhaustively; only value vectors that
/// are componentwise dominated by another candidate are discarded.
std::vector<double> best_over_policies(const Problem& problem, std::size_t t);

/// Every stationary deterministic policy of `problem`.
std::vector<Policy> all_stationary_policies(const Problem& problem);

/// A POMDP with one decision, a noisy observation of the hidden successor and a
/// second decision that ends in a terminal state.
struct TwoStage {
    Problem problem;
    StateId start;
    std::vector<StateId> hidden;
    std::vector<hadm::core::ActionId> first;
    std::vector<hadm::core::ActionId> second;
};

TwoStage random_two_stage(std::uint64_t seed);

/// Max over first actions and every observation-to-second-action map.
double best_decision_rule(const TwoStage& scenario);

/// Expected reward of every fixed pair (first action, second action).
std::vector<double> all_open_loop_plans(const TwoStage& scenario);

}  // namespace oracle
