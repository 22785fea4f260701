#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "hadm/core/ids.hpp"
#include "hadm/core/problem.hpp"

namespace hadm::core {

/// Utility per state plus how it was obtained.
struct ValueTable {
    std::vector<double> values;
    std::size_t iterations = 0;
    /// Sup-norm change of the last sweep (0 when only the base case ran).
    double residual = 0.0;

    /// A table whose every entry is undefined (NaN) until assigned.
    static ValueTable undefined(std::size_t state_count);
    static ValueTable zeros(std::size_t state_count);

    double operator[](StateId s) const { return values.at(s.value); }
    bool defined(StateId s) const;
};

/// Fixed action sequence a_0..a_H.
struct Plan {
    std::vector<ActionId> actions;
};

/// Deterministic tabular policy. Terminal states map to their self-loop.
class Policy {
public:
    Policy() = default;
    explicit Policy(std::size_t state_count) : actions_(state_count), tied_(state_count, false) {}

    void set(StateId s, ActionId a, bool tie_broken = false);
    std::optional<ActionId> find(StateId s) const { return actions_.at(s.value); }
    /// Throws DomainError when the state is unmapped.
    ActionId at(StateId s) const;
    std::size_t size() const { return actions_.size(); }

    /// True when argmax had several maximizers in `s` and the lowest index won.
    bool tie_broken(StateId s) const { return tied_.at(s.value); }
    std::size_t tie_count() const;

private:
    std::vector<std::optional<ActionId>> actions_;
    std::vector<bool> tied_;
};

/// Tabular distribution over actions per state, e.g. the uniform random
/// behavior a prognoser without a policy has to assume.
class StochasticPolicy {
public:
    using Row = std::vector<std::pair<ActionId, double>>;

    explicit StochasticPolicy(std::size_t state_count) : rows_(state_count) {}
    static StochasticPolicy uniform(const Problem& problem);
    static StochasticPolicy from(const Policy& policy);

    void set(StateId s, Row row) { rows_.at(s.value) = std::move(row); }
    const Row& row(StateId s) const { return rows_.at(s.value); }
    std::size_t size() const { return rows_.size(); }

private:
    std::vector<Row> rows_;
};

/// Relative tolerance under which two action values count as tied.
inline constexpr double kTieTolerance = 1e-12;

/// sum_{s'} T(s,a,s') u(s').
double expected_utility(const Problem& problem, StateId s, ActionId a, const ValueTable& u);

/// R(s,a) + gamma sum_{s'} T(s,a,s') u(s').
double action_value(const Problem& problem, StateId s, ActionId a, const ValueTable& u);

/// Sum of rewards along the trajectory a deterministic problem follows under
/// `plan`. Terminal states absorb: remaining actions earn the self-loop reward.
double plan_utility(const Problem& problem, StateId s0, const Plan& plan);

/// U_t^pi with U_0^pi(s) = R(s, pi(s)).
ValueTable evaluate_policy(const Problem& problem, const Policy& policy, std::size_t steps);
ValueTable evaluate_policy(const Problem& problem, const StochasticPolicy& policy, std::size_t steps);
/// Non-stationary evaluation: `schedule[k]` acts when k further steps remain,
/// so the result is U_t with t = schedule.size() - 1.
ValueTable evaluate_policy(const Problem& problem, const std::vector<Policy>& schedule);

struct HorizonStop {
    std::size_t steps = 0;
};

struct ResidualStop {
    double epsilon = 1e-9;
    std::size_t max_iterations = 1'000'000;
};

using StopRule = std::variant<HorizonStop, ResidualStop>;

/// Bellman optimality sweeps. HorizonStop{t} returns U*_t (U*_0 = max_a R);
/// ResidualStop iterates until the sup-norm change drops below epsilon and
/// requires gamma < 1.
ValueTable value_iterate(const Problem& problem, StopRule stop);
/// Residual 1e-9 when gamma < 1, otherwise the problem's full horizon.
ValueTable value_iterate(const Problem& problem);

/// Greedy policy with respect to `u`; ties resolve to the earliest admissible action.
Policy extract_policy(const Problem& problem, const ValueTable& u);

/// CSV with header "state,value".
void write_values_csv(std::ostream& out, const Problem& problem, const ValueTable& u);
/// CSV with header "state,action".
void write_policy_csv(std::ostream& out, const Problem& problem, const Policy& policy);

}  // namespace hadm::core
