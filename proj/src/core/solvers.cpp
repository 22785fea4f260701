#include "hadm/core/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "hadm/core/errors.hpp"
#include "hadm/core/format.hpp"

namespace hadm::core {

ValueTable ValueTable::undefined(std::size_t state_count) {
    return ValueTable{std::vector<double>(state_count, std::numeric_limits<double>::quiet_NaN()), 0, 0.0};
}

ValueTable ValueTable::zeros(std::size_t state_count) { return ValueTable{std::vector<double>(state_count, 0.0), 0, 0.0}; }

bool ValueTable::defined(StateId s) const { return s.value < values.size() && !std::isnan(values[s.value]); }

void Policy::set(StateId s, ActionId a, bool tie_broken) {
    actions_.at(s.value) = a;
    tied_.at(s.value) = tie_broken;
}

ActionId Policy::at(StateId s) const {
    if (auto a = actions_.at(s.value)) return *a;
    throw DomainError("policy has no action for state index " + std::to_string(s.value));
}

std::size_t Policy::tie_count() const { return static_cast<std::size_t>(std::count(tied_.begin(), tied_.end(), true)); }

StochasticPolicy StochasticPolicy::uniform(const Problem& problem) {
    StochasticPolicy pi(problem.state_count());
    for (std::size_t i = 0; i < problem.state_count(); ++i) {
        auto choices = problem.choices(StateId{i});
        Row row;
        for (const auto& c : choices) row.emplace_back(c.action, 1.0 / static_cast<double>(choices.size()));
        pi.set(StateId{i}, std::move(row));
    }
    return pi;
}

StochasticPolicy StochasticPolicy::from(const Policy& policy) {
    StochasticPolicy pi(policy.size());
    for (std::size_t i = 0; i < policy.size(); ++i) {
        if (auto a = policy.find(StateId{i})) pi.set(StateId{i}, {{*a, 1.0}});
    }
    return pi;
}

double expected_utility(const Problem& problem, StateId s, ActionId a, const ValueTable& u) {
    double total = 0.0;
    for (const auto& o : problem.transitions(s, a)) {
        if (!u.defined(o.next)) {
            throw IncompleteTableError("value table has no entry for successor '" + problem.state_label(o.next) + "'");
        }
        total += o.probability * u[o.next];
    }
    return total;
}

double action_value(const Problem& problem, StateId s, ActionId a, const ValueTable& u) {
    return problem.reward(s, a) + problem.discount() * expected_utility(problem, s, a, u);
}

double plan_utility(const Problem& problem, StateId s0, const Plan& plan) {
    double total = 0.0;
    StateId s = s0;
    for (ActionId a : plan.actions) {
        if (problem.is_terminal(s)) {
            total += problem.reward(s, problem.stay_action());
            continue;
        }
        const Choice& c = problem.choice(s, a);
        if (c.outcomes.size() != 1) {
            throw NotDeterministicError("action '" + problem.action_label(a) + "' is stochastic in state '" +
                                       problem.state_label(s) + "'");
        }
        total += c.outcomes.front().reward;
        s = c.outcomes.front().next;
    }
    return total;
}

namespace {

// One Bellman backup of `pi` against `prev`; `pi` may be stochastic.
ValueTable backup(const Problem& problem, const StochasticPolicy& pi, const ValueTable* prev) {
    ValueTable next = ValueTable::zeros(problem.state_count());
    for (std::size_t i = 0; i < problem.state_count(); ++i) {
        const StateId s{i};
        const auto& row = problem.is_terminal(s) ? StochasticPolicy::Row{{problem.stay_action(), 1.0}} : pi.row(s);
        if (row.empty()) throw DomainError("policy has no action for state '" + problem.state_label(s) + "'");
        double v = 0.0;
        for (const auto& [a, w] : row) {
            v += w * (prev ? action_value(problem, s, a, *prev) : problem.reward(s, a));
        }
        next.values[i] = v;
    }
    return next;
}

double sup_norm_diff(const ValueTable& a, const ValueTable& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

ValueTable evaluate_schedule(const Problem& problem, const std::vector<StochasticPolicy>& schedule) {
    if (schedule.empty()) throw InvalidConfigError("empty policy schedule");
    ValueTable u = backup(problem, schedule.front(), nullptr);
    for (std::size_t k = 1; k < schedule.size(); ++k) {
        ValueTable next = backup(problem, schedule[k], &u);
        next.residual = sup_norm_diff(next, u);
        u = std::move(next);
    }
    u.iterations = schedule.size() - 1;
    return u;
}

}  // namespace

ValueTable evaluate_policy(const Problem& problem, const StochasticPolicy& policy, std::size_t steps) {
    if (policy.size() != problem.state_count()) throw ConfigError("policy size does not match the state space");
    ValueTable u = backup(problem, policy, nullptr);
    for (std::size_t k = 1; k <= steps; ++k) {
        ValueTable next = backup(problem, policy, &u);
        next.residual = sup_norm_diff(next, u);
        u = std::move(next);
    }
    u.iterations = steps;
    return u;
}

ValueTable evaluate_policy(const Problem& problem, const Policy& policy, std::size_t steps) {
    return evaluate_policy(problem, StochasticPolicy::from(policy), steps);
}

ValueTable evaluate_policy(const Problem& problem, const std::vector<Policy>& schedule) {
    std::vector<StochasticPolicy> converted;
    converted.reserve(schedule.size());
    for (const auto& p : schedule) converted.push_back(StochasticPolicy::from(p));
    return evaluate_schedule(problem, converted);
}

namespace {

ValueTable bellman_sweep(const Problem& problem, const ValueTable* prev) {
    ValueTable next = ValueTable::zeros(problem.state_count());
    for (std::size_t i = 0; i < problem.state_count(); ++i) {
        const StateId s{i};
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : problem.choices(s)) {
            const double q = prev ? action_value(problem, s, c.action, *prev) : c.expected_reward;
            best = std::max(best, q);
        }
        next.values[i] = best;
    }
    return next;
}

}  // namespace

ValueTable value_iterate(const Problem& problem, StopRule stop) {
    if (const auto* h = std::get_if<HorizonStop>(&stop)) {
        ValueTable u = bellman_sweep(problem, nullptr);
        for (std::size_t k = 1; k <= h->steps; ++k) {
            ValueTable next = bellman_sweep(problem, &u);
            next.residual = sup_norm_diff(next, u);
            u = std::move(next);
        }
        u.iterations = h->steps;
        return u;
    }
    const auto& r = std::get<ResidualStop>(stop);
    if (problem.discount() >= 1.0) throw InvalidConfigError("residual stopping requires a discount below 1");
    if (!(r.epsilon > 0.0)) throw InvalidConfigError("residual tolerance must be positive");
    ValueTable u = bellman_sweep(problem, nullptr);
    for (std::size_t k = 1; k <= r.max_iterations; ++k) {
        ValueTable next = bellman_sweep(problem, &u);
        next.residual = sup_norm_diff(next, u);
        next.iterations = k;
        u = std::move(next);
        if (u.residual < r.epsilon) return u;
    }
    throw ResourceError("value iteration did not reach the residual tolerance within the iteration budget");
}

ValueTable value_iterate(const Problem& problem) {
    if (problem.discount() < 1.0) return value_iterate(problem, ResidualStop{});
    return value_iterate(problem, HorizonStop{*problem.horizon()});
}

Policy extract_policy(const Problem& problem, const ValueTable& u) {
    Policy pi(problem.state_count());
    for (std::size_t i = 0; i < problem.state_count(); ++i) {
        const StateId s{i};
        auto choices = problem.choices(s);
        std::size_t best = 0;
        double best_q = action_value(problem, s, choices[0].action, u);
        bool tied = false;
        for (std::size_t k = 1; k < choices.size(); ++k) {
            const double q = action_value(problem, s, choices[k].action, u);
            const double tol = kTieTolerance * std::max(1.0, std::max(std::abs(q), std::abs(best_q)));
            if (q > best_q + tol) {
                best = k;
                best_q = q;
                tied = false;
            } else if (std::abs(q - best_q) <= tol) {
                tied = true;
            }
        }
        pi.set(s, choices[best].action, tied);
    }
    return pi;
}

void write_values_csv(std::ostream& out, const Problem& problem, const ValueTable& u) {
    out << "state,value\n";
    for (std::size_t i = 0; i < problem.state_count(); ++i) {
        out << csv_field(problem.state_label(StateId{i})) << ',' << format_number(u.values.at(i)) << '\n';
    }
}

void write_policy_csv(std::ostream& out, const Problem& problem, const Policy& policy) {
    out << "state,action\n";
    for (std::size_t i = 0; i < problem.state_count(); ++i) {
        auto a = policy.find(StateId{i});
        out << csv_field(problem.state_label(StateId{i})) << ',' << (a ? csv_field(problem.action_label(*a)) : "")
            << '\n';
    }
}

}  // namespace hadm::core
