#include "hadm/core/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "hadm/core/errors.hpp"

namespace hadm::core {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t require_horizon(const Problem& problem) {
    if (!problem.horizon()) throw InvalidConfigError("enumeration needs a bounded horizon");
    return *problem.horizon();
}

class OpenLoopEnumerator {
public:
    OpenLoopEnumerator(const Problem& problem, const Behavior& behavior, std::size_t cap)
        : problem_(problem), behavior_(behavior), cap_(cap) {
        const std::size_t h = require_horizon(problem);
        steps_ = h + 1;
        if (const auto* plan = std::get_if<Plan>(&behavior)) {
            if (plan->actions.size() > h + 1) throw ConfigError("plan is longer than the horizon allows");
            steps_ = plan->actions.size();
        }
    }

    OpenLoopResult run(StateId s0) {
        walk(s0, 0, 1.0, 0.0, 1.0);
        for (const auto& sc : result_.scenarios) result_.expected += sc.probability * sc.total_reward;
        return std::move(result_);
    }

private:
    void record(StateId s, double probability, double total) {
        if (result_.scenarios.size() >= cap_) throw ResourceError("open-loop enumeration exceeded the scenario cap");
        result_.scenarios.push_back({probability, total, s});
    }

    void walk(StateId s, std::size_t step, double probability, double total, double weight) {
        if (step == steps_) {
            record(s, probability, total);
            return;
        }
        if (problem_.is_terminal(s)) {
            const double r = problem_.reward(s, problem_.stay_action());
            for (std::size_t k = step; k < steps_; ++k) {
                total += weight * r;
                weight *= problem_.discount();
            }
            record(s, probability, total);
            return;
        }
        if (auto fixed = fixed_action(step)) {
            branch(s, *fixed, step, probability, total, weight);
            return;
        }
        auto choices = problem_.choices(s);
        const double share = 1.0 / static_cast<double>(choices.size());
        for (const auto& c : choices) branch(s, c.action, step, probability * share, total, weight);
    }

    void branch(StateId s, ActionId a, std::size_t step, double probability, double total, double weight) {
        for (const auto& o : problem_.choice(s, a).outcomes) {
            if (o.probability == 0.0) continue;
            walk(o.next, step + 1, probability * o.probability, total + weight * o.reward,
                 weight * problem_.discount());
        }
    }

    std::optional<ActionId> fixed_action(std::size_t step) const {
        const Plan& prefix = std::holds_alternative<Plan>(behavior_) ? std::get<Plan>(behavior_)
                                                                     : std::get<UniformRandom>(behavior_).prefix;
        if (step < prefix.actions.size()) return prefix.actions[step];
        return std::nullopt;
    }

    const Problem& problem_;
    const Behavior& behavior_;
    std::size_t cap_;
    std::size_t steps_ = 0;
    OpenLoopResult result_;
};

}  // namespace

OpenLoopResult open_loop_expectation(const Problem& problem, StateId s0, const Behavior& behavior,
                                     std::size_t scenario_cap) {
    return OpenLoopEnumerator(problem, behavior, scenario_cap).run(s0);
}

Expectimax::Expectimax(const Problem& problem, ActionFilter filter) : problem_(&problem), filter_(std::move(filter)) {}

double Expectimax::terminal_value(StateId s, std::size_t depth) const {
    const double r = problem_->reward(s, problem_->stay_action());
    double total = 0.0;
    double weight = 1.0;
    for (std::size_t k = 0; k <= depth; ++k) {
        total += weight * r;
        weight *= problem_->discount();
    }
    return total;
}

double Expectimax::state_value(StateId s, std::size_t depth) {
    if (problem_->is_terminal(s)) return terminal_value(s, depth);
    const std::size_t key = s.value * (std::size_t{1} << 20) + depth;
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double best = kNegInf;
    for (const auto& c : problem_->choices(s)) {
        if (!allowed(s, c.action)) continue;
        double q = c.expected_reward;
        if (depth > 0) {
            double future = 0.0;
            for (const auto& o : c.outcomes) {
                if (o.probability > 0.0) future += o.probability * state_value(o.next, depth - 1);
            }
            q += problem_->discount() * future;
        }
        best = std::max(best, q);
    }
    memo_.emplace(key, best);
    return best;
}

std::vector<ActionId> Expectimax::candidate_actions(const Weights& w) const {
    std::vector<ActionId> out;
    bool first = true;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const StateId s{i};
        if (w[i] == 0.0 || problem_->is_terminal(s)) continue;
        if (first) {
            for (const auto& c : problem_->choices(s)) {
                if (allowed(s, c.action)) out.push_back(c.action);
            }
            first = false;
        } else {
            std::erase_if(out, [&](ActionId a) { return !problem_->admissible(s, a) || !allowed(s, a); });
        }
    }
    return out;
}

double Expectimax::action_value(const Weights& w, ActionId a, std::size_t depth) {
    double total = 0.0;
    std::map<std::size_t, Weights> by_observation;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        const StateId s{i};
        if (problem_->is_terminal(s)) {
            total += w[i] * terminal_value(s, depth);
            continue;
        }
        const Choice& c = problem_->choice(s, a);
        total += w[i] * c.expected_reward;
        if (depth == 0) continue;
        for (const auto& o : c.outcomes) {
            if (o.probability == 0.0) continue;
            for (const auto& obs : problem_->observations(o.next, a)) {
                if (obs.probability == 0.0) continue;
                auto& next = by_observation[obs.observation.value];
                if (next.empty()) next.assign(w.size(), 0.0);
                next[o.next.value] += w[i] * o.probability * obs.probability;
            }
        }
    }
    for (const auto& [obs, next] : by_observation) total += problem_->discount() * weights_value(next, depth - 1);
    return total;
}

std::optional<Decision> Expectimax::weights_best(const Weights& w, std::size_t depth) {
    std::optional<Decision> best;
    for (ActionId a : candidate_actions(w)) {
        const double q = action_value(w, a, depth);
        if (!best) {
            best = Decision{a, q};
            continue;
        }
        const double tol = kTieTolerance * std::max(1.0, std::max(std::abs(q), std::abs(best->value)));
        if (q > best->value + tol) best = Decision{a, q};
    }
    return best;
}

double Expectimax::weights_value(const Weights& w, std::size_t depth) {
    std::size_t nonterminal = 0;
    std::size_t last = 0;
    double terminal = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        if (problem_->is_terminal(StateId{i})) {
            terminal += w[i] * terminal_value(StateId{i}, depth);
        } else {
            ++nonterminal;
            last = i;
        }
    }
    if (nonterminal == 0) return terminal;
    if (nonterminal == 1 && !problem_->has_observation_model()) {
        return terminal + w[last] * state_value(StateId{last}, depth);
    }
    auto best = weights_best(w, depth);
    return best ? best->value : kNegInf;
}

double Expectimax::value(StateId s, std::size_t depth) {
    if (!problem_->has_observation_model()) return state_value(s, depth);
    return value(Belief::point_mass(problem_->state_count(), s), depth);
}

double Expectimax::value(const Belief& b, std::size_t depth) {
    if (b.size() != problem_->state_count()) throw ConfigError("belief size does not match the state space");
    return weights_value(Weights(b.probabilities().begin(), b.probabilities().end()), depth);
}

Decision Expectimax::best(StateId s, std::size_t depth) {
    return best(Belief::point_mass(problem_->state_count(), s), depth);
}

Decision Expectimax::best(const Belief& b, std::size_t depth) {
    if (b.size() != problem_->state_count()) throw ConfigError("belief size does not match the state space");
    const Weights w(b.probabilities().begin(), b.probabilities().end());
    bool all_terminal = true;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0 && !problem_->is_terminal(StateId{i})) all_terminal = false;
    }
    if (all_terminal) return Decision{problem_->stay_action(), weights_value(w, depth)};
    auto decision = weights_best(w, depth);
    if (!decision) throw DomainError("no admissible action passes the action filter for the current belief");
    return *decision;
}

double closed_loop_value(const Problem& problem, StateId s0) {
    return Expectimax(problem).value(s0, require_horizon(problem));
}

double closed_loop_value(const Problem& problem, const Belief& b0) {
    return Expectimax(problem).value(b0, require_horizon(problem));
}

Decision best_action(const Problem& problem, const Belief& b, std::size_t depth, const ActionFilter& filter) {
    return Expectimax(problem, filter).best(b, depth);
}

}  // namespace hadm::core
