#include "hadm/core/problem.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "hadm/core/errors.hpp"

namespace hadm::core {

namespace {

constexpr const char* kSingleComponent = "state";

}  // namespace

StateVector::StateVector(std::string label) {
    components_.push_back({kSingleComponent, std::move(label)});
}

StateVector::StateVector(std::vector<StateComponent> components) : components_(std::move(components)) {
    for (std::size_t i = 0; i < components_.size(); ++i) {
        for (std::size_t j = i + 1; j < components_.size(); ++j) {
            if (components_[i].name == components_[j].name) {
                throw ConfigError("duplicate state component '" + components_[i].name + "'");
            }
        }
    }
}

const std::string* StateVector::find(std::string_view name) const {
    for (const auto& c : components_) {
        if (c.name == name) return &c.value;
    }
    return nullptr;
}

std::string StateVector::label() const {
    if (components_.size() == 1 && components_.front().name == kSingleComponent) {
        return components_.front().value;
    }
    std::string out;
    for (std::size_t i = 0; i < components_.size(); ++i) {
        if (i != 0) out += ';';
        out += components_[i].name;
        out += '=';
        out += components_[i].value;
    }
    return out;
}

std::optional<StateId> Problem::find_state(std::string_view label) const {
    auto it = state_index_.find(std::string(label));
    if (it == state_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<ActionId> Problem::find_action(std::string_view label) const {
    auto it = action_index_.find(std::string(label));
    if (it == action_index_.end()) return std::nullopt;
    return it->second;
}

const Choice* Problem::find_choice(StateId s, ActionId a) const {
    for (const auto& c : choices_.at(s.value)) {
        if (c.action == a) return &c;
    }
    return nullptr;
}

const Choice& Problem::choice(StateId s, ActionId a) const {
    if (const Choice* c = find_choice(s, a)) return *c;
    throw DomainError("action '" + action_label(a) + "' is not admissible in state '" + state_label(s) + "'");
}

std::size_t Problem::observation_count() const {
    return has_observation_model() ? observation_labels_.size() : states_.size();
}

const std::string& Problem::observation_label(ObservationId o) const {
    return has_observation_model() ? observation_labels_.at(o.value) : state_labels_.at(o.value);
}

std::optional<ObservationId> Problem::find_observation(std::string_view label) const {
    if (!has_observation_model()) {
        if (auto s = find_state(label)) return ObservationId{s->value};
        return std::nullopt;
    }
    auto it = observation_index_.find(std::string(label));
    if (it == observation_index_.end()) return std::nullopt;
    return it->second;
}

std::vector<ObservationOutcome> Problem::observations(StateId next, ActionId a) const {
    if (!has_observation_model()) return {{ObservationId{next.value}, 1.0}};
    auto it = observation_rows_.find(pair_key(next, a, action_labels_.size()));
    if (it == observation_rows_.end()) return {};
    return it->second;
}

double Problem::observation_probability(StateId next, ActionId a, ObservationId o) const {
    if (!has_observation_model()) return next.value == o.value ? 1.0 : 0.0;
    double p = 0.0;
    for (const auto& row : observations(next, a)) {
        if (row.observation == o) p += row.probability;
    }
    return p;
}

ProblemBuilder::ProblemBuilder() { problem_.stay_ = add_action(kStayLabel); }

StateId ProblemBuilder::add_state(StateVector state) {
    std::string label = state.label();
    if (problem_.state_index_.contains(label)) {
        throw ConfigError("duplicate state '" + label + "'");
    }
    StateId id{problem_.states_.size()};
    problem_.state_index_.emplace(label, id);
    problem_.state_labels_.push_back(std::move(label));
    problem_.states_.push_back(std::move(state));
    problem_.choices_.emplace_back();
    terminal_marked_.push_back(false);
    terminal_rewards_.push_back(0.0);
    return id;
}

ActionId ProblemBuilder::add_action(std::string label) {
    if (auto it = problem_.action_index_.find(label); it != problem_.action_index_.end()) return it->second;
    ActionId id{problem_.action_labels_.size()};
    problem_.action_index_.emplace(label, id);
    problem_.action_labels_.push_back(std::move(label));
    return id;
}

ObservationId ProblemBuilder::add_observation(std::string label) {
    if (auto it = problem_.observation_index_.find(label); it != problem_.observation_index_.end()) {
        return it->second;
    }
    ObservationId id{problem_.observation_labels_.size()};
    problem_.observation_index_.emplace(label, id);
    problem_.observation_labels_.push_back(std::move(label));
    return id;
}

void ProblemBuilder::add_choice(StateId s, ActionId a, std::vector<Outcome> outcomes) {
    if (s.value >= problem_.states_.size()) throw ConfigError("choice for undeclared state");
    if (a.value >= problem_.action_labels_.size()) throw ConfigError("choice with undeclared action");
    if (a == problem_.stay_) throw ConfigError("'stay' is reserved for terminal self-loops");
    auto& row = problem_.choices_[s.value];
    for (const auto& c : row) {
        if (c.action == a) {
            throw ConfigError("action '" + problem_.action_labels_[a.value] + "' declared twice in state '" +
                              problem_.state_labels_[s.value] + "'");
        }
    }
    row.push_back(Choice{a, std::move(outcomes), 0.0});
}

void ProblemBuilder::add_choice(StateId s, ActionId a, double reward,
                                const std::vector<std::pair<StateId, double>>& successors) {
    std::vector<Outcome> outcomes;
    outcomes.reserve(successors.size());
    for (const auto& [next, p] : successors) outcomes.push_back({next, p, reward});
    add_choice(s, a, std::move(outcomes));
}

void ProblemBuilder::set_terminal(StateId s, double self_loop_reward) {
    if (s.value >= problem_.states_.size()) throw ConfigError("terminal mark on undeclared state");
    terminal_marked_[s.value] = true;
    terminal_rewards_[s.value] = self_loop_reward;
}

void ProblemBuilder::set_observations(StateId next, ActionId a, std::vector<ObservationOutcome> row) {
    if (next.value >= problem_.states_.size()) throw ConfigError("observation row for undeclared state");
    if (a.value >= problem_.action_labels_.size()) throw ConfigError("observation row for undeclared action");
    pending_observations_.push_back({next, a, std::move(row)});
}

void ProblemBuilder::add_initial_state(StateId s) {
    if (s.value >= problem_.states_.size()) throw ConfigError("initial state is undeclared");
    problem_.initial_.push_back(s);
}

ProblemBuilder& ProblemBuilder::discount(double gamma) {
    problem_.discount_ = gamma;
    return *this;
}

ProblemBuilder& ProblemBuilder::horizon(std::optional<std::size_t> h) {
    problem_.horizon_ = h;
    return *this;
}

Problem ProblemBuilder::build() && {
    Problem& p = problem_;
    const std::size_t n = p.states_.size();
    if (n == 0) throw ConfigError("problem has no states");
    if (!(p.discount_ >= 0.0 && p.discount_ <= 1.0)) throw ConfigError("discount must lie in [0,1]");
    if (p.discount_ == 1.0 && !p.horizon_) throw ConfigError("undiscounted problems need a bounded horizon");

    p.terminal_flags_.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const StateId s{i};
        auto& row = p.choices_[i];
        if (terminal_marked_[i]) {
            if (!row.empty()) {
                throw ConfigError("terminal state '" + p.state_labels_[i] + "' declares actions; it may only self-loop");
            }
            if (!std::isfinite(terminal_rewards_[i])) throw ConfigError("non-finite terminal reward");
            row.push_back(Choice{p.stay_, {{s, 1.0, terminal_rewards_[i]}}, terminal_rewards_[i]});
            p.terminal_flags_[i] = true;
            p.terminals_.push_back(s);
            continue;
        }
        if (row.empty()) throw ConfigError("non-terminal state '" + p.state_labels_[i] + "' has no admissible action");
        for (auto& c : row) {
            if (c.outcomes.empty()) {
                throw ConfigError("no outcomes for action '" + p.action_labels_[c.action.value] + "' in state '" +
                                  p.state_labels_[i] + "'");
            }
            double total = 0.0;
            double expected = 0.0;
            for (const auto& o : c.outcomes) {
                if (o.next.value >= n) throw ConfigError("transition to undeclared state");
                if (!(o.probability >= 0.0 && o.probability <= 1.0)) {
                    throw ConfigError("transition probability outside [0,1] in state '" + p.state_labels_[i] + "'");
                }
                if (!std::isfinite(o.reward)) throw ConfigError("non-finite reward in state '" + p.state_labels_[i] + "'");
                total += o.probability;
                expected += o.probability * o.reward;
            }
            if (std::abs(total - 1.0) > kProbabilityTolerance) {
                std::ostringstream msg;
                msg << "transition row for ('" << p.state_labels_[i] << "', '" << p.action_labels_[c.action.value]
                    << "') sums to " << total;
                throw ConfigError(msg.str());
            }
            c.expected_reward = expected;
        }
    }

    if (!pending_observations_.empty() || !p.observation_labels_.empty()) {
        const std::size_t m = p.action_labels_.size();
        for (auto& pending : pending_observations_) {
            double total = 0.0;
            for (const auto& o : pending.row) {
                if (o.observation.value >= p.observation_labels_.size()) {
                    throw ConfigError("observation row references an undeclared observation");
                }
                if (!(o.probability >= 0.0 && o.probability <= 1.0)) {
                    throw ConfigError("observation probability outside [0,1]");
                }
                total += o.probability;
            }
            if (std::abs(total - 1.0) > kProbabilityTolerance) {
                throw ConfigError("observation row for ('" + p.state_labels_[pending.next.value] + "', '" +
                                  p.action_labels_[pending.action.value] + "') does not sum to 1");
            }
            p.observation_rows_[Problem::pair_key(pending.next, pending.action, m)] = std::move(pending.row);
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& c : p.choices_[i]) {
                if (c.action == p.stay_) continue;
                for (const auto& o : c.outcomes) {
                    if (!p.observation_rows_.contains(Problem::pair_key(o.next, c.action, m))) {
                        throw ConfigError("missing observation row for successor '" + p.state_labels_[o.next.value] +
                                          "' under action '" + p.action_labels_[c.action.value] + "'");
                    }
                }
            }
        }
    }

    if (!p.initial_.empty()) {
        std::vector<bool> seen(n, false);
        std::deque<StateId> frontier;
        for (StateId s : p.initial_) {
            if (!seen[s.value]) {
                seen[s.value] = true;
                frontier.push_back(s);
            }
        }
        while (!frontier.empty()) {
            StateId s = frontier.front();
            frontier.pop_front();
            for (const auto& c : p.choices_[s.value]) {
                for (const auto& o : c.outcomes) {
                    if (!seen[o.next.value]) {
                        seen[o.next.value] = true;
                        frontier.push_back(o.next);
                    }
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!seen[i]) throw ConfigError("state '" + p.state_labels_[i] + "' is unreachable from the initial states");
        }
    }

    return std::move(problem_);
}

}  // namespace hadm::core
