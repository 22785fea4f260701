#include "hadm/core/belief.hpp"

#include <cmath>
#include <sstream>

#include "hadm/core/errors.hpp"

namespace hadm::core {

Belief::Belief(std::vector<double> probabilities) : p_(std::move(probabilities)) {
    if (p_.empty()) throw ConfigError("belief over an empty state space");
    double total = 0.0;
    for (double v : p_) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("belief entries must be finite and nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
        std::ostringstream msg;
        msg << "belief sums to " << total;
        throw ConfigError(msg.str());
    }
}

Belief Belief::point_mass(std::size_t state_count, StateId s) {
    if (s.value >= state_count) throw ConfigError("point mass outside the state space");
    std::vector<double> p(state_count, 0.0);
    p[s.value] = 1.0;
    return Belief(std::move(p));
}

Belief Belief::uniform(std::size_t state_count) {
    if (state_count == 0) throw ConfigError("belief over an empty state space");
    return Belief(std::vector<double>(state_count, 1.0 / static_cast<double>(state_count)));
}

Belief Belief::uniform_over(std::size_t state_count, std::span<const StateId> support) {
    if (support.empty()) throw ConfigError("uniform belief over an empty support");
    std::vector<double> p(state_count, 0.0);
    for (StateId s : support) {
        if (s.value >= state_count) throw ConfigError("support outside the state space");
        p[s.value] += 1.0 / static_cast<double>(support.size());
    }
    return Belief(std::move(p));
}

double Belief::mass(std::span<const StateId> states) const {
    double m = 0.0;
    for (StateId s : states) m += p_.at(s.value);
    return m;
}

double Belief::terminal_mass(const Problem& problem) const { return mass(problem.terminal_states()); }

StateId Belief::most_likely() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p_.size(); ++i) {
        if (p_[i] > p_[best]) best = i;
    }
    return StateId{best};
}

std::vector<StateId> Belief::support() const {
    std::vector<StateId> out;
    for (std::size_t i = 0; i < p_.size(); ++i) {
        if (p_[i] > 0.0) out.push_back(StateId{i});
    }
    return out;
}

std::vector<double> predict(const Problem& problem, const Belief& b, ActionId a) {
    if (b.size() != problem.state_count()) throw ConfigError("belief size does not match the state space");
    std::vector<double> next(problem.state_count(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double w = b.probabilities()[i];
        if (w == 0.0) continue;
        const StateId s{i};
        const ActionId applied = problem.is_terminal(s) ? problem.stay_action() : a;
        for (const auto& o : problem.transitions(s, applied)) next[o.next.value] += w * o.probability;
    }
    return next;
}

namespace {

// Unnormalized posterior: sum over sources of b(s) T(s,a_s,s') O(s',a_s,o), where
// terminal sources self-loop (a_s = stay). A model without a row for a terminal
// self-loop leaves that mass unaffected by the observation.
std::vector<double> weighted_successors(const Problem& problem, const Belief& b, ActionId a, ObservationId o) {
    if (b.size() != problem.state_count()) throw ConfigError("belief size does not match the state space");
    std::vector<double> next(problem.state_count(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double w = b.probabilities()[i];
        if (w == 0.0) continue;
        const StateId s{i};
        const ActionId applied = problem.is_terminal(s) ? problem.stay_action() : a;
        for (const auto& out : problem.transitions(s, applied)) {
            double like = 0.0;
            if (!problem.has_observation_model()) {
                like = out.next.value == o.value ? 1.0 : 0.0;
            } else if (applied == problem.stay_action() && problem.observations(out.next, applied).empty()) {
                like = 1.0;
            } else {
                like = problem.observation_probability(out.next, applied, o);
            }
            next[out.next.value] += w * out.probability * like;
        }
    }
    return next;
}

}  // namespace

double observation_likelihood(const Problem& problem, const Belief& b, ActionId a, ObservationId o) {
    double z = 0.0;
    for (double v : weighted_successors(problem, b, a, o)) z += v;
    return z;
}

Belief belief_update(const Problem& problem, const Belief& b, ActionId a, ObservationId o) {
    if (o.value >= problem.observation_count()) throw ConfigError("observation outside the alphabet");
    auto next = weighted_successors(problem, b, a, o);
    double z = 0.0;
    for (double v : next) z += v;
    if (!(z > 0.0)) {
        throw ImpossibleObservationError("observation '" + problem.observation_label(o) + "' after action '" +
                                         problem.action_label(a) + "' has zero probability under the belief");
    }
    for (double& v : next) v /= z;
    return Belief(std::move(next));
}

}  // namespace hadm::core
