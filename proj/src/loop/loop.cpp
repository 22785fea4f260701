#include "hadm/loop/loop.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <set>

#include <json.hpp>

#include "hadm/core/format.hpp"

namespace hadm::loop {

namespace {

template <typename Row, typename Pick>
auto sample(const Row& row, std::mt19937_64& rng, Pick pick) {
    const double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (const auto& entry : row) {
        acc += entry.probability;
        if (x < acc) return pick(entry);
    }
    return pick(row.back());
}

}  // namespace

ProblemPlant::ProblemPlant(const Problem& problem, StateId s0, std::uint64_t seed)
    : problem_(&problem), state_(s0), rng_(seed) {}

Feedback ProblemPlant::step(ActionId a) {
    const auto outcomes = problem_->transitions(state_, a);
    const auto& chosen = sample(outcomes, rng_, [](const core::Outcome& o) { return o; });
    state_ = chosen.next;
    const auto observations = problem_->observations(state_, a);
    const auto o = sample(observations, rng_, [](const core::ObservationOutcome& e) { return e.observation; });
    return Feedback{o, chosen.reward};
}

OfflineProvider::OfflineProvider(core::Policy policy, std::string name)
    : policy_(std::move(policy)), name_(std::move(name)) {}

ActionId OfflineProvider::select(const Belief& b, std::size_t, const shm::SensorObservation*) {
    const StateId s = b.most_likely();
    if (auto a = policy_.find(s)) return *a;
    throw ProviderExhausted("offline policy has no action for state " + std::to_string(s.value));
}

namespace {

std::size_t resolve_horizon(const Problem& problem, std::optional<std::size_t> horizon) {
    if (horizon) return *horizon;
    if (problem.horizon()) return *problem.horizon();
    throw InvalidConfigError("online provider needs a finite horizon");
}

}  // namespace

OnlineProvider::OnlineProvider(const Problem& problem, core::ActionFilter filter, std::optional<std::size_t> horizon,
                               std::string name)
    : search_(problem, std::move(filter)), horizon_(resolve_horizon(problem, horizon)), name_(std::move(name)) {}

ActionId OnlineProvider::select(const Belief& b, std::size_t step, const shm::SensorObservation*) {
    const std::size_t depth = step < horizon_ ? horizon_ - step : 0;
    std::lock_guard lock(mutex_);
    try {
        const auto d = search_.best(b, depth);
        last_value_ = d.value;
        return d.action;
    } catch (const DomainError& e) {
        throw ProviderExhausted(e.what());
    }
}

double OnlineProvider::last_value() const {
    std::lock_guard lock(mutex_);
    return last_value_;
}

SerPolicy::SerPolicy(std::vector<StateId> members, std::map<StateId, ActionId> actions,
                     std::vector<std::string> coverage, double belief_threshold)
    : members_(std::move(members)),
      actions_(std::move(actions)),
      coverage_(std::move(coverage)),
      belief_threshold_(belief_threshold) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (!(belief_threshold_ > 0.0 && belief_threshold_ <= 1.0)) {
        throw InvalidConfigError("SER belief threshold must lie in (0, 1]");
    }
}

SerPolicy SerPolicy::on_observation(shm::ThresholdPredicate trigger, std::map<StateId, ActionId> actions,
                                    std::vector<std::string> coverage) {
    SerPolicy p;
    p.actions_ = std::move(actions);
    p.coverage_ = std::move(coverage);
    p.trigger_ = std::move(trigger);
    return p;
}

bool SerPolicy::holds(const Belief& b, const shm::SensorObservation* sensors) const {
    if (trigger_) {
        if (!sensors) throw SerFault("SER trigger '" + trigger_->id + "' needs sensor readings");
        return trigger_->fires(sensors->value(trigger_->channel));
    }
    return !members_.empty() && b.mass(members_) >= belief_threshold_;
}

ActionId SerPolicy::action(const Belief& b) const {
    StateId s = b.most_likely();
    if (!trigger_) {
        double best = -1.0;
        for (StateId m : members_) {
            if (b[m] > best) {
                best = b[m];
                s = m;
            }
        }
    }
    auto it = actions_.find(s);
    if (it == actions_.end()) {
        throw SerFault("SER predicate holds in state " + std::to_string(s.value) + " but no SER action is tabulated");
    }
    return it->second;
}

std::vector<StateId> SerPolicy::states() const {
    if (!trigger_) return members_;
    std::vector<StateId> out;
    for (const auto& [s, a] : actions_) out.push_back(s);
    return out;
}

bool SerPolicy::contains(StateId s) const {
    if (trigger_) return actions_.count(s) > 0;
    return std::binary_search(members_.begin(), members_.end(), s);
}

Arbitration arbitrate(const Belief& b, const shm::SensorObservation* sensors, const SerPolicy* ser,
                      PolicyProvider& provider, std::size_t step) {
    if (ser && ser->holds(b, sensors)) return Arbitration{ser->action(b), kSerTag};
    return Arbitration{provider.select(b, step, sensors), provider.name()};
}

std::string to_string(SerViolation::Kind k) {
    switch (k) {
        case SerViolation::Kind::missing_action: return "missing_action";
        case SerViolation::Kind::inadmissible_action: return "inadmissible_action";
        case SerViolation::Kind::cycle: return "cycle";
        case SerViolation::Kind::step_bound: return "step_bound";
        case SerViolation::Kind::unsafe_exit: return "unsafe_exit";
    }
    return "unknown";
}

namespace {

class SerChecker {
public:
    SerChecker(const Problem& problem, const SerPolicy& ser, const std::function<bool(StateId)>& safe,
               std::size_t max_steps)
        : problem_(problem), ser_(ser), safe_(safe), max_steps_(max_steps) {}

    SerReport run() {
        for (StateId s : ser_.states()) explore(s);
        return std::move(report_);
    }

private:
    void explore(StateId s) {
        if (safe_(s)) return;
        if (!path_.empty() && !ser_.contains(s)) {
            report(SerViolation::Kind::unsafe_exit, s,
                   "SER path leaves the SER set at " + problem_.state_label(s) + " outside the safe set");
            return;
        }
        if (auto it = std::find(path_.begin(), path_.end(), s); it != path_.end()) {
            std::string cycle;
            for (auto c = it; c != path_.end(); ++c) cycle += problem_.state_label(*c) + " -> ";
            report(SerViolation::Kind::cycle, s, "SER cycle " + cycle + problem_.state_label(s) + " avoids the safe set");
            return;
        }
        if (path_.size() == max_steps_) {
            report(SerViolation::Kind::step_bound, s,
                   "safe set not reached within " + std::to_string(max_steps_) + " SER steps");
            return;
        }
        const auto& table = ser_.table();
        auto it = table.find(s);
        if (it == table.end()) {
            report(SerViolation::Kind::missing_action, s, "no SER action for " + problem_.state_label(s));
            return;
        }
        if (!problem_.admissible(s, it->second)) {
            report(SerViolation::Kind::inadmissible_action, s,
                   "SER action '" + problem_.action_label(it->second) + "' is inadmissible in " +
                       problem_.state_label(s));
            return;
        }
        path_.push_back(s);
        for (const auto& o : problem_.transitions(s, it->second)) {
            if (o.probability > 0.0) explore(o.next);
        }
        path_.pop_back();
    }

    void report(SerViolation::Kind kind, StateId s, std::string message) {
        if (!seen_.insert({static_cast<int>(kind), s.value}).second) return;
        report_.violations.push_back(SerViolation{kind, s, std::move(message)});
    }

    const Problem& problem_;
    const SerPolicy& ser_;
    const std::function<bool(StateId)>& safe_;
    std::size_t max_steps_;
    std::vector<StateId> path_;
    std::set<std::pair<int, std::size_t>> seen_;
    SerReport report_;
};

}  // namespace

SerReport validate_ser(const Problem& problem, const SerPolicy& ser, const std::function<bool(StateId)>& safe,
                       std::size_t max_steps) {
    return SerChecker(problem, ser, safe, max_steps).run();
}

std::string summarize_belief(const Problem& problem, const Belief& b) {
    auto support = b.support();
    if (support.size() == 1) return problem.state_label(support.front());
    std::stable_sort(support.begin(), support.end(), [&](StateId x, StateId y) { return b[x] > b[y]; });
    std::string out;
    for (std::size_t i = 0; i < support.size() && i < 3; ++i) {
        if (!out.empty()) out += " | ";
        out += problem.state_label(support[i]) + " @" + core::format_number(b[support[i]]);
    }
    if (support.size() > 3) out += " | +" + std::to_string(support.size() - 3) + " more";
    return out;
}

LoopTrace run_loop(Environment& env, const Problem& problem, PolicyProvider& provider, const SerPolicy* ser, Belief b0,
                   const LoopOptions& options) {
    LoopTrace trace;
    Belief b = std::move(b0);
    double cumulative = 0.0;
    for (std::size_t step = 0;; ++step) {
        if (b.terminal_mass(problem) >= options.terminal_threshold) {
            trace.terminal = true;
            break;
        }
        if (step == options.step_cap) {
            trace.truncated = true;
            break;
        }
        const auto sensors = env.sensors();
        Arbitration choice;
        try {
            choice = arbitrate(b, sensors ? &*sensors : nullptr, ser, provider, step);
        } catch (const ProviderExhausted& e) {
            trace.aborted = e.what();
            break;
        }
        TraceStep record;
        record.step = step;
        record.believed_state = b.most_likely();
        record.belief = summarize_belief(problem, b);
        record.action = choice.action;
        record.action_label = problem.action_label(choice.action);
        record.provider = std::move(choice.provider);
        const Feedback fb = env.step(choice.action);
        cumulative += fb.reward;
        record.observation = problem.observation_label(fb.observation);
        record.reward = fb.reward;
        record.cumulative = cumulative;
        trace.steps.push_back(std::move(record));
        try {
            b = core::belief_update(problem, b, choice.action, fb.observation);
        } catch (const ImpossibleObservationError& e) {
            trace.aborted = e.what();
            break;
        }
    }
    trace.final_state = b.most_likely();
    trace.final_label = problem.state_label(trace.final_state);
    return trace;
}

void write_trace_jsonl(std::ostream& out, const LoopTrace& trace) {
    for (const auto& s : trace.steps) {
        nlohmann::ordered_json j;
        j["step"] = s.step;
        j["belief"] = s.belief;
        j["action"] = s.action_label;
        j["provider"] = s.provider;
        j["observation"] = s.observation;
        j["reward"] = s.reward;
        j["cumulative"] = s.cumulative;
        out << j.dump() << '\n';
    }
}

void write_trace_table(std::ostream& out, const LoopTrace& trace) {
    std::size_t width = 6;
    for (const auto& s : trace.steps) width = std::max(width, s.action_label.size());
    out << std::left << std::setw(6) << "step" << std::setw(static_cast<int>(width) + 2) << "action" << std::setw(10)
        << "provider" << std::setw(12) << "reward" << std::setw(12) << "cumulative"
        << "observation\n";
    for (const auto& s : trace.steps) {
        out << std::left << std::setw(6) << s.step << std::setw(static_cast<int>(width) + 2) << s.action_label
            << std::setw(10) << s.provider << std::setw(12) << core::format_number(s.reward) << std::setw(12)
            << core::format_number(s.cumulative) << s.observation << '\n';
    }
    out << "final: " << trace.final_label;
    if (trace.terminal) out << " (terminal)";
    if (trace.truncated) out << " (truncated at step cap)";
    if (trace.aborted) out << " (aborted: " << *trace.aborted << ")";
    out << '\n';
}

}  // namespace hadm::loop
