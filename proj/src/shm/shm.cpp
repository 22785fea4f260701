#include "hadm/shm/shm.hpp"

#include <algorithm>
#include <cmath>

#include "hadm/core/errors.hpp"
#include "hadm/core/format.hpp"
#include "hadm/core/planning.hpp"

namespace hadm::shm {

double SensorObservation::value(const std::string& channel) const {
    auto it = values.find(channel);
    if (it == values.end()) throw ConfigError("observation has no numeric channel '" + channel + "'");
    return it->second;
}

const std::string& SensorObservation::label(const std::string& channel) const {
    auto it = labels.find(channel);
    if (it == labels.end()) throw ConfigError("observation has no label channel '" + channel + "'");
    return it->second;
}

Comparator parse_comparator(const std::string& text) {
    if (text == "<") return Comparator::less;
    if (text == "<=") return Comparator::less_equal;
    if (text == ">") return Comparator::greater;
    if (text == ">=") return Comparator::greater_equal;
    throw ConfigError("unknown comparator '" + text + "'");
}

std::string to_string(Comparator c) {
    switch (c) {
        case Comparator::less: return "<";
        case Comparator::less_equal: return "<=";
        case Comparator::greater: return ">";
        case Comparator::greater_equal: return ">=";
    }
    return "?";
}

bool ThresholdPredicate::fires(double reading) const {
    switch (comparator) {
        case Comparator::less: return reading < limit;
        case Comparator::less_equal: return reading <= limit;
        case Comparator::greater: return reading > limit;
        case Comparator::greater_equal: return reading >= limit;
    }
    return false;
}

bool OperationalConstraints::terrain_allowed(const std::string& terrain_class) const {
    return allowed_terrain.empty() || allowed_terrain.contains(terrain_class);
}

void OperationalConstraints::merge(const OperationalConstraints& other) {
    if (!other.restricts_terrain()) return;
    if (!restricts_terrain()) {
        allowed_terrain = other.allowed_terrain;
        return;
    }
    std::set<std::string> both;
    std::set_intersection(allowed_terrain.begin(), allowed_terrain.end(), other.allowed_terrain.begin(),
                          other.allowed_terrain.end(), std::inserter(both, both.begin()));
    // An empty intersection would read as "unrestricted"; keep a sentinel instead.
    allowed_terrain = both.empty() ? std::set<std::string>{""} : both;
}

void ShmRules::validate() const {
    std::set<std::string> ids;
    for (const auto& p : detector.predicates) {
        if (!std::isfinite(p.limit)) throw ConfigError("detector '" + p.id + "' has a non-finite limit");
        if (!ids.insert(p.id).second) throw ConfigError("duplicate detector id '" + p.id + "'");
    }
    for (const auto& d : diagnoses) {
        if (!ids.contains(d.predicate)) throw ConfigError("diagnosis references unknown detector '" + d.predicate + "'");
        if (!(d.probability >= 0.0 && d.probability <= 1.0)) {
            throw ConfigError("diagnosis probability for '" + d.mode + "' outside [0,1]");
        }
    }
    for (const auto& m : mitigations) {
        if (std::find(actions.begin(), actions.end(), m.action) == actions.end()) {
            throw ConfigError("mitigation for '" + m.mode + "' uses '" + m.action + "', which is not a recovery action");
        }
    }
    if (!(probability_gate >= 0.0 && probability_gate <= 1.0)) throw ConfigError("probability gate outside [0,1]");
}

std::vector<std::string> fired_predicates(const FaultDetector& detector, const SensorObservation& o) {
    std::vector<std::string> out;
    for (const auto& p : detector.predicates) {
        if (p.fires(o.value(p.channel))) out.push_back(p.id);
    }
    return out;
}

bool detect(const FaultDetector& detector, const SensorObservation& o) {
    return !fired_predicates(detector, o).empty();
}

namespace {

const ThresholdPredicate* find_predicate(const ShmRules& rules, const std::string& id) {
    for (const auto& p : rules.detector.predicates) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

std::optional<double> estimate_rate(const std::string& channel, const SensorObservation& o,
                                    std::span<const SensorObservation> history) {
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (it->time_h >= o.time_h) continue;
        auto v = it->values.find(channel);
        if (v == it->values.end()) continue;
        return (o.value(channel) - v->second) / (o.time_h - it->time_h);
    }
    return std::nullopt;
}

}  // namespace

std::vector<FaultDescriptor> diagnose(const ShmRules& rules, std::span<const std::string> fired,
                                      const SensorObservation& o, std::span<const SensorObservation> history) {
    std::vector<FaultDescriptor> out;
    for (const auto& id : fired) {
        bool matched = false;
        for (const auto& rule : rules.diagnoses) {
            if (rule.predicate != id) continue;
            matched = true;
            FaultDescriptor f{rule.component, rule.mode, {}, rule.probability};
            if (rule.rate_parameter) {
                const auto* p = find_predicate(rules, id);
                if (p) {
                    if (auto rate = estimate_rate(p->channel, o, history)) f.parameters[*rule.rate_parameter] = *rate;
                }
            }
            out.push_back(std::move(f));
        }
        if (!matched) out.push_back(FaultDescriptor{"unknown", "unknown:" + id, {}, 0.0});
    }
    return out;
}

std::optional<double> prognose_fault(const PrognosisRule& rule, const FaultDescriptor& f, const SensorObservation& o) {
    auto it = f.parameters.find(rule.parameter);
    if (it == f.parameters.end() || !(it->second > 0.0)) return std::nullopt;
    return std::max(0.0, (rule.limit - o.value(rule.channel)) / it->second);
}

RecoveryOutcome select_recovery(const ShmRules& rules, std::span<const FaultDescriptor> faults,
                                std::optional<double> rul) {
    (void)rul;
    if (faults.empty()) throw DomainError("recovery selection needs at least one fault descriptor");
    const MitigationRule* best = nullptr;
    std::string uncertain;
    for (const auto& f : faults) {
        if (f.probability < rules.probability_gate) {
            uncertain = f.mode;
            continue;
        }
        for (const auto& m : rules.mitigations) {
            if (m.mode != f.mode) continue;
            if (!best || m.priority > best->priority) best = &m;
        }
    }
    if (!best) {
        if (!uncertain.empty()) return Escalation{"diagnosis '" + uncertain + "' is below the probability gate"};
        return Escalation{"no mitigation rule matches the diagnosed faults"};
    }
    RecoveryDecision d{best->action, best->constraints, {}, best->mode};
    if (best->mark_faulty) {
        for (const auto& f : faults) {
            if (f.mode == best->mode) d.faulty_components.push_back(f.component);
        }
    }
    return d;
}

core::ActionId phm_route_choice(const core::Problem& problem, core::StateId s0, std::span<const core::ActionId> routes) {
    if (routes.empty()) throw DomainError("route choice needs at least one route");
    core::ActionId best = routes.front();
    double best_value = core::open_loop_expectation(problem, s0, core::UniformRandom{core::Plan{{best}}}).expected;
    for (std::size_t i = 1; i < routes.size(); ++i) {
        const double v = core::open_loop_expectation(problem, s0, core::UniformRandom{core::Plan{{routes[i]}}}).expected;
        if (v > best_value + core::kTieTolerance * std::max(1.0, std::abs(best_value))) {
            best = routes[i];
            best_value = v;
        }
    }
    return best;
}

std::string to_string(PipelineEvent::Stage stage) {
    switch (stage) {
        case PipelineEvent::Stage::detect: return "detect";
        case PipelineEvent::Stage::diagnose: return "diagnose";
        case PipelineEvent::Stage::prognose: return "prognose";
        case PipelineEvent::Stage::recover: return "recover";
        case PipelineEvent::Stage::escalate: return "escalate";
    }
    return "?";
}

ShmPipeline::ShmPipeline(ShmRules rules) : rules_(std::move(rules)) { rules_.validate(); }

std::optional<RecoveryDecision> ShmPipeline::process(const SensorObservation& o) {
    using Stage = PipelineEvent::Stage;
    const auto fired = fired_predicates(rules_.detector, o);
    std::optional<RecoveryDecision> decision;
    if (!fired.empty()) {
        std::string which;
        for (const auto& id : fired) which += (which.empty() ? "" : ",") + id;
        events_.push_back({Stage::detect, o.time_h, which});

        const auto faults = diagnose(rules_, fired, o, history_);
        for (const auto& f : faults) {
            events_.push_back({Stage::diagnose, o.time_h,
                               f.component + ":" + f.mode + " p=" + core::format_number(f.probability)});
        }

        std::optional<double> rul;
        for (const auto& f : faults) {
            for (const auto& rule : rules_.prognoses) {
                if (rule.mode != f.mode) continue;
                if (auto r = prognose_fault(rule, f, o)) {
                    rul = rul ? std::min(*rul, *r) : *r;
                    events_.push_back({Stage::prognose, o.time_h, f.mode + " rul_h=" + core::format_number(*r)});
                }
            }
        }

        auto outcome = select_recovery(rules_, faults, rul);
        if (auto* d = std::get_if<RecoveryDecision>(&outcome)) {
            constraints_.merge(d->constraints);
            faulty_.insert(d->faulty_components.begin(), d->faulty_components.end());
            events_.push_back({Stage::recover, o.time_h, d->action});
            decision = std::move(*d);
        } else {
            events_.push_back({Stage::escalate, o.time_h, std::get<Escalation>(outcome).reason});
        }
    }
    history_.push_back(o);
    return decision;
}

}  // namespace hadm::shm
