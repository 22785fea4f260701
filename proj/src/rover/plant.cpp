#include "hadm/rover/plant.hpp"

#include <algorithm>

#include "hadm/core/errors.hpp"

namespace hadm::rover {

namespace {

using Variables = std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>>;

const std::vector<std::pair<std::string, double>>& support_of(const Variables& vars, const std::string& name) {
    for (const auto& [v, support] : vars) {
        if (v == name) return support;
    }
    throw ConfigError("'" + name + "' is not a random variable of this scenario");
}

void assign(const Variables& vars, GroundTruth& truth, const std::string& name, const std::string& value) {
    const auto& support = support_of(vars, name);
    if (std::none_of(support.begin(), support.end(), [&](const auto& e) { return e.first == value; })) {
        std::string allowed;
        for (const auto& [v, p] : support) allowed += (allowed.empty() ? "" : ", ") + v;
        throw ConfigError("'" + value + "' is not a possible value of " + name + " (expected one of " + allowed + ")");
    }
    truth.values[name] = value;
}

}  // namespace

bool GroundTruth::consistent(std::span<const Reveal> reveals) const {
    return std::all_of(reveals.begin(), reveals.end(), [&](const Reveal& r) {
        auto it = values.find(r.variable);
        return it != values.end() && it->second == r.value;
    });
}

std::string GroundTruth::describe() const {
    std::string out;
    for (const auto& [k, v] : values) out += (out.empty() ? "" : ", ") + k + "=" + v;
    return out.empty() ? "(none)" : out;
}

Variables random_variables(const ScenarioSpec& spec) {
    Variables out;
    for (const auto& r : spec.regions) {
        if (r.deterministic()) continue;
        std::vector<std::pair<std::string, double>> support;
        for (const auto& [cls, p] : r.terrain) {
            if (p > 0.0) support.emplace_back(cls, p);
        }
        out.emplace_back("terrain." + r.id, std::move(support));
    }
    for (const auto& a : spec.activities) {
        if (a.redo_probability <= 0.0 || a.redo_probability >= 1.0) continue;
        out.emplace_back("redo." + a.id, std::vector<std::pair<std::string, double>>{
                                              {"false", 1.0 - a.redo_probability}, {"true", a.redo_probability}});
    }
    return out;
}

GroundTruth sample_ground_truth(const ScenarioSpec& spec, std::mt19937_64& rng) {
    GroundTruth truth;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& [name, support] : random_variables(spec)) {
        const double x = u(rng);
        double acc = 0.0;
        std::string chosen = support.back().first;
        for (const auto& [value, p] : support) {
            acc += p;
            if (x < acc) {
                chosen = value;
                break;
            }
        }
        truth.values[name] = chosen;
    }
    return truth;
}

std::vector<std::pair<GroundTruth, double>> enumerate_ground_truths(const ScenarioSpec& spec) {
    std::vector<std::pair<GroundTruth, double>> out{{GroundTruth{}, 1.0}};
    for (const auto& [name, support] : random_variables(spec)) {
        std::vector<std::pair<GroundTruth, double>> next;
        for (const auto& [truth, p] : out) {
            for (const auto& [value, q] : support) {
                GroundTruth t = truth;
                t.values[name] = value;
                next.emplace_back(std::move(t), p * q);
            }
        }
        out = std::move(next);
    }
    return out;
}

void apply_override(const ScenarioSpec& spec, GroundTruth& truth, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == assignment.size()) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form var=value");
    }
    const std::string name(assignment.substr(0, eq));
    const std::string value(assignment.substr(eq + 1));
    const auto vars = random_variables(spec);
    if (name == "terrain") {
        const std::string suffix = "-both";
        std::string cls = value;
        if (cls.size() > suffix.size() && cls.compare(cls.size() - suffix.size(), suffix.size(), suffix) == 0) {
            cls.resize(cls.size() - suffix.size());
        }
        bool any = false;
        for (const auto& [v, support] : vars) {
            if (v.rfind("terrain.", 0) != 0) continue;
            assign(vars, truth, v, cls);
            any = true;
        }
        if (!any) throw ConfigError("scenario '" + spec.name + "' has no uncertain terrain");
        return;
    }
    if (name == "redo") {
        bool any = false;
        for (const auto& [v, support] : vars) {
            if (v.rfind("redo.", 0) != 0) continue;
            assign(vars, truth, v, value);
            any = true;
        }
        if (!any) throw ConfigError("scenario '" + spec.name + "' has no redo-prone activity");
        return;
    }
    assign(vars, truth, name, value);
}

void apply_overrides(const ScenarioSpec& spec, GroundTruth& truth, std::span<const std::string> assignments) {
    for (const auto& a : assignments) apply_override(spec, truth, a);
}

Plant::Plant(const CompiledScenario& compiled, GroundTruth truth)
    : compiled_(&compiled), truth_(std::move(truth)), state_(compiled.root()) {}

shm::SensorObservation Plant::observe() const { return sense(compiled_->spec(), rover()); }

Plant::Step Plant::step(core::ActionId a) {
    const auto& problem = compiled_->problem();
    const auto outcomes = problem.transitions(state_, a);
    const auto& tags = compiled_->reveals(state_, a);
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        if (!truth_.consistent(tags[k])) continue;
        state_ = outcomes[k].next;
        return Step{state_, observe(), outcomes[k].reward};
    }
    throw ModelInconsistencyError("no outcome of '" + problem.action_label(a) + "' in " + problem.state_label(state_) +
                                  " matches the ground truth " + truth_.describe());
}

}  // namespace hadm::rover
