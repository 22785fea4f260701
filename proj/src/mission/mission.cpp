#include "hadm/mission/mission.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "hadm/core/errors.hpp"
#include "hadm/core/format.hpp"
#include "hadm/core/solvers.hpp"

namespace hadm::mission {

using core::ActionId;
using core::Problem;
using core::StateId;

RoverEnvironment::RoverEnvironment(const rover::CompiledScenario& compiled, rover::GroundTruth truth)
    : plant_(compiled, std::move(truth)) {}

loop::Feedback RoverEnvironment::step(ActionId a) {
    const auto s = plant_.step(a);
    return loop::Feedback{core::ObservationId{s.next.value}, s.reward};
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::hadm: return "hadm";
        case Strategy::shm_baseline: return "shm-baseline";
        case Strategy::phm_commit: return "phm-commit";
        case Strategy::fixed_plan: return "fixed-plan";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view text) {
    for (Strategy s : kAllStrategies) {
        if (to_string(s) == text) return s;
    }
    throw ConfigError("unknown strategy '" + std::string(text) +
                      "' (expected hadm, shm-baseline, phm-commit or fixed-plan)");
}

SerSetup build_ser(const rover::CompiledScenario& compiled, const rover::SerConfig& config) {
    const auto& p = compiled.problem();
    const auto action = p.find_action(config.action);
    if (!action) throw ConfigError("SER action '" + config.action + "' is not an action of the compiled scenario");
    auto fires = [&compiled, condition = config.condition](StateId s) {
        const auto o = rover::sense(compiled.spec(), compiled.rover(s));
        return condition.fires(o.value(condition.channel));
    };
    std::vector<StateId> members;
    std::map<StateId, ActionId> table;
    for (std::size_t i = 0; i < p.state_count(); ++i) {
        const StateId s{i};
        if (p.is_terminal(s) || !fires(s)) continue;
        members.push_back(s);
        if (p.admissible(s, *action)) table.emplace(s, *action);
    }
    std::vector<std::string> coverage{config.condition.id + ": " + config.condition.channel + " " +
                                      shm::to_string(config.condition.comparator) + " " +
                                      core::format_number(config.condition.limit) + " -> " + config.action};
    auto policy = config.trigger == rover::SerConfig::Trigger::state
                      ? loop::SerPolicy(std::move(members), std::move(table), std::move(coverage))
                      : loop::SerPolicy::on_observation(config.condition, std::move(table), std::move(coverage));
    auto safe = [&compiled, fires](StateId s) {
        const auto status = compiled.rover(s).status;
        return status != rover::MissionStatus::motor_failure && status != rover::MissionStatus::stranded && !fires(s);
    };
    return SerSetup{std::move(policy), std::move(safe)};
}

namespace {

/// Prognostic route choice: the open-loop best alternative at the first
/// branching, uniform random afterwards unless re-running is requested.
class PhmDecider {
public:
    PhmDecider(const Mission& mission, bool rerun, std::mt19937_64& rng)
        : mission_(&mission), rerun_(rerun), rng_(&rng) {}

    ActionId decide(StateId s) {
        const auto choices = mission_->compiled().problem().choices(s);
        if (choices.size() == 1) return choices.front().action;
        if (!committed_ || rerun_) {
            committed_ = true;
            return mission_->phm_route(s);
        }
        used_rng_ = true;
        return choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(*rng_)].action;
    }

    bool used_rng() const { return used_rng_; }

private:
    const Mission* mission_;
    bool rerun_;
    std::mt19937_64* rng_;
    bool committed_ = false;
    bool used_rng_ = false;
};

class PhmProvider final : public loop::PolicyProvider {
public:
    PhmProvider(const Mission& mission, std::mt19937_64& rng) : decider_(mission, mission.options().rerun_prognosis, rng) {}

    ActionId select(const core::Belief& b, std::size_t, const shm::SensorObservation*) override {
        return decider_.decide(b.most_likely());
    }
    std::string name() const override { return "PHM"; }
    bool used_rng() const { return decider_.used_rng(); }

private:
    PhmDecider decider_;
};

class PlanProvider final : public loop::PolicyProvider {
public:
    PlanProvider(const Problem& p, const std::vector<ActionId>& plan) : problem_(&p), plan_(&plan) {}

    ActionId select(const core::Belief& b, std::size_t step, const shm::SensorObservation*) override {
        const StateId s = b.most_likely();
        if (step >= plan_->size()) {
            throw loop::ProviderExhausted("fixed plan ended before a terminal state, at " + problem_->state_label(s));
        }
        const ActionId a = (*plan_)[step];
        if (!problem_->admissible(s, a)) {
            throw loop::ProviderExhausted("fixed plan step " + std::to_string(step) + " '" + problem_->action_label(a) +
                                          "' is inadmissible in " + problem_->state_label(s));
        }
        return a;
    }
    std::string name() const override { return "PLAN"; }

private:
    const Problem* problem_;
    const std::vector<ActionId>* plan_;
};

/// Separated architecture: the SHM pipeline watches the sensors and preempts
/// with its recovery; otherwise a health-unaware decision maker acts within
/// the operational constraints the pipeline has imposed.
class BaselineProvider final : public loop::PolicyProvider {
public:
    BaselineProvider(const Mission& mission, std::mt19937_64& rng)
        : mission_(&mission), pipeline_(mission.spec().shm), phm_(mission, mission.options().rerun_prognosis, rng) {}

    ActionId select(const core::Belief& b, std::size_t, const shm::SensorObservation* sensors) override {
        const auto& full = mission_->compiled();
        const StateId s = b.most_likely();
        if (sensors) {
            if (auto recovery = pipeline_.process(*sensors)) {
                const auto a = full.problem().find_action(recovery->action);
                if (a && full.problem().admissible(s, *a)) {
                    tag_ = "SHM";
                    return *a;
                }
            }
        }
        tag_ = "DM";
        if (pipeline_.rules().route_choice == shm::RouteChoice::prognostic_commitment) {
            return phm_.decide(s);
        }
        return decide(s);
    }

    std::string name() const override { return tag_; }
    const std::vector<shm::PipelineEvent>& events() const { return pipeline_.events(); }
    bool used_rng() const { return phm_.used_rng(); }

private:
    ActionId decide(StateId s) {
        const auto& full = mission_->compiled();
        rover::RoverState mapped = full.rover(s);
        mapped.motor_temp_c = full.spec().thermal.nominal_c;
        std::optional<StateId> at = model_ ? model_->find(mapped) : std::nullopt;
        if (!at || pipeline_.constraints() != constraints_) {
            if (!at) {
                model_ = mission_->decision_model(mapped);
                at = model_->find(mapped);
            }
            constraints_ = pipeline_.constraints();
            search_ = std::make_unique<core::Expectimax>(model_->problem(), terrain_filter());
        }
        const auto decision = [&] {
            try {
                return search_->best(*at, model_->problem().horizon().value_or(0));
            } catch (const DomainError& e) {
                throw loop::ProviderExhausted(std::string("decision maker has no admissible action: ") + e.what());
            }
        }();
        const auto& label = model_->problem().action_label(decision.action);
        const auto a = full.problem().find_action(label);
        if (!a || !full.problem().admissible(s, *a)) {
            throw loop::ProviderExhausted("decision maker chose '" + label + "', which the rover cannot execute in " +
                                          full.problem().state_label(s));
        }
        return *a;
    }

    core::ActionFilter terrain_filter() const {
        if (!constraints_.restricts_terrain()) return {};
        return [model = model_, constraints = constraints_](StateId s, ActionId a) {
            const auto& ra = model->rover_action(s, a);
            if (ra.kind != rover::RoverAction::Kind::drive) return true;
            const auto& spec = model->spec();
            const auto& segment = spec.segments.at(ra.index);
            const auto& revealed = model->rover(s).terrain.at(spec.region_index(segment.region));
            if (!revealed.empty()) return constraints.terrain_allowed(revealed);
            const auto& classes = spec.region(segment.region).terrain;
            return std::all_of(classes.begin(), classes.end(), [&](const auto& entry) {
                return entry.second <= 0.0 || constraints.terrain_allowed(entry.first);
            });
        };
    }

    const Mission* mission_;
    shm::ShmPipeline pipeline_;
    PhmDecider phm_;
    std::string tag_ = "DM";
    std::shared_ptr<const rover::CompiledScenario> model_;
    shm::OperationalConstraints constraints_;
    std::unique_ptr<core::Expectimax> search_;
};

}  // namespace

std::vector<PathStep> most_likely_path(const rover::CompiledScenario& compiled, const core::Policy& policy) {
    const auto& p = compiled.problem();
    std::vector<PathStep> path;
    StateId s = compiled.root();
    while (!p.is_terminal(s)) {
        const ActionId a = policy.at(s);
        const auto outcomes = p.transitions(s, a);
        const auto best = std::max_element(outcomes.begin(), outcomes.end(), [](const auto& x, const auto& y) {
            return x.probability < y.probability;
        });
        s = best->next;
        path.push_back(PathStep{a, s});
    }
    return path;
}

Mission::Mission(rover::ScenarioSpec spec, MissionOptions options)
    : options_(std::move(options)), compiled_(rover::compile(spec, options_.compile)) {
    if (compiled_.spec().ser) ser_ = build_ser(compiled_, *compiled_.spec().ser);
    const auto& p = compiled_.problem();
    for (const auto& step : most_likely_path(compiled_, core::extract_policy(p, core::value_iterate(p)))) {
        plan_.push_back(step.action);
    }
    online_ = std::make_unique<loop::OnlineProvider>(compiled_.problem());
}

Mission::~Mission() = default;

ActionId Mission::phm_route(StateId s) const {
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = phm_cache_.find(s); it != phm_cache_.end()) return it->second;
    }
    std::vector<ActionId> actions;
    for (const auto& c : compiled_.problem().choices(s)) actions.push_back(c.action);
    const ActionId choice = shm::phm_route_choice(compiled_.problem(), s, actions);
    std::lock_guard lock(cache_mutex_);
    phm_cache_.emplace(s, choice);
    return choice;
}

std::shared_ptr<const rover::CompiledScenario> Mission::decision_model(const rover::RoverState& root) const {
    std::lock_guard lock(cache_mutex_);
    for (const auto& [key, model] : dm_cache_) {
        if (model->find(root)) return model;
    }
    rover::CompileOptions o = options_.compile;
    o.model = rover::ModelOptions{false, false};
    o.root = root;
    auto model = std::make_shared<const rover::CompiledScenario>(rover::compile(spec(), o));
    dm_cache_.emplace(model->problem().state_label(model->root()), model);
    return model;
}

EpisodeResult Mission::run(Strategy strategy, const rover::GroundTruth& truth, std::mt19937_64& rng) const {
    RoverEnvironment env(compiled_, truth);
    const auto& p = compiled_.problem();
    const auto b0 = core::Belief::point_mass(p.state_count(), compiled_.root());
    const loop::SerPolicy* ser = options_.use_ser && ser_ ? &ser_->policy : nullptr;

    EpisodeResult result;
    result.truth = truth;
    switch (strategy) {
        case Strategy::hadm:
            result.trace = loop::run_loop(env, p, *online_, ser, b0, options_.loop);
            break;
        case Strategy::phm_commit: {
            PhmProvider provider(*this, rng);
            result.trace = loop::run_loop(env, p, provider, ser, b0, options_.loop);
            result.used_rng = provider.used_rng();
            break;
        }
        case Strategy::shm_baseline: {
            BaselineProvider provider(*this, rng);
            result.trace = loop::run_loop(env, p, provider, ser, b0, options_.loop);
            result.shm_events = provider.events();
            result.used_rng = provider.used_rng();
            break;
        }
        case Strategy::fixed_plan: {
            PlanProvider provider(p, plan_);
            result.trace = loop::run_loop(env, p, provider, ser, b0, options_.loop);
            break;
        }
    }
    result.final_state = env.plant().rover();
    if (result.trace.aborted) {
        result.outcome = "aborted";
    } else if (result.trace.truncated) {
        result.outcome = "truncated";
    } else {
        result.outcome = rover::to_string(result.final_state.status);
    }
    return result;
}

EpisodeResult Mission::run_seeded(Strategy strategy, std::span<const std::string> overrides, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    auto truth = rover::sample_ground_truth(spec(), rng);
    rover::apply_overrides(spec(), truth, overrides);
    return run(strategy, truth, rng);
}

std::optional<double> Mission::analytic_value(Strategy strategy, std::span<const std::string> overrides) const {
    double mass = 0.0;
    double total = 0.0;
    for (const auto& [truth, probability] : rover::enumerate_ground_truths(spec())) {
        auto fixed = truth;
        rover::apply_overrides(spec(), fixed, overrides);
        if (!(fixed == truth)) continue;
        std::mt19937_64 rng(0);
        const auto episode = run(strategy, truth, rng);
        if (episode.used_rng) return std::nullopt;
        mass += probability;
        total += probability * episode.value();
    }
    return total / mass;
}

RolloutSummary Mission::rollouts(Strategy strategy, std::span<const std::string> overrides, std::uint64_t seed,
                                 std::size_t runs, std::size_t threads) const {
    if (runs == 0) throw ConfigError("rollout count must be at least 1");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, runs);

    std::vector<double> values(runs);
    std::vector<std::string> outcomes(runs);
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < threads; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < runs; i += threads) {
                        const auto episode = run_seeded(strategy, overrides, seed + i);
                        values[i] = episode.value();
                        outcomes[i] = episode.outcome;
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    RolloutSummary summary;
    summary.runs = runs;
    double sum = 0.0;
    for (double v : values) sum += v;
    summary.mean = sum / static_cast<double>(runs);
    if (runs > 1) {
        double squares = 0.0;
        for (double v : values) squares += (v - summary.mean) * (v - summary.mean);
        summary.standard_error = std::sqrt(squares / static_cast<double>(runs - 1) / static_cast<double>(runs));
    }
    for (const auto& o : outcomes) ++summary.outcomes[o];
    summary.values = std::move(values);
    return summary;
}

}  // namespace hadm::mission
