#include "hadm/rover/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <set>
#include <unordered_map>

#include "hadm/core/errors.hpp"
#include "hadm/core/format.hpp"

namespace hadm::rover {

namespace {

using core::format_number;

constexpr double kTimeEpsilon = 1e-9;

double round_to(double x, double step) { return std::round(x / step) * step + 0.0; }

double parse_number(const std::string& text, const std::string& name) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("state component '" + name + "' has non-numeric value '" + text + "'");
}

double max_heat_rate(const ScenarioSpec& spec) {
    double heat = 0.0;
    for (const auto& c : spec.terrain_classes) heat = std::max(heat, c.heat_c_per_h);
    return heat;
}

bool thermal_tracked(const ScenarioSpec& spec, const ModelOptions& options) {
    return spec.thermal.enabled && options.thermal_model;
}

double load_of(const ScenarioSpec& spec, std::string_view load) {
    if (load == "drive") return spec.power.drive_w;
    if (load == "idle") return spec.power.idle_w;
    for (const auto& a : spec.activities) {
        if (a.id == load) return a.load_w;
    }
    throw ConfigError("unknown load '" + std::string(load) + "'");
}

// End of the sunlight window covering `t` in `zone`.
std::optional<double> sun_end(const ScenarioSpec& spec, std::string_view zone, double t) {
    for (const auto& w : spec.power.sunlight) {
        if (w.zone == zone && w.start_h <= t + kTimeEpsilon && t < w.end_h - kTimeEpsilon) return w.end_h;
    }
    return std::nullopt;
}

double charge_gain_rate(const ScenarioSpec& spec) {
    return std::min(spec.power.solar_w - spec.power.idle_w, spec.battery.charge_rate_w);
}

bool charge_offered(const ScenarioSpec& spec, const RoverState& s, std::size_t* point) {
    for (std::size_t i = 0; i < spec.battery.charge_points.size(); ++i) {
        if (spec.battery.charge_points[i] != s.waypoint || s.charge.at(i) != ChargeDecision::open) continue;
        const std::string& zone = spec.waypoint(s.waypoint).zone;
        if (!sun_end(spec, zone, s.time_h)) return false;
        if (s.battery_wh >= spec.battery.capacity_wh - 0.5 || charge_gain_rate(spec) <= 0.0) return false;
        if (point) *point = i;
        return true;
    }
    return false;
}

bool motor_hot(const ScenarioSpec& spec, const RoverState& s) { return s.motor_temp_c > spec.thermal.nominal_c + 0.5; }

bool requirements_done(const ScenarioSpec& spec, const RoverState& s, const Goal& g) {
    return std::all_of(g.requires_done.begin(), g.requires_done.end(), [&](const std::string& id) {
        return s.activities[spec.activity_index(id)] == ActivityStatus::done;
    });
}

void mark_missed_deadlines(const ScenarioSpec& spec, RoverState& s) {
    for (std::size_t i = 0; i < spec.activities.size(); ++i) {
        auto& status = s.activities[i];
        if (status != ActivityStatus::pending && status != ActivityStatus::redo) continue;
        if (auto by = spec.deadline(spec.activities[i].id)) {
            if (s.time_h + spec.activities[i].duration_h > *by + kTimeEpsilon) status = ActivityStatus::missed;
        }
    }
}

// Rounds to compiled resolution and resolves the mission status of a successor.
void settle(const ScenarioSpec& spec, const ModelOptions& options, RoverState& s, const EnergyLeg& leg) {
    s.time_h = round_to(s.time_h, 1e-6);
    s.motor_temp_c = round_to(s.motor_temp_c, 1.0);
    const double lowest = std::round(leg.min_wh);
    if (lowest < 0.0) {
        s.status = MissionStatus::stranded;
        s.battery_wh = lowest + 0.0;
        s.deficit_wh = -lowest;
        return;
    }
    s.battery_wh = std::round(leg.end_wh) + 0.0;
    if (thermal_tracked(spec, options) && s.motor_temp_c > spec.thermal.damage_limit_c) {
        s.status = MissionStatus::motor_failure;
        return;
    }
    mark_missed_deadlines(spec, s);
    if (const Goal* g = spec.goal_at(s.waypoint); g && requirements_done(spec, s, *g)) {
        s.status = MissionStatus::complete;
        return;
    }
    if (s.time_h > spec.mission.max_time_h + kTimeEpsilon) {
        s.status = MissionStatus::timeout;
        return;
    }
    if (admissible_actions(spec, s, options).empty()) s.status = MissionStatus::stuck;
}

double step_reward(const ScenarioSpec& spec, const RoverState& before, const RoverState& after) {
    const auto& m = spec.mission;
    if (m.objective == Objective::energy) {
        double r = after.battery_wh - before.battery_wh;
        if (after.status == MissionStatus::complete) r += spec.goal_at(after.waypoint)->bonus;
        if (is_failure(after.status)) r += m.failure_penalty;
        return r;
    }
    switch (after.status) {
        case MissionStatus::complete: return spec.goal_at(after.waypoint)->bonus + after.battery_wh;
        case MissionStatus::stranded: return m.failure_penalty + after.battery_wh;
        case MissionStatus::motor_failure:
        case MissionStatus::timeout:
        case MissionStatus::stuck: return m.failure_penalty;
        case MissionStatus::active: return 0.0;
    }
    return 0.0;
}

double stationary_temp(const ScenarioSpec& spec, const ModelOptions& options, double temp, double hours) {
    if (!thermal_tracked(spec, options)) return temp;
    return std::max(spec.thermal.nominal_c, temp - spec.thermal.cool_rate_c_per_h * hours);
}

// A stationary step of `hours` at the current waypoint under `load`.
Branch stationary(const ScenarioSpec& spec, const ModelOptions& options, const RoverState& s, double hours, double load_w,
                  RoverState next) {
    const auto leg = integrate_energy(spec, spec.waypoint(s.waypoint).zone, s.time_h, hours, load_w, s.battery_wh);
    next.time_h = s.time_h + hours;
    next.motor_temp_c = stationary_temp(spec, options, s.motor_temp_c, hours);
    settle(spec, options, next, leg);
    return Branch{next, 1.0, step_reward(spec, s, next), {}};
}

}  // namespace

std::string to_string(ActivityStatus s) {
    switch (s) {
        case ActivityStatus::pending: return "pending";
        case ActivityStatus::redo: return "redo";
        case ActivityStatus::done: return "done";
        case ActivityStatus::missed: return "missed";
    }
    return "?";
}

std::string to_string(MissionStatus s) {
    switch (s) {
        case MissionStatus::active: return "active";
        case MissionStatus::complete: return "complete";
        case MissionStatus::stranded: return "stranded";
        case MissionStatus::motor_failure: return "motor_failure";
        case MissionStatus::timeout: return "timeout";
        case MissionStatus::stuck: return "stuck";
    }
    return "?";
}

std::string to_string(ChargeDecision d) {
    switch (d) {
        case ChargeDecision::open: return "open";
        case ChargeDecision::skipped: return "skipped";
        case ChargeDecision::charged: return "charged";
    }
    return "?";
}

bool is_failure(MissionStatus s) {
    return s == MissionStatus::stranded || s == MissionStatus::motor_failure || s == MissionStatus::timeout ||
           s == MissionStatus::stuck;
}

core::StateVector to_state_vector(const ScenarioSpec& spec, const RoverState& s) {
    std::vector<core::StateComponent> c;
    c.push_back({"waypoint", s.waypoint});
    c.push_back({"time_h", format_number(s.time_h)});
    c.push_back({"battery_wh", format_number(s.battery_wh)});
    if (spec.thermal.enabled) c.push_back({"motor_temp_c", format_number(s.motor_temp_c)});
    for (std::size_t i = 0; i < spec.activities.size(); ++i) {
        c.push_back({"activity." + spec.activities[i].id, to_string(s.activities[i])});
    }
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        if (spec.regions[i].deterministic()) continue;
        c.push_back({"terrain." + spec.regions[i].id, s.terrain[i].empty() ? "unknown" : s.terrain[i]});
    }
    for (std::size_t i = 0; i < spec.battery.charge_points.size(); ++i) {
        c.push_back({"charge." + spec.battery.charge_points[i], to_string(s.charge[i])});
    }
    c.push_back({"status", to_string(s.status)});
    if (s.status == MissionStatus::stranded) c.push_back({"deficit_wh", format_number(s.deficit_wh)});
    return core::StateVector(std::move(c));
}

RoverState from_state_vector(const ScenarioSpec& spec, const core::StateVector& v) {
    RoverState s = initial_state(spec);
    auto need = [&](const std::string& name) -> const std::string& {
        const std::string* value = v.find(name);
        if (!value) throw ConfigError("state label lacks component '" + name + "'");
        return *value;
    };
    s.waypoint = need("waypoint");
    spec.waypoint(s.waypoint);
    s.time_h = parse_number(need("time_h"), "time_h");
    s.battery_wh = parse_number(need("battery_wh"), "battery_wh");
    s.motor_temp_c = spec.thermal.enabled ? parse_number(need("motor_temp_c"), "motor_temp_c") : spec.thermal.nominal_c;
    for (std::size_t i = 0; i < spec.activities.size(); ++i) {
        const auto& text = need("activity." + spec.activities[i].id);
        bool found = false;
        for (auto st : {ActivityStatus::pending, ActivityStatus::redo, ActivityStatus::done, ActivityStatus::missed}) {
            if (to_string(st) == text) {
                s.activities[i] = st;
                found = true;
            }
        }
        if (!found) throw ConfigError("unknown activity status '" + text + "'");
    }
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        if (spec.regions[i].deterministic()) continue;
        const auto& text = need("terrain." + spec.regions[i].id);
        s.terrain[i] = text == "unknown" ? "" : spec.terrain_class(text).name;
    }
    for (std::size_t i = 0; i < spec.battery.charge_points.size(); ++i) {
        const auto& text = need("charge." + spec.battery.charge_points[i]);
        bool found = false;
        for (auto d : {ChargeDecision::open, ChargeDecision::skipped, ChargeDecision::charged}) {
            if (to_string(d) == text) {
                s.charge[i] = d;
                found = true;
            }
        }
        if (!found) throw ConfigError("unknown charge decision '" + text + "'");
    }
    const auto& status = need("status");
    bool found = false;
    for (auto st : {MissionStatus::active, MissionStatus::complete, MissionStatus::stranded, MissionStatus::motor_failure,
                    MissionStatus::timeout, MissionStatus::stuck}) {
        if (to_string(st) == status) {
            s.status = st;
            found = true;
        }
    }
    if (!found) throw ConfigError("unknown mission status '" + status + "'");
    s.deficit_wh = s.status == MissionStatus::stranded ? parse_number(need("deficit_wh"), "deficit_wh") : 0.0;
    return s;
}

shm::SensorObservation sense(const ScenarioSpec& spec, const RoverState& s) {
    shm::SensorObservation o;
    o.time_h = s.time_h;
    o.values["time_h"] = s.time_h;
    o.values["battery_wh"] = s.battery_wh;
    o.values["motor_temp_c"] = s.motor_temp_c;
    o.values["deficit_wh"] = s.deficit_wh;
    o.labels["waypoint"] = s.waypoint;
    o.labels["status"] = to_string(s.status);
    for (std::size_t i = 0; i < spec.activities.size(); ++i) {
        o.labels["activity." + spec.activities[i].id] = to_string(s.activities[i]);
    }
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        o.labels["terrain." + spec.regions[i].id] = s.terrain[i].empty() ? "unknown" : s.terrain[i];
    }
    return o;
}

bool in_sunlight(const ScenarioSpec& spec, std::string_view zone, double time_h) {
    return sun_end(spec, zone, time_h).has_value();
}

double net_power(const ScenarioSpec& spec, std::string_view load, bool in_sun) {
    const double l = load_of(spec, load);
    return in_sun ? spec.power.solar_w - l : -l - spec.power.heater_w;
}

double motor_temp_after(const ScenarioSpec& spec, double temp0, double drive_h, double cool_h) {
    if (drive_h < 0.0 || cool_h < 0.0) throw ConfigError("durations must be nonnegative");
    const double t = temp0 + max_heat_rate(spec) * drive_h - spec.thermal.cool_rate_c_per_h * cool_h;
    return std::max(spec.thermal.nominal_c, t);
}

EnergyLeg integrate_energy(const ScenarioSpec& spec, std::string_view zone, double t0, double duration_h, double load_w,
                           double start_wh) {
    EnergyLeg leg{start_wh, start_wh};
    const double end = t0 + duration_h;
    double t = t0;
    while (t < end - kTimeEpsilon) {
        const auto sun = sun_end(spec, zone, t);
        double next = end;
        if (sun) {
            next = std::min(next, *sun);
        } else {
            for (const auto& w : spec.power.sunlight) {
                if (w.zone == zone && w.start_h > t + kTimeEpsilon) next = std::min(next, w.start_h);
            }
        }
        const double rate = sun ? std::min(spec.power.solar_w - load_w, spec.battery.charge_rate_w)
                                : -(load_w + spec.power.heater_w);
        leg.end_wh += rate * (next - t);
        if (leg.end_wh > spec.battery.capacity_wh) leg.end_wh = spec.battery.capacity_wh;
        leg.min_wh = std::min(leg.min_wh, leg.end_wh);
        t = next;
    }
    return leg;
}

std::vector<RoverAction> admissible_actions(const ScenarioSpec& spec, const RoverState& s, const ModelOptions& options) {
    std::vector<RoverAction> out;
    if (s.status != MissionStatus::active) return out;
    bool blocked = false;
    for (std::size_t i = 0; i < spec.activities.size(); ++i) {
        const auto& a = spec.activities[i];
        if (a.waypoint != s.waypoint) continue;
        if (s.activities[i] != ActivityStatus::pending && s.activities[i] != ActivityStatus::redo) continue;
        out.push_back({RoverAction::Kind::activity, i, a.id});
        blocked = blocked || a.required;
    }
    std::size_t point = 0;
    if (charge_offered(spec, s, &point)) {
        out.push_back({RoverAction::Kind::skip_charge, point, "skip_charge"});
        out.push_back({RoverAction::Kind::charge_to_full, point, "charge_to_full"});
        blocked = true;
    }
    if (!blocked) {
        for (std::size_t i = 0; i < spec.segments.size(); ++i) {
            if (spec.segments[i].from == s.waypoint) out.push_back({RoverAction::Kind::drive, i, spec.segments[i].label()});
        }
    }
    if (options.health_actions && thermal_tracked(spec, options) && motor_hot(spec, s) &&
        spec.thermal.cool_rate_c_per_h > 0.0) {
        out.push_back({RoverAction::Kind::stop_and_cool_down, 0, "stop_and_cool_down"});
        for (std::size_t i = 0; i < spec.thermal.cool_grid_h.size(); ++i) {
            out.push_back({RoverAction::Kind::cool, i, "cool(" + format_number(spec.thermal.cool_grid_h[i]) + "h)"});
        }
    }
    return out;
}

RoverState initial_state(const ScenarioSpec& spec, const ModelOptions& options) {
    if (!spec.has_rover_model()) throw ConfigError("scenario '" + spec.name + "' has no rover model");
    RoverState s;
    s.waypoint = spec.mission.start;
    s.battery_wh = spec.battery.initial_wh;
    s.motor_temp_c = spec.thermal.nominal_c;
    s.activities.assign(spec.activities.size(), ActivityStatus::pending);
    s.terrain.assign(spec.regions.size(), "");
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        if (spec.regions[i].deterministic()) s.terrain[i] = spec.regions[i].terrain.front().first;
    }
    s.charge.assign(spec.battery.charge_points.size(), ChargeDecision::open);
    settle(spec, options, s, EnergyLeg{s.battery_wh, s.battery_wh});
    return s;
}

std::vector<Branch> apply_action(const ScenarioSpec& spec, const RoverState& s, const RoverAction& a,
                                 const ModelOptions& options) {
    using Kind = RoverAction::Kind;
    std::vector<Branch> out;
    switch (a.kind) {
        case Kind::activity: {
            const auto& act = spec.activities.at(a.index);
            const bool first = s.activities[a.index] == ActivityStatus::pending;
            const double p = first ? act.redo_probability : 0.0;
            auto with = [&](ActivityStatus st) {
                RoverState n = s;
                n.activities[a.index] = st;
                return stationary(spec, options, s, act.duration_h, act.load_w, n);
            };
            if (p < 1.0) {
                out.push_back(with(ActivityStatus::done));
                out.back().probability = 1.0 - p;
            }
            if (p > 0.0) {
                out.push_back(with(ActivityStatus::redo));
                out.back().probability = p;
            }
            if (p > 0.0 && p < 1.0) {
                out[0].reveals.push_back({"redo." + act.id, "false"});
                out[1].reveals.push_back({"redo." + act.id, "true"});
            }
            break;
        }
        case Kind::skip_charge: {
            RoverState n = s;
            n.charge.at(a.index) = ChargeDecision::skipped;
            out.push_back(stationary(spec, options, s, 0.0, spec.power.idle_w, n));
            break;
        }
        case Kind::charge_to_full: {
            RoverState n = s;
            n.charge.at(a.index) = ChargeDecision::charged;
            const double rate = charge_gain_rate(spec);
            const double needed = (spec.battery.capacity_wh - s.battery_wh) / rate;
            const auto end = sun_end(spec, spec.waypoint(s.waypoint).zone, s.time_h);
            const double hours = end ? std::min(needed, *end - s.time_h) : needed;
            out.push_back(stationary(spec, options, s, hours, spec.power.idle_w, n));
            break;
        }
        case Kind::drive: {
            const auto& seg = spec.segments.at(a.index);
            const std::size_t r = spec.region_index(seg.region);
            const auto& region = spec.regions[r];
            std::vector<std::pair<std::string, double>> classes;
            if (!s.terrain[r].empty()) {
                classes.emplace_back(s.terrain[r], 1.0);
            } else {
                for (const auto& [cls, p] : region.terrain) {
                    if (p > 0.0) classes.emplace_back(cls, p);
                }
            }
            for (const auto& [cls, p] : classes) {
                const auto& tc = spec.terrain_class(cls);
                RoverState n = s;
                n.waypoint = seg.to;
                n.time_h = s.time_h + seg.duration_h;
                n.terrain[r] = cls;
                if (thermal_tracked(spec, options)) n.motor_temp_c = s.motor_temp_c + tc.heat_c_per_h * seg.duration_h;
                EnergyLeg leg;
                if (tc.energy_wh) {
                    leg.end_wh = std::min(spec.battery.capacity_wh, s.battery_wh - *tc.energy_wh);
                    leg.min_wh = std::min(s.battery_wh, leg.end_wh);
                } else {
                    leg = integrate_energy(spec, spec.waypoint(seg.from).zone, s.time_h, seg.duration_h,
                                           tc.power_w.value_or(spec.power.drive_w), s.battery_wh);
                }
                settle(spec, options, n, leg);
                Branch b{n, p, step_reward(spec, s, n), {}};
                if (s.terrain[r].empty() && !region.deterministic()) b.reveals.push_back({"terrain." + region.id, cls});
                out.push_back(std::move(b));
            }
            break;
        }
        case Kind::stop_and_cool_down: {
            const double hours = (s.motor_temp_c - spec.thermal.nominal_c) / spec.thermal.cool_rate_c_per_h;
            out.push_back(stationary(spec, options, s, hours, spec.power.idle_w, s));
            break;
        }
        case Kind::cool: {
            out.push_back(stationary(spec, options, s, spec.thermal.cool_grid_h.at(a.index), spec.power.idle_w, s));
            break;
        }
    }
    return out;
}

std::optional<core::StateId> CompiledScenario::find(const RoverState& r) const {
    return problem_.find_state(to_state_vector(*spec_, r).label());
}

const std::vector<std::vector<Reveal>>& CompiledScenario::reveals(core::StateId s, core::ActionId a) const {
    const auto& row = reveals_.at(s.value);
    auto it = row.find(a.value);
    if (it == row.end()) {
        static const std::vector<std::vector<Reveal>> terminal{{}};
        if (problem_.is_terminal(s) && a == problem_.stay_action()) return terminal;
        throw DomainError("action '" + problem_.action_label(a) + "' is not admissible in " + problem_.state_label(s));
    }
    return it->second;
}

const RoverAction& CompiledScenario::rover_action(core::StateId s, core::ActionId a) const {
    for (const auto& ra : actions_.at(s.value)) {
        if (ra.label == problem_.action_label(a)) return ra;
    }
    throw DomainError("action '" + problem_.action_label(a) + "' is not admissible in " + problem_.state_label(s));
}

CompiledScenario compile(const ScenarioSpec& spec, const CompileOptions& options) {
    CompiledScenario out;
    out.spec_ = std::make_shared<const ScenarioSpec>(spec);
    out.options_ = options.model;
    const ScenarioSpec& sp = *out.spec_;
    const RoverState root = options.root ? *options.root : initial_state(sp, options.model);

    core::ProblemBuilder builder;
    std::unordered_map<std::string, std::size_t> index;
    std::deque<std::size_t> queue;

    auto intern = [&](const RoverState& r) {
        const auto vec = to_state_vector(sp, r);
        auto [it, fresh] = index.try_emplace(vec.label(), out.rovers_.size());
        if (fresh) {
            if (out.rovers_.size() >= options.state_cap) {
                std::map<std::string, std::set<std::string>> distinct;
                for (const auto& known : out.rovers_) {
                    const auto v = to_state_vector(sp, known);
                    for (const auto& c : v.components()) distinct[c.name].insert(c.value);
                }
                std::string widest;
                std::size_t width = 0;
                for (const auto& [name, values] : distinct) {
                    if (values.size() > width) {
                        widest = name;
                        width = values.size();
                    }
                }
                throw ResourceError("scenario '" + sp.name + "' exceeds the state cap of " +
                                    std::to_string(options.state_cap) + "; widest dimension is " + widest + " with " +
                                    std::to_string(width) + " values");
            }
            builder.add_state(vec);
            out.rovers_.push_back(r);
            queue.push_back(it->second);
        }
        return it->second;
    };

    intern(root);
    std::vector<std::vector<std::size_t>> successors;
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        const RoverState current = out.rovers_[i];
        auto actions = admissible_actions(sp, current, options.model);
        if (out.actions_.size() <= i) {
            out.actions_.resize(i + 1);
            out.reveals_.resize(i + 1);
            successors.resize(i + 1);
        }
        if (actions.empty()) {
            builder.set_terminal(core::StateId{i});
            continue;
        }
        for (const auto& a : actions) {
            const core::ActionId id = builder.add_action(a.label);
            std::vector<core::Outcome> outcomes;
            std::vector<std::vector<Reveal>> reveals;
            for (auto& b : apply_action(sp, current, a, options.model)) {
                const std::size_t next = intern(b.next);
                outcomes.push_back({core::StateId{next}, b.probability, b.reward});
                reveals.push_back(std::move(b.reveals));
                successors[i].push_back(next);
            }
            builder.add_choice(core::StateId{i}, id, std::move(outcomes));
            out.reveals_[i][id.value] = std::move(reveals);
        }
        out.actions_[i] = std::move(actions);
    }

    // Longest decision path; the event-driven clock makes the graph acyclic
    // unless a scenario offers zero-duration loops.
    const std::size_t n = out.rovers_.size();
    std::vector<std::size_t> height(n, 0);
    std::vector<int> mark(n, 0);
    std::function<void(std::size_t)> visit = [&](std::size_t s) {
        mark[s] = 1;
        for (std::size_t t : successors[s]) {
            if (mark[t] == 1) {
                throw ConfigError("scenario '" + sp.name + "' has a decision cycle through " +
                                  to_state_vector(sp, out.rovers_[t]).label());
            }
            if (mark[t] == 0) visit(t);
            height[s] = std::max(height[s], height[t] + 1);
        }
        mark[s] = 2;
    };
    visit(0);

    builder.add_initial_state(core::StateId{0});
    builder.discount(1.0);
    builder.horizon(height[0] == 0 ? 0 : height[0] - 1);
    out.problem_ = std::move(builder).build();
    out.root_ = core::StateId{0};
    return out;
}

CoverageReport audit_coverage(const CompiledScenario& compiled) {
    const auto& spec = compiled.spec();
    const auto& problem = compiled.problem();
    CoverageReport report;
    std::map<std::pair<std::string, std::string>, std::size_t> slot;
    auto declare = [&](std::string variable, std::string value, double p) {
        slot[{variable, value}] = report.entries.size();
        report.entries.push_back({std::move(variable), std::move(value), p, 0});
    };
    for (const auto& r : spec.regions) {
        if (r.deterministic()) continue;
        for (const auto& [cls, p] : r.terrain) declare("terrain." + r.id, cls, p);
    }
    for (const auto& a : spec.activities) {
        if (a.redo_probability <= 0.0 || a.redo_probability >= 1.0) continue;
        declare("redo." + a.id, "false", 1.0 - a.redo_probability);
        declare("redo." + a.id, "true", a.redo_probability);
    }

    for (std::size_t i = 0; i < problem.state_count(); ++i) {
        const core::StateId s{i};
        if (problem.is_terminal(s)) continue;
        for (const auto& choice : problem.choices(s)) {
            const auto& tags = compiled.reveals(s, choice.action);
            for (std::size_t k = 0; k < choice.outcomes.size(); ++k) {
                const auto& o = choice.outcomes[k];
                const std::string where = problem.state_label(s) + " / " + problem.action_label(choice.action);
                if (choice.outcomes.size() > 1 && tags[k].size() != 1) {
                    report.problems.push_back(where + ": stochastic outcome without exactly one revealed variable");
                    continue;
                }
                for (const auto& tag : tags[k]) {
                    auto it = slot.find({tag.variable, tag.value});
                    if (it == slot.end()) {
                        report.problems.push_back(where + ": reveals undeclared " + tag.variable + "=" + tag.value);
                        continue;
                    }
                    auto& e = report.entries[it->second];
                    ++e.transitions;
                    if (std::abs(o.probability - e.probability) > 1e-12) {
                        report.problems.push_back(where + ": " + tag.variable + "=" + tag.value + " has probability " +
                                                  format_number(o.probability) + ", declared " +
                                                  format_number(e.probability));
                    }
                }
            }
        }
    }
    std::map<std::string, std::size_t> per_variable;
    for (const auto& e : report.entries) per_variable[e.variable] += e.transitions;
    for (const auto& e : report.entries) {
        if (e.probability > 0.0 && e.transitions == 0 && per_variable[e.variable] > 0) {
            report.problems.push_back(e.variable + "=" + e.value + " never appears in a compiled transition");
        }
    }
    return report;
}

}  // namespace hadm::rover
