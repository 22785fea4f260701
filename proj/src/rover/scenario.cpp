#include "hadm/rover/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hadm/core/format.hpp"

namespace hadm::rover {

namespace {

using Json = nlohmann::ordered_json;

struct EmbeddedDocument {
    const char* name;
    const char* text;
};

constexpr EmbeddedDocument kEmbedded[] = {
#include "hadm/builtin_scenarios.inc"
};

std::string_view embedded(std::string_view name) {
    for (const auto& d : kEmbedded) {
        if (name == d.name) return d.text;
    }
    throw ConfigError("no embedded document named '" + std::string(name) + "'");
}

std::string pointer_child(const std::string& base, std::string_view key) {
    std::string escaped;
    for (char c : key) {
        if (c == '~') escaped += "~0";
        else if (c == '/') escaped += "~1";
        else escaped += c;
    }
    return base + "/" + escaped;
}

std::string location_or_root(const std::string& pointer) { return pointer.empty() ? "/" : pointer; }

// Validator for the JSON-Schema subset the scenario schema uses: $ref to local
// definitions, type, enum, required, properties, additionalProperties,
// minProperties, items, minItems, minLength, minimum, maximum, exclusiveMinimum.
class SchemaValidator {
public:
    explicit SchemaValidator(const Json& root) : root_(root) {}

    void validate(const Json& schema, const Json& value, const std::string& at, std::vector<Diagnostic>& out) const {
        if (auto ref = schema.find("$ref"); ref != schema.end()) {
            validate(resolve(ref->get<std::string>()), value, at, out);
            return;
        }
        if (auto type = schema.find("type"); type != schema.end() && !matches_type(type->get<std::string>(), value)) {
            out.push_back({location_or_root(at), "expected " + type->get<std::string>() + ", found " + describe(value)});
            return;
        }
        if (auto e = schema.find("enum"); e != schema.end()) {
            if (std::find(e->begin(), e->end(), value) == e->end()) {
                out.push_back({location_or_root(at), "value " + value.dump() + " is not one of " + e->dump()});
            }
        }
        if (value.is_number()) check_number(schema, value.get<double>(), at, out);
        if (value.is_string()) {
            if (auto m = schema.find("minLength"); m != schema.end() && value.get<std::string>().size() < m->get<std::size_t>()) {
                out.push_back({location_or_root(at), "string is shorter than " + m->dump() + " characters"});
            }
        }
        if (value.is_object()) check_object(schema, value, at, out);
        if (value.is_array()) check_array(schema, value, at, out);
    }

private:
    const Json& resolve(const std::string& ref) const {
        const std::string prefix = "#/definitions/";
        if (ref.rfind(prefix, 0) != 0) throw ConfigError("unsupported schema reference '" + ref + "'");
        return root_.at("definitions").at(ref.substr(prefix.size()));
    }

    static bool matches_type(const std::string& type, const Json& v) {
        if (type == "object") return v.is_object();
        if (type == "array") return v.is_array();
        if (type == "string") return v.is_string();
        if (type == "number") return v.is_number();
        if (type == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
        if (type == "boolean") return v.is_boolean();
        if (type == "null") return v.is_null();
        throw ConfigError("unsupported schema type '" + type + "'");
    }

    static std::string describe(const Json& v) {
        if (v.is_object()) return "object";
        if (v.is_array()) return "array";
        if (v.is_string()) return "string";
        if (v.is_boolean()) return "boolean";
        if (v.is_null()) return "null";
        return "number " + v.dump();
    }

    static void check_number(const Json& schema, double x, const std::string& at, std::vector<Diagnostic>& out) {
        if (auto m = schema.find("minimum"); m != schema.end() && x < m->get<double>()) {
            out.push_back({location_or_root(at), core::format_number(x) + " is below the minimum " + m->dump()});
        }
        if (auto m = schema.find("exclusiveMinimum"); m != schema.end() && x <= m->get<double>()) {
            out.push_back({location_or_root(at), core::format_number(x) + " must be greater than " + m->dump()});
        }
        if (auto m = schema.find("maximum"); m != schema.end() && x > m->get<double>()) {
            out.push_back({location_or_root(at), core::format_number(x) + " is above the maximum " + m->dump()});
        }
    }

    void check_object(const Json& schema, const Json& value, const std::string& at, std::vector<Diagnostic>& out) const {
        if (auto req = schema.find("required"); req != schema.end()) {
            for (const auto& key : *req) {
                if (!value.contains(key.get<std::string>())) {
                    out.push_back({location_or_root(at), "missing required field '" + key.get<std::string>() + "'"});
                }
            }
        }
        if (auto m = schema.find("minProperties"); m != schema.end() && value.size() < m->get<std::size_t>()) {
            out.push_back({location_or_root(at), "object needs at least " + m->dump() + " entries"});
        }
        const auto props = schema.find("properties");
        const auto extra = schema.find("additionalProperties");
        for (const auto& [key, child] : value.items()) {
            const std::string where = pointer_child(at, key);
            if (props != schema.end() && props->contains(key)) {
                validate(props->at(key), child, where, out);
            } else if (extra != schema.end()) {
                if (extra->is_boolean()) {
                    if (!extra->get<bool>()) out.push_back({where, "unknown field '" + key + "'"});
                } else {
                    validate(*extra, child, where, out);
                }
            }
        }
    }

    void check_array(const Json& schema, const Json& value, const std::string& at, std::vector<Diagnostic>& out) const {
        if (auto m = schema.find("minItems"); m != schema.end() && value.size() < m->get<std::size_t>()) {
            out.push_back({location_or_root(at), "array needs at least " + m->dump() + " items"});
        }
        if (auto items = schema.find("items"); items != schema.end()) {
            for (std::size_t i = 0; i < value.size(); ++i) validate(*items, value[i], at + "/" + std::to_string(i), out);
        }
    }

    const Json& root_;
};

const Json& schema_document() {
    static const Json schema = Json::parse(embedded("scenario"));
    return schema;
}

std::string line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->template get<T>();
}

std::vector<std::string> strings(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) return {};
    return it->get<std::vector<std::string>>();
}

ScenarioSpec convert(const Json& doc) {
    ScenarioSpec spec;
    spec.name = doc.at("name").get<std::string>();
    spec.description = get_or<std::string>(doc, "description", "");
    spec.notes = strings(doc, "notes");

    if (auto p = doc.find("prognostics"); p != doc.end()) {
        PrognosticsConfig c;
        c.model.initial_health = get_or(*p, "initial_health", c.model.initial_health);
        c.model.nominal_rate = get_or(*p, "nominal_rate", c.model.nominal_rate);
        c.model.high_rate_probability = get_or(*p, "high_rate_probability", c.model.high_rate_probability);
        c.model.extra_loss = get_or(*p, "extra_loss", c.model.extra_loss);
        c.model.dt = get_or(*p, "dt", c.model.dt);
        c.threshold.min_health = get_or(*p, "min_health", c.threshold.min_health);
        c.horizon = get_or(*p, "horizon", c.horizon);
        c.sigma_max = get_or(*p, "sigma_max", c.sigma_max);
        if (auto f = p->find("health_fractions"); f != p->end()) c.health_fractions = f->get<std::vector<double>>();
        spec.prognostics = c;
    }

    for (const auto& w : doc.value("waypoints", Json::array())) {
        spec.waypoints.push_back({w.at("id").get<std::string>(), get_or<std::string>(w, "zone", "")});
    }
    for (const auto& t : doc.value("terrain_classes", Json::array())) {
        TerrainClass c{t.at("name").get<std::string>(), std::nullopt, std::nullopt, get_or(t, "heat_c_per_h", 0.0)};
        if (t.contains("energy_wh")) c.energy_wh = t.at("energy_wh").get<double>();
        if (t.contains("power_w")) c.power_w = t.at("power_w").get<double>();
        spec.terrain_classes.push_back(std::move(c));
    }
    for (const auto& r : doc.value("regions", Json::array())) {
        Region region{r.at("id").get<std::string>(), {}};
        for (const auto& [cls, p] : r.at("terrain").items()) region.terrain.emplace_back(cls, p.get<double>());
        spec.regions.push_back(std::move(region));
    }
    for (const auto& s : doc.value("segments", Json::array())) {
        spec.segments.push_back({s.at("from").get<std::string>(), s.at("to").get<std::string>(),
                                 s.at("duration_h").get<double>(), s.at("region").get<std::string>()});
    }
    for (const auto& a : doc.value("activities", Json::array())) {
        spec.activities.push_back({a.at("id").get<std::string>(), a.at("waypoint").get<std::string>(),
                                   a.at("duration_h").get<double>(), get_or(a, "load_w", 0.0),
                                   get_or(a, "redo_probability", 0.0), get_or(a, "required", true)});
    }
    if (auto p = doc.find("power"); p != doc.end()) {
        spec.power.solar_w = get_or(*p, "solar_w", 0.0);
        spec.power.heater_w = get_or(*p, "heater_w", 0.0);
        spec.power.idle_w = get_or(*p, "idle_w", 0.0);
        spec.power.drive_w = get_or(*p, "drive_w", 0.0);
        for (const auto& w : p->value("sunlight", Json::array())) {
            spec.power.sunlight.push_back(
                {w.at("zone").get<std::string>(), w.at("start_h").get<double>(), w.at("end_h").get<double>()});
        }
    }
    if (auto b = doc.find("battery"); b != doc.end()) {
        spec.battery.capacity_wh = b->at("capacity_wh").get<double>();
        spec.battery.initial_wh = b->at("initial_wh").get<double>();
        spec.battery.charge_rate_w = get_or(*b, "charge_rate_w", 0.0);
        spec.battery.charge_points = strings(*b, "charge_points");
    }
    if (auto t = doc.find("thermal"); t != doc.end()) {
        spec.thermal.enabled = get_or(*t, "enabled", true);
        spec.thermal.nominal_c = get_or(*t, "nominal_c", spec.thermal.nominal_c);
        spec.thermal.cool_rate_c_per_h = get_or(*t, "cool_rate_c_per_h", 0.0);
        spec.thermal.damage_limit_c = get_or(*t, "damage_limit_c", spec.thermal.damage_limit_c);
        if (auto g = t->find("cool_grid_h"); g != t->end()) spec.thermal.cool_grid_h = g->get<std::vector<double>>();
    }
    for (const auto& d : doc.value("deadlines", Json::array())) {
        spec.deadlines.push_back({d.at("activity").get<std::string>(), d.at("by_h").get<double>()});
    }
    if (auto m = doc.find("mission"); m != doc.end()) {
        spec.mission.start = m->at("start").get<std::string>();
        spec.mission.objective =
            get_or<std::string>(*m, "objective", "energy") == "final_battery" ? Objective::final_battery : Objective::energy;
        for (const auto& g : m->at("goals")) {
            spec.mission.goals.push_back({g.at("waypoint").get<std::string>(), get_or(g, "bonus", 0.0), strings(g, "requires")});
        }
        spec.mission.failure_penalty = get_or(*m, "failure_penalty", spec.mission.failure_penalty);
        spec.mission.max_time_h = get_or(*m, "max_time_h", spec.mission.max_time_h);
    }
    if (auto s = doc.find("shm_rules"); s != doc.end()) {
        auto& rules = spec.shm;
        for (const auto& d : s->value("detectors", Json::array())) {
            rules.detector.predicates.push_back({d.at("id").get<std::string>(), d.at("channel").get<std::string>(),
                                                 shm::parse_comparator(d.at("comparator").get<std::string>()),
                                                 d.at("limit").get<double>()});
        }
        for (const auto& d : s->value("diagnoses", Json::array())) {
            shm::DiagnosisRule rule{d.at("predicate").get<std::string>(), d.at("component").get<std::string>(),
                                    d.at("mode").get<std::string>(), get_or(d, "probability", 1.0), std::nullopt};
            if (d.contains("rate_parameter")) rule.rate_parameter = d.at("rate_parameter").get<std::string>();
            rules.diagnoses.push_back(std::move(rule));
        }
        for (const auto& p : s->value("prognoses", Json::array())) {
            rules.prognoses.push_back({p.at("mode").get<std::string>(), p.at("channel").get<std::string>(),
                                       p.at("limit").get<double>(), p.at("parameter").get<std::string>()});
        }
        rules.actions = strings(*s, "actions");
        for (const auto& m : s->value("mitigations", Json::array())) {
            const auto allowed = strings(m, "allowed_terrain");
            rules.mitigations.push_back({m.at("mode").get<std::string>(), m.at("action").get<std::string>(),
                                         get_or(m, "priority", 0),
                                         shm::OperationalConstraints{{allowed.begin(), allowed.end()}},
                                         get_or(m, "mark_faulty", false)});
        }
        rules.probability_gate = get_or(*s, "probability_gate", rules.probability_gate);
        rules.route_choice = get_or<std::string>(*s, "route_choice", "dm") == "phm" ? shm::RouteChoice::prognostic_commitment
                                                                                    : shm::RouteChoice::decision_maker;
    }
    if (auto s = doc.find("ser"); s != doc.end()) {
        const auto& c = s->at("condition");
        spec.ser = SerConfig{
            s->at("trigger").get<std::string>() == "observation" ? SerConfig::Trigger::observation : SerConfig::Trigger::state,
            shm::ThresholdPredicate{"ser", c.at("channel").get<std::string>(),
                                    shm::parse_comparator(c.at("comparator").get<std::string>()), c.at("limit").get<double>()},
            s->at("action").get<std::string>()};
    }
    return spec;
}

template <typename Items, typename Key>
void check_unique(const Items& items, Key key, const std::string& at, const char* what, std::vector<Diagnostic>& out) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!seen.insert(key(items[i])).second) {
            out.push_back({at + "/" + std::to_string(i), std::string("duplicate ") + what + " '" + key(items[i]) + "'"});
        }
    }
}

std::vector<Diagnostic> semantic_checks(const ScenarioSpec& spec) {
    std::vector<Diagnostic> out;
    auto has = [](const auto& items, const std::string& id, auto key) {
        return std::any_of(items.begin(), items.end(), [&](const auto& x) { return key(x) == id; });
    };
    auto wp_id = [](const Waypoint& w) { return w.id; };
    auto class_name = [](const TerrainClass& c) { return c.name; };
    auto region_id = [](const Region& r) { return r.id; };
    auto activity_id = [](const Activity& a) { return a.id; };

    check_unique(spec.waypoints, wp_id, "/waypoints", "waypoint", out);
    check_unique(spec.terrain_classes, class_name, "/terrain_classes", "terrain class", out);
    check_unique(spec.regions, region_id, "/regions", "region", out);
    check_unique(spec.activities, activity_id, "/activities", "activity", out);

    const bool rover = !spec.waypoints.empty();
    if (!rover) {
        if (!spec.segments.empty() || !spec.activities.empty()) {
            out.push_back({"/waypoints", "segments and activities need declared waypoints"});
        }
        if (!spec.prognostics) out.push_back({"/", "a scenario needs waypoints or a prognostics section"});
        return out;
    }

    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        const auto& r = spec.regions[i];
        double total = 0.0;
        for (const auto& [cls, p] : r.terrain) {
            total += p;
            if (!has(spec.terrain_classes, cls, class_name)) {
                out.push_back({pointer_child("/regions/" + std::to_string(i) + "/terrain", cls), "undeclared terrain class '" + cls + "'"});
            }
        }
        if (std::abs(total - 1.0) > core::kProbabilityTolerance) {
            out.push_back({"/regions/" + std::to_string(i) + "/terrain",
                           "terrain probabilities sum to " + core::format_number(total) + ", not 1"});
        }
    }
    std::set<std::pair<std::string, std::string>> legs;
    for (std::size_t i = 0; i < spec.segments.size(); ++i) {
        const auto& s = spec.segments[i];
        const std::string at = "/segments/" + std::to_string(i);
        if (!has(spec.waypoints, s.from, wp_id)) out.push_back({at + "/from", "undeclared waypoint '" + s.from + "'"});
        if (!has(spec.waypoints, s.to, wp_id)) out.push_back({at + "/to", "undeclared waypoint '" + s.to + "'"});
        if (s.from == s.to) out.push_back({at, "segment starts and ends at the same waypoint"});
        if (!has(spec.regions, s.region, region_id)) out.push_back({at + "/region", "undeclared region '" + s.region + "'"});
        if (!legs.insert({s.from, s.to}).second) out.push_back({at, "duplicate segment " + s.label()});
    }
    for (std::size_t i = 0; i < spec.activities.size(); ++i) {
        const auto& a = spec.activities[i];
        if (!has(spec.waypoints, a.waypoint, wp_id)) {
            out.push_back({"/activities/" + std::to_string(i) + "/waypoint", "undeclared waypoint '" + a.waypoint + "'"});
        }
    }
    for (std::size_t i = 0; i < spec.power.sunlight.size(); ++i) {
        const auto& w = spec.power.sunlight[i];
        if (!(w.start_h < w.end_h)) out.push_back({"/power/sunlight/" + std::to_string(i), "sunlight window must end after it starts"});
    }
    if (spec.battery.capacity_wh <= 0.0) out.push_back({"/battery", "a rover scenario needs a battery section"});
    if (spec.battery.initial_wh > spec.battery.capacity_wh) {
        out.push_back({"/battery/initial_wh", "initial charge exceeds capacity"});
    }
    for (std::size_t i = 0; i < spec.battery.charge_points.size(); ++i) {
        if (!has(spec.waypoints, spec.battery.charge_points[i], wp_id)) {
            out.push_back({"/battery/charge_points/" + std::to_string(i), "undeclared waypoint '" + spec.battery.charge_points[i] + "'"});
        }
    }
    if (spec.thermal.enabled) {
        if (spec.thermal.cool_grid_h.empty()) out.push_back({"/thermal/cool_grid_h", "cool-down grid is empty"});
        if (!(spec.thermal.damage_limit_c > spec.thermal.nominal_c)) {
            out.push_back({"/thermal/damage_limit_c", "damage limit must exceed the nominal temperature"});
        }
    }
    for (std::size_t i = 0; i < spec.deadlines.size(); ++i) {
        if (!has(spec.activities, spec.deadlines[i].activity, activity_id)) {
            out.push_back({"/deadlines/" + std::to_string(i) + "/activity", "undeclared activity '" + spec.deadlines[i].activity + "'"});
        }
    }
    if (spec.mission.start.empty()) {
        out.push_back({"/mission", "a rover scenario needs a mission section"});
    } else if (!has(spec.waypoints, spec.mission.start, wp_id)) {
        out.push_back({"/mission/start", "undeclared waypoint '" + spec.mission.start + "'"});
    }
    for (std::size_t i = 0; i < spec.mission.goals.size(); ++i) {
        const auto& g = spec.mission.goals[i];
        const std::string at = "/mission/goals/" + std::to_string(i);
        if (!has(spec.waypoints, g.waypoint, wp_id)) out.push_back({at + "/waypoint", "undeclared waypoint '" + g.waypoint + "'"});
        for (std::size_t k = 0; k < g.requires_done.size(); ++k) {
            if (!has(spec.activities, g.requires_done[k], activity_id)) {
                out.push_back({at + "/requires/" + std::to_string(k), "undeclared activity '" + g.requires_done[k] + "'"});
            }
        }
    }
    try {
        spec.shm.validate();
    } catch (const ConfigError& e) {
        out.push_back({"/shm_rules", e.what()});
    }
    return out;
}

std::string summarize(std::string_view source, const std::vector<Diagnostic>& diagnostics) {
    std::ostringstream msg;
    msg << "invalid scenario " << source << ':';
    for (const auto& d : diagnostics) msg << "\n  " << d.location << ": " << d.message;
    return msg.str();
}

std::vector<Diagnostic> check(std::string_view text, Json& doc) {
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::string what = e.what();
        if (auto pos = what.find("parse error"); pos != std::string::npos) what = what.substr(pos);
        return {{line_column(text, e.byte), what}};
    }
    std::vector<Diagnostic> out;
    const auto& schema = schema_document();
    SchemaValidator(schema).validate(schema, doc, "", out);
    if (!out.empty()) return out;
    try {
        return semantic_checks(convert(doc));
    } catch (const ConfigError& e) {
        return {{"/", e.what()}};
    }
}

}  // namespace

std::string Segment::label() const { return "drive(" + from + "->" + to + ")"; }

const Waypoint& ScenarioSpec::waypoint(std::string_view id) const {
    for (const auto& w : waypoints) {
        if (w.id == id) return w;
    }
    throw ConfigError("unknown waypoint '" + std::string(id) + "'");
}

const TerrainClass& ScenarioSpec::terrain_class(std::string_view name) const {
    for (const auto& c : terrain_classes) {
        if (c.name == name) return c;
    }
    throw ConfigError("unknown terrain class '" + std::string(name) + "'");
}

const Region& ScenarioSpec::region(std::string_view id) const { return regions.at(region_index(id)); }

const Activity& ScenarioSpec::activity(std::string_view id) const { return activities.at(activity_index(id)); }

std::size_t ScenarioSpec::region_index(std::string_view id) const {
    for (std::size_t i = 0; i < regions.size(); ++i) {
        if (regions[i].id == id) return i;
    }
    throw ConfigError("unknown region '" + std::string(id) + "'");
}

std::size_t ScenarioSpec::activity_index(std::string_view id) const {
    for (std::size_t i = 0; i < activities.size(); ++i) {
        if (activities[i].id == id) return i;
    }
    throw ConfigError("unknown activity '" + std::string(id) + "'");
}

std::optional<double> ScenarioSpec::deadline(std::string_view activity) const {
    for (const auto& d : deadlines) {
        if (d.activity == activity) return d.by_h;
    }
    return std::nullopt;
}

const Goal* ScenarioSpec::goal_at(std::string_view waypoint) const {
    for (const auto& g : mission.goals) {
        if (g.waypoint == waypoint) return &g;
    }
    return nullptr;
}

bool ScenarioSpec::is_charge_point(std::string_view waypoint) const {
    return std::find(battery.charge_points.begin(), battery.charge_points.end(), waypoint) != battery.charge_points.end();
}

ScenarioError::ScenarioError(std::string source, std::vector<Diagnostic> diagnostics)
    : ConfigError(summarize(source, diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::vector<Diagnostic> validate_scenario_text(std::string_view json) {
    Json doc;
    return check(json, doc);
}

ScenarioSpec parse_scenario(std::string_view json, std::string_view source) {
    Json doc;
    auto diagnostics = check(json, doc);
    if (!diagnostics.empty()) throw ScenarioError(std::string(source), std::move(diagnostics));
    return convert(doc);
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str(), path.string());
}

std::string_view builtin_scenario_text(int n) {
    if (n < 1 || n > kBuiltinScenarioCount) {
        throw ConfigError("builtin scenarios are numbered 1 to " + std::to_string(kBuiltinScenarioCount));
    }
    return embedded("example" + std::to_string(n));
}

ScenarioSpec builtin_scenario(int n) { return parse_scenario(builtin_scenario_text(n), "builtin:" + std::to_string(n)); }

std::string_view scenario_schema_text() { return embedded("scenario"); }

ScenarioSpec resolve_scenario(std::string_view source) {
    std::string_view id = source;
    if (id.rfind("builtin:", 0) == 0) id.remove_prefix(8);
    if (id.size() == 1 && id[0] >= '1' && id[0] <= '0' + kBuiltinScenarioCount) return builtin_scenario(id[0] - '0');
    if (source.rfind("builtin:", 0) == 0) throw ConfigError("unknown builtin scenario '" + std::string(source) + "'");
    return load_scenario(std::filesystem::path(std::string(source)));
}

}  // namespace hadm::rover
