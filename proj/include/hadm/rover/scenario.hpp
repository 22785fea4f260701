#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hadm/core/errors.hpp"
#include "hadm/prognostics/prognostics.hpp"
#include "hadm/shm/shm.hpp"

namespace hadm::rover {

struct Waypoint {
    std::string id;
    std::string zone;
};

/// Drive cost of one terrain class: a fixed energy per segment, or a drive
/// power integrated over the segment (falling back to the scenario drive power).
struct TerrainClass {
    std::string name;
    std::optional<double> energy_wh;
    std::optional<double> power_w;
    double heat_c_per_h = 0.0;
};

/// A region shares one hidden terrain class across all of its segments.
struct Region {
    std::string id;
    std::vector<std::pair<std::string, double>> terrain;

    bool deterministic() const { return terrain.size() == 1; }
};

struct Segment {
    std::string from;
    std::string to;
    double duration_h = 0.0;
    std::string region;

    /// "drive(from->to)".
    std::string label() const;
};

struct Activity {
    std::string id;
    std::string waypoint;
    double duration_h = 0.0;
    double load_w = 0.0;
    double redo_probability = 0.0;
    /// A required activity must be attempted before leaving its waypoint.
    bool required = true;
};

struct SunWindow {
    std::string zone;
    double start_h = 0.0;
    double end_h = 0.0;
};

struct PowerConfig {
    double solar_w = 0.0;
    double heater_w = 0.0;
    double idle_w = 0.0;
    double drive_w = 0.0;
    std::vector<SunWindow> sunlight;
};

struct BatteryConfig {
    double capacity_wh = 0.0;
    double initial_wh = 0.0;
    double charge_rate_w = 0.0;
    std::vector<std::string> charge_points;
};

struct ThermalConfig {
    bool enabled = false;
    double nominal_c = 20.0;
    double cool_rate_c_per_h = 0.0;
    double damage_limit_c = std::numeric_limits<double>::infinity();
    std::vector<double> cool_grid_h{1.0};
};

struct Deadline {
    std::string activity;
    double by_h = 0.0;
};

/// energy: every step scores the battery change, completion adds the goal bonus.
/// final_battery: only the end of the mission scores, with the remaining charge.
enum class Objective { energy, final_battery };

struct Goal {
    std::string waypoint;
    double bonus = 0.0;
    std::vector<std::string> requires_done;
};

struct MissionConfig {
    std::string start;
    Objective objective = Objective::energy;
    std::vector<Goal> goals;
    double failure_penalty = -1e6;
    double max_time_h = 1000.0;
};

/// Degradation parameters for the uncontrolled-system prognosis scenario.
struct PrognosticsConfig {
    prognostics::DegradationModel model;
    prognostics::EventThreshold threshold;
    double horizon = 20.0;
    double sigma_max = 1.0;
    std::vector<double> health_fractions;
};

/// Emergency-response layer declared by a scenario: the condition defining
/// S_SER and the response action taken there.
struct SerConfig {
    enum class Trigger { state, observation };
    Trigger trigger = Trigger::state;
    shm::ThresholdPredicate condition;
    std::string action;
};

struct ScenarioSpec {
    std::string name;
    std::string description;
    std::vector<std::string> notes;
    std::optional<PrognosticsConfig> prognostics;
    std::vector<Waypoint> waypoints;
    std::vector<TerrainClass> terrain_classes;
    std::vector<Region> regions;
    std::vector<Segment> segments;
    std::vector<Activity> activities;
    PowerConfig power;
    BatteryConfig battery;
    ThermalConfig thermal;
    std::vector<Deadline> deadlines;
    MissionConfig mission;
    shm::ShmRules shm;
    std::optional<SerConfig> ser;

    bool has_rover_model() const { return !waypoints.empty(); }

    /// Lookups throw ConfigError for undeclared ids.
    const Waypoint& waypoint(std::string_view id) const;
    const TerrainClass& terrain_class(std::string_view name) const;
    const Region& region(std::string_view id) const;
    const Activity& activity(std::string_view id) const;
    std::size_t region_index(std::string_view id) const;
    std::size_t activity_index(std::string_view id) const;
    std::optional<double> deadline(std::string_view activity) const;
    const Goal* goal_at(std::string_view waypoint) const;
    bool is_charge_point(std::string_view waypoint) const;
};

/// One schema or semantic violation, located by JSON pointer or line:column.
struct Diagnostic {
    std::string location;
    std::string message;
};

/// A scenario document that failed validation; carries every finding.
class ScenarioError : public ConfigError {
public:
    ScenarioError(std::string source, std::vector<Diagnostic> diagnostics);

    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

/// Schema and semantic findings for a document; empty when valid.
std::vector<Diagnostic> validate_scenario_text(std::string_view json);

/// Parses and validates; throws ScenarioError listing all findings.
ScenarioSpec parse_scenario(std::string_view json, std::string_view source = "<memory>");
ScenarioSpec load_scenario(const std::filesystem::path& path);

inline constexpr int kBuiltinScenarioCount = 4;

/// The shipped scenario documents, parsed through the same loader as files.
ScenarioSpec builtin_scenario(int n);
std::string_view builtin_scenario_text(int n);
std::string_view scenario_schema_text();

/// Loads "1".."4", "builtin:N", or a file path.
ScenarioSpec resolve_scenario(std::string_view source);

}  // namespace hadm::rover
