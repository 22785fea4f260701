#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hadm/core/ids.hpp"
#include "hadm/core/problem.hpp"
#include "hadm/rover/scenario.hpp"
#include "hadm/shm/shm.hpp"

namespace hadm::rover {

enum class ActivityStatus { pending, redo, done, missed };
enum class MissionStatus { active, complete, stranded, motor_failure, timeout, stuck };
enum class ChargeDecision { open, skipped, charged };

std::string to_string(ActivityStatus s);
std::string to_string(MissionStatus s);
std::string to_string(ChargeDecision d);
bool is_failure(MissionStatus s);

/// Rover state at an event boundary. Battery and temperature are kept at the
/// compiled resolution (1 Wh, 1 degree C).
struct RoverState {
    std::string waypoint;
    double time_h = 0.0;
    double battery_wh = 0.0;
    double motor_temp_c = 0.0;
    /// Indexed like ScenarioSpec::activities.
    std::vector<ActivityStatus> activities;
    /// Revealed terrain class per region (indexed like ScenarioSpec::regions);
    /// empty string while unknown.
    std::vector<std::string> terrain;
    /// Indexed like BatteryConfig::charge_points.
    std::vector<ChargeDecision> charge;
    MissionStatus status = MissionStatus::active;
    /// Energy missing when stranded.
    double deficit_wh = 0.0;

    friend bool operator==(const RoverState&, const RoverState&) = default;
};

/// Named components with units in their names, e.g. battery_wh=300.
core::StateVector to_state_vector(const ScenarioSpec& spec, const RoverState& s);
/// Inverse of to_state_vector. Throws ConfigError on malformed labels.
RoverState from_state_vector(const ScenarioSpec& spec, const core::StateVector& v);

/// Channels an onboard sensor suite reports for `s`.
shm::SensorObservation sense(const ScenarioSpec& spec, const RoverState& s);

bool in_sunlight(const ScenarioSpec& spec, std::string_view zone, double time_h);

/// Solar input minus the named load, minus the heater out of sunlight. `load`
/// is "drive", "idle", or an activity id. Throws ConfigError otherwise.
double net_power(const ScenarioSpec& spec, std::string_view load, bool in_sun);

/// temp0 plus climb heating minus cooling, floored at nominal. Climb heating
/// uses the highest heat rate among the terrain classes.
double motor_temp_after(const ScenarioSpec& spec, double temp0, double drive_h, double cool_h);

/// Battery trajectory of a constant load over [t0, t0 + duration) in `zone`:
/// in sunlight the battery gains min(solar - load, charge rate), in darkness it
/// loses load + heater. Clamped at capacity; `min_wh` is the lowest level
/// reached before clamping below zero.
struct EnergyLeg {
    double end_wh = 0.0;
    double min_wh = 0.0;
};
EnergyLeg integrate_energy(const ScenarioSpec& spec, std::string_view zone, double t0, double duration_h, double load_w,
                           double start_wh);

struct ModelOptions {
    /// Offer stop_and_cool_down and timed cool-downs while the motor is hot.
    bool health_actions = true;
    /// Track motor temperature and the motor-failure state. A model without it
    /// keeps the motor at nominal.
    bool thermal_model = true;
};

struct RoverAction {
    enum class Kind { activity, skip_charge, charge_to_full, drive, stop_and_cool_down, cool };
    Kind kind = Kind::drive;
    /// Activity or segment index, or the cool-grid entry.
    std::size_t index = 0;
    std::string label;
};

/// Admissible actions in their fixed order: activities at the waypoint,
/// charge decision, drives in segment order, then cool-downs.
std::vector<RoverAction> admissible_actions(const ScenarioSpec& spec, const RoverState& s, const ModelOptions& options);

/// A revealed random variable: "terrain.<region>" or "redo.<activity>".
struct Reveal {
    std::string variable;
    std::string value;

    friend bool operator==(const Reveal&, const Reveal&) = default;
};

struct Branch {
    RoverState next;
    double probability = 1.0;
    double reward = 0.0;
    std::vector<Reveal> reveals;
};

RoverState initial_state(const ScenarioSpec& spec, const ModelOptions& options = {});

/// Outcome distribution of `a` in `s`, with the mission status of each
/// successor resolved and rewards per the scenario objective.
std::vector<Branch> apply_action(const ScenarioSpec& spec, const RoverState& s, const RoverAction& a,
                                 const ModelOptions& options);

struct CompileOptions {
    ModelOptions model;
    /// Start from this state instead of the scenario's initial state.
    std::optional<RoverState> root;
    std::size_t state_cap = 1'000'000;
};

/// A scenario compiled into a fully observable finite-horizon Problem.
class CompiledScenario {
public:
    const core::Problem& problem() const { return problem_; }
    const ScenarioSpec& spec() const { return *spec_; }
    const ModelOptions& options() const { return options_; }
    core::StateId root() const { return root_; }

    const RoverState& rover(core::StateId s) const { return rovers_.at(s.value); }
    std::optional<core::StateId> find(const RoverState& r) const;
    /// Revealed variables of each outcome of (s, a), aligned with the outcome list.
    const std::vector<std::vector<Reveal>>& reveals(core::StateId s, core::ActionId a) const;
    /// The scenario action behind (s, a); throws DomainError when inadmissible.
    const RoverAction& rover_action(core::StateId s, core::ActionId a) const;

private:
    friend CompiledScenario compile(const ScenarioSpec& spec, const CompileOptions& options);

    std::shared_ptr<const ScenarioSpec> spec_;
    ModelOptions options_;
    core::Problem problem_;
    core::StateId root_;
    std::vector<RoverState> rovers_;
    std::vector<std::vector<RoverAction>> actions_;
    std::vector<std::map<std::size_t, std::vector<std::vector<Reveal>>>> reveals_;
};

/// Breadth-first compilation from the root. Throws ResourceError naming the
/// widest state dimension when the cap is exceeded and ConfigError when the
/// scenario has no rover model or contains a zero-duration cycle. The horizon
/// is the longest decision path minus one.
CompiledScenario compile(const ScenarioSpec& spec, const CompileOptions& options = {});

/// Cross-check between scenario probabilities and compiled transitions.
struct CoverageEntry {
    std::string variable;
    std::string value;
    double probability = 0.0;
    /// Compiled outcomes revealing this assignment.
    std::size_t transitions = 0;
};

struct CoverageReport {
    std::vector<CoverageEntry> entries;
    std::vector<std::string> problems;

    bool ok() const { return problems.empty(); }
};

/// Every stochastic outcome must carry exactly the scenario probability of the
/// assignment it reveals, and every positive-probability assignment must be
/// revealed somewhere when its variable is reachable.
CoverageReport audit_coverage(const CompiledScenario& compiled);

}  // namespace hadm::rover
