#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hadm/core/ids.hpp"
#include "hadm/core/problem.hpp"

namespace hadm::shm {

/// Named channel readings at one instant. Numeric channels carry physical
/// units in their names (motor_temp_c, battery_wh); label channels carry
/// discrete readings such as the current waypoint or a revealed terrain class.
struct SensorObservation {
    double time_h = 0.0;
    std::map<std::string, double> values;
    std::map<std::string, std::string> labels;

    /// Throws ConfigError for an undeclared channel.
    double value(const std::string& channel) const;
    const std::string& label(const std::string& channel) const;

    friend bool operator==(const SensorObservation&, const SensorObservation&) = default;
};

enum class Comparator { less, less_equal, greater, greater_equal };

Comparator parse_comparator(const std::string& text);
std::string to_string(Comparator c);

/// Red-line monitor on one numeric channel.
struct ThresholdPredicate {
    std::string id;
    std::string channel;
    Comparator comparator = Comparator::greater;
    double limit = 0.0;

    bool fires(double reading) const;
};

struct FaultDetector {
    std::vector<ThresholdPredicate> predicates;
};

struct FaultDescriptor {
    std::string component;
    std::string mode;
    std::map<std::string, double> parameters;
    double probability = 1.0;

    friend bool operator==(const FaultDescriptor&, const FaultDescriptor&) = default;
};

/// Maps a fired predicate to a fault. When `rate_parameter` is set, the rate of
/// change of the predicate's channel is estimated from the observation history
/// and stored under that name.
struct DiagnosisRule {
    std::string predicate;
    std::string component;
    std::string mode;
    double probability = 1.0;
    std::optional<std::string> rate_parameter;
};

/// Linear extrapolation of `channel` to `limit` at the rate stored in `parameter`.
struct PrognosisRule {
    std::string mode;
    std::string channel;
    double limit = 0.0;
    std::string parameter;
};

/// Restrictions a recovery imposes on later operations. Empty sets mean
/// unrestricted.
struct OperationalConstraints {
    std::set<std::string> allowed_terrain;

    bool restricts_terrain() const { return !allowed_terrain.empty(); }
    bool terrain_allowed(const std::string& terrain_class) const;
    /// Intersection semantics: both sets of restrictions hold afterwards.
    void merge(const OperationalConstraints& other);

    friend bool operator==(const OperationalConstraints&, const OperationalConstraints&) = default;
};

struct MitigationRule {
    std::string mode;
    std::string action;
    int priority = 0;
    OperationalConstraints constraints;
    bool mark_faulty = false;
};

/// How the separated architecture picks among operational alternatives.
enum class RouteChoice { decision_maker, prognostic_commitment };

struct ShmRules {
    FaultDetector detector;
    std::vector<DiagnosisRule> diagnoses;
    std::vector<PrognosisRule> prognoses;
    std::vector<MitigationRule> mitigations;
    /// The recovery action set A_SHM.
    std::vector<std::string> actions;
    /// Descriptors less likely than this escalate instead of recovering.
    double probability_gate = 0.5;
    RouteChoice route_choice = RouteChoice::decision_maker;

    /// Throws ConfigError when a rule references an undeclared predicate or a
    /// mitigation action outside `actions`.
    void validate() const;
};

/// Ids of the predicates that fire on `o`, in declaration order.
std::vector<std::string> fired_predicates(const FaultDetector& detector, const SensorObservation& o);
bool detect(const FaultDetector& detector, const SensorObservation& o);

/// Rule-table lookup for every fired predicate, in firing order. A fired
/// predicate without a rule yields an unknown-fault descriptor of probability 0.
std::vector<FaultDescriptor> diagnose(const ShmRules& rules, std::span<const std::string> fired,
                                      const SensorObservation& o, std::span<const SensorObservation> history);

/// Hours until the channel reaches the rule's limit, floored at 0. Nullopt when
/// the descriptor lacks the rate or the rate is not positive.
std::optional<double> prognose_fault(const PrognosisRule& rule, const FaultDescriptor& f, const SensorObservation& o);

struct RecoveryDecision {
    std::string action;
    OperationalConstraints constraints;
    std::vector<std::string> faulty_components;
    std::string mode;
};

struct Escalation {
    std::string reason;
};

using RecoveryOutcome = std::variant<RecoveryDecision, Escalation>;

/// Highest-priority mitigation matching any sufficiently likely descriptor;
/// equal priorities go to the earlier rule. Throws DomainError on an empty
/// descriptor list.
RecoveryOutcome select_recovery(const ShmRules& rules, std::span<const FaultDescriptor> faults,
                                std::optional<double> rul);

/// Route whose open-loop expected reward under uniform random continuation is
/// largest; ties go to the first listed. Commitment is the caller's concern.
core::ActionId phm_route_choice(const core::Problem& problem, core::StateId s0, std::span<const core::ActionId> routes);

struct PipelineEvent {
    enum class Stage { detect, diagnose, prognose, recover, escalate };
    Stage stage;
    double time_h = 0.0;
    std::string detail;
};

std::string to_string(PipelineEvent::Stage stage);

/// Detect, diagnose, prognose and mitigate in that order, keeping the
/// observation history, the accumulated constraints and faulty components.
class ShmPipeline {
public:
    explicit ShmPipeline(ShmRules rules);

    /// Processes one observation; returns a recovery when the pipeline
    /// recommends one.
    std::optional<RecoveryDecision> process(const SensorObservation& o);

    const OperationalConstraints& constraints() const { return constraints_; }
    const std::set<std::string>& faulty_components() const { return faulty_; }
    const std::vector<PipelineEvent>& events() const { return events_; }
    const std::vector<SensorObservation>& history() const { return history_; }
    const ShmRules& rules() const { return rules_; }

private:
    ShmRules rules_;
    std::vector<SensorObservation> history_;
    OperationalConstraints constraints_;
    std::set<std::string> faulty_;
    std::vector<PipelineEvent> events_;
};

}  // namespace hadm::shm
