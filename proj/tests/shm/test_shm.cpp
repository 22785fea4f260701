#include <doctest.h>

#include <limits>
#include <variant>

#include "hadm/core/errors.hpp"
#include "hadm/core/planning.hpp"
#include "hadm/shm/shm.hpp"

using namespace hadm::shm;
using hadm::core::ActionId;
using hadm::core::ProblemBuilder;
using hadm::core::StateId;

namespace {

SensorObservation reading(double time_h, double motor_temp_c) {
    SensorObservation o;
    o.time_h = time_h;
    o.values["motor_temp_c"] = motor_temp_c;
    return o;
}

ShmRules motor_rules() {
    ShmRules r;
    r.detector.predicates.push_back({"motor_hot", "motor_temp_c", Comparator::greater, 40.0});
    r.diagnoses.push_back({"motor_hot", "drive_motor", "increased_friction", 1.0, "heat_rate"});
    r.prognoses.push_back({"increased_friction", "motor_temp_c", 80.0, "heat_rate"});
    r.actions = {"stop_and_cool_down"};
    r.mitigations.push_back({"increased_friction", "stop_and_cool_down", 0, {{"flat", "downhill"}}, true});
    return r;
}

}  // namespace

TEST_CASE("detection fires on threshold crossings only") {
    const auto rules = motor_rules();
    CHECK(detect(rules.detector, reading(3, 60)));
    CHECK_FALSE(detect(rules.detector, reading(0, 20)));
    CHECK_FALSE(detect(FaultDetector{}, reading(0, 60)));
    CHECK_THROWS_AS(detect(rules.detector, SensorObservation{}), hadm::ConfigError);
}

TEST_CASE("comparators") {
    CHECK(ThresholdPredicate{"p", "x", Comparator::less, 1}.fires(0.5));
    CHECK_FALSE(ThresholdPredicate{"p", "x", Comparator::less, 1}.fires(1));
    CHECK(ThresholdPredicate{"p", "x", Comparator::less_equal, 1}.fires(1));
    CHECK(ThresholdPredicate{"p", "x", Comparator::greater_equal, 1}.fires(1));
    CHECK(parse_comparator(">=") == Comparator::greater_equal);
    CHECK(to_string(parse_comparator("<")) == "<");
    CHECK_THROWS_AS(parse_comparator("=="), hadm::ConfigError);
}

TEST_CASE("diagnosis maps fired predicates through the rule table") {
    const auto rules = motor_rules();
    const std::vector<SensorObservation> history{reading(0, 20)};
    SUBCASE("rate estimated from history") {
        const std::vector<std::string> fired{"motor_hot"};
        const auto faults = diagnose(rules, fired, reading(2, 60), history);
        REQUIRE(faults.size() == 1);
        CHECK(faults[0] == FaultDescriptor{"drive_motor", "increased_friction", {{"heat_rate", 20.0}}, 1.0});
    }
    SUBCASE("no fired predicates") {
        CHECK(diagnose(rules, {}, reading(2, 60), history).empty());
    }
    SUBCASE("unknown predicate yields an unknown fault of probability 0") {
        const std::vector<std::string> fired{"battery_low"};
        const auto faults = diagnose(rules, fired, reading(2, 60), history);
        REQUIRE(faults.size() == 1);
        CHECK(faults[0].probability == 0.0);
        CHECK(faults[0].component == "unknown");
    }
    SUBCASE("two predicates, two descriptors in firing order") {
        auto two = rules;
        two.detector.predicates.push_back({"battery_low", "battery_wh", Comparator::less, 100});
        two.diagnoses.push_back({"battery_low", "battery", "low_charge", 1.0, std::nullopt});
        const std::vector<std::string> fired{"battery_low", "motor_hot"};
        const auto faults = diagnose(two, fired, reading(2, 60), history);
        REQUIRE(faults.size() == 2);
        CHECK(faults[0].mode == "low_charge");
        CHECK(faults[1].mode == "increased_friction");
    }
}

TEST_CASE("linear fault prognosis") {
    const PrognosisRule rule{"increased_friction", "motor_temp_c", 80.0, "heat_rate"};
    const FaultDescriptor fast{"drive_motor", "increased_friction", {{"heat_rate", 20.0}}, 1.0};
    const FaultDescriptor slow{"drive_motor", "increased_friction", {{"heat_rate", 10.0}}, 1.0};
    const FaultDescriptor cooling{"drive_motor", "increased_friction", {{"heat_rate", -5.0}}, 1.0};
    CHECK(prognose_fault(rule, fast, reading(2, 60)) == doctest::Approx(1.0));
    CHECK(prognose_fault(rule, fast, reading(2, 80)) == 0.0);
    CHECK(prognose_fault(rule, fast, reading(2, 95)) == 0.0);
    CHECK(prognose_fault(rule, slow, reading(2, 60)) == doctest::Approx(2.0));
    CHECK_FALSE(prognose_fault(rule, cooling, reading(2, 60)).has_value());
    CHECK_FALSE(prognose_fault(rule, FaultDescriptor{}, reading(2, 60)).has_value());
}

TEST_CASE("recovery selection") {
    const auto rules = motor_rules();
    const std::vector<FaultDescriptor> friction{{"drive_motor", "increased_friction", {{"heat_rate", 20.0}}, 1.0}};
    SUBCASE("stop and cool down with terrain restriction") {
        const auto out = select_recovery(rules, friction, 1.0);
        const auto* d = std::get_if<RecoveryDecision>(&out);
        REQUIRE(d);
        CHECK(d->action == "stop_and_cool_down");
        CHECK(d->constraints.allowed_terrain == std::set<std::string>{"downhill", "flat"});
        CHECK(d->faulty_components == std::vector<std::string>{"drive_motor"});
    }
    SUBCASE("empty rule set escalates") {
        ShmRules empty;
        CHECK(std::holds_alternative<Escalation>(select_recovery(empty, friction, std::nullopt)));
    }
    SUBCASE("low battery restores charge") {
        ShmRules battery;
        battery.detector.predicates.push_back({"low", "battery_wh", Comparator::less, 1000});
        battery.diagnoses.push_back({"low", "battery", "low_battery", 1.0, std::nullopt});
        battery.actions = {"charge_to_full"};
        battery.mitigations.push_back({"low_battery", "charge_to_full", 0, {}, false});
        const std::vector<FaultDescriptor> low{{"battery", "low_battery", {}, 1.0}};
        const auto out = select_recovery(battery, low, std::nullopt);
        REQUIRE(std::holds_alternative<RecoveryDecision>(out));
        CHECK(std::get<RecoveryDecision>(out).action == "charge_to_full");
    }
    SUBCASE("descriptors below the gate escalate") {
        const std::vector<FaultDescriptor> unsure{{"drive_motor", "increased_friction", {}, 0.2}};
        CHECK(std::holds_alternative<Escalation>(select_recovery(rules, unsure, std::nullopt)));
    }
    SUBCASE("priority then rule order") {
        auto r = rules;
        r.actions.push_back("halt");
        r.actions.push_back("limp");
        r.mitigations.push_back({"increased_friction", "halt", 5, {}, false});
        r.mitigations.push_back({"increased_friction", "limp", 5, {}, false});
        CHECK(std::get<RecoveryDecision>(select_recovery(r, friction, std::nullopt)).action == "halt");
    }
    SUBCASE("empty descriptor list is a domain error") {
        CHECK_THROWS_AS(select_recovery(rules, {}, std::nullopt), hadm::DomainError);
    }
}

TEST_CASE("rule validation") {
    auto r = motor_rules();
    r.actions.clear();
    CHECK_THROWS_AS(r.validate(), hadm::ConfigError);
    r = motor_rules();
    r.diagnoses[0].predicate = "missing";
    CHECK_THROWS_AS(r.validate(), hadm::ConfigError);
    r = motor_rules();
    r.detector.predicates[0].limit = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(r.validate(), hadm::ConfigError);
}

TEST_CASE("constraint merging intersects") {
    OperationalConstraints a{{"flat", "downhill"}};
    a.merge(OperationalConstraints{});
    CHECK(a.allowed_terrain.size() == 2);
    a.merge(OperationalConstraints{{"flat", "steep"}});
    CHECK(a.allowed_terrain == std::set<std::string>{"flat"});
    CHECK(a.terrain_allowed("flat"));
    CHECK_FALSE(a.terrain_allowed("downhill"));
    a.merge(OperationalConstraints{{"steep"}});
    CHECK(a.restricts_terrain());
    CHECK_FALSE(a.terrain_allowed("flat"));
    CHECK(OperationalConstraints{}.terrain_allowed("anything"));
}

TEST_CASE("route choice by open-loop expectation") {
    // Two routes from s0: a sure -840 and a coin flip between -1200 and -500.
    ProblemBuilder b;
    const StateId s0 = b.add_state("s0");
    const StateId end = b.add_state("end");
    b.set_terminal(end);
    const ActionId left = b.add_action("left");
    const ActionId right = b.add_action("right");
    const ActionId same = b.add_action("same");
    b.add_choice(s0, left, {{end, 1.0, -840}});
    b.add_choice(s0, right, {{end, 0.5, -1200}, {end, 0.5, -500}});
    b.add_choice(s0, same, {{end, 1.0, -840}});
    b.add_initial_state(s0);
    b.horizon(1);
    const auto p = std::move(b).build();

    const std::vector<ActionId> both{right, left};
    CHECK(phm_route_choice(p, s0, both) == left);
    const std::vector<ActionId> tied{same, left};
    CHECK(phm_route_choice(p, s0, tied) == same);
    const std::vector<ActionId> single{right};
    CHECK(phm_route_choice(p, s0, single) == right);
    CHECK_THROWS_AS(phm_route_choice(p, s0, {}), hadm::DomainError);
}

TEST_CASE("pipeline stages run in order and accumulate state") {
    ShmPipeline pipe(motor_rules());
    CHECK_FALSE(pipe.process(reading(0, 20)).has_value());
    CHECK(pipe.events().empty());
    const auto d = pipe.process(reading(2, 60));
    REQUIRE(d.has_value());
    CHECK(d->action == "stop_and_cool_down");
    REQUIRE(pipe.events().size() == 4);
    CHECK(pipe.events()[0].stage == PipelineEvent::Stage::detect);
    CHECK(pipe.events()[1].stage == PipelineEvent::Stage::diagnose);
    CHECK(pipe.events()[2].stage == PipelineEvent::Stage::prognose);
    CHECK(pipe.events()[2].detail == "increased_friction rul_h=1");
    CHECK(pipe.events()[3].stage == PipelineEvent::Stage::recover);
    CHECK(pipe.constraints().allowed_terrain == std::set<std::string>{"downhill", "flat"});
    CHECK(pipe.faulty_components().contains("drive_motor"));
    CHECK(pipe.history().size() == 2);
}

TEST_CASE("pipeline escalates unknown faults") {
    auto rules = motor_rules();
    rules.diagnoses.clear();
    ShmPipeline pipe(rules);
    CHECK_FALSE(pipe.process(reading(1, 60)).has_value());
    REQUIRE(pipe.events().size() == 3);
    CHECK(pipe.events().back().stage == PipelineEvent::Stage::escalate);
    CHECK(to_string(PipelineEvent::Stage::escalate) == "escalate");
}
