#include <doctest.h>

#include "hadm/core/errors.hpp"
#include "hadm/core/problem.hpp"

using namespace hadm::core;

TEST_CASE("state vectors label their components in order") {
    StateVector v({{"wp", "wp2"}, {"battery_wh", "300"}});
    CHECK(v.label() == "wp=wp2;battery_wh=300");
    CHECK(*v.find("battery_wh") == "300");
    CHECK(v.find("temp_c") == nullptr);
    CHECK(StateVector("idle").label() == "idle");
    CHECK_THROWS_AS(StateVector({{"wp", "a"}, {"wp", "b"}}), hadm::ConfigError);
}

TEST_CASE("builder rejects malformed models") {
    SUBCASE("row not summing to one") {
        ProblemBuilder b;
        auto s = b.add_state("s");
        auto a = b.add_action("go");
        b.add_choice(s, a, 0.0, {{s, 0.7}});
        b.horizon(1);
        CHECK_THROWS_AS(std::move(b).build(), hadm::ConfigError);
    }
    SUBCASE("probability outside [0,1]") {
        ProblemBuilder b;
        auto s = b.add_state("s");
        auto t = b.add_state("t");
        auto a = b.add_action("go");
        b.add_choice(s, a, 0.0, {{s, 1.5}, {t, -0.5}});
        b.set_terminal(t);
        b.horizon(1);
        CHECK_THROWS_AS(std::move(b).build(), hadm::ConfigError);
    }
    SUBCASE("terminal state with its own action") {
        ProblemBuilder b;
        auto s = b.add_state("s");
        auto a = b.add_action("go");
        b.add_choice(s, a, 0.0, {{s, 1.0}});
        b.set_terminal(s);
        b.horizon(1);
        CHECK_THROWS_AS(std::move(b).build(), hadm::ConfigError);
    }
    SUBCASE("non-terminal state without actions") {
        ProblemBuilder b;
        b.add_state("s");
        b.horizon(1);
        CHECK_THROWS_AS(std::move(b).build(), hadm::ConfigError);
    }
    SUBCASE("undiscounted without horizon") {
        ProblemBuilder b;
        b.set_terminal(b.add_state("s"));
        CHECK_THROWS_AS(std::move(b).build(), hadm::ConfigError);
    }
    SUBCASE("unreachable state") {
        ProblemBuilder b;
        auto s = b.add_state("s");
        b.set_terminal(s);
        b.set_terminal(b.add_state("orphan"));
        b.add_initial_state(s);
        b.horizon(0);
        CHECK_THROWS_AS(std::move(b).build(), hadm::ConfigError);
    }
    SUBCASE("missing observation row") {
        ProblemBuilder b;
        auto s = b.add_state("s");
        auto t = b.add_state("t");
        auto a = b.add_action("go");
        b.add_observation("beep");
        b.add_choice(s, a, 0.0, {{t, 1.0}});
        b.set_terminal(t);
        b.horizon(1);
        CHECK_THROWS_AS(std::move(b).build(), hadm::ConfigError);
    }
    SUBCASE("reserved self-loop label") {
        ProblemBuilder b;
        auto s = b.add_state("s");
        CHECK_THROWS_AS(b.add_choice(s, b.add_action("stay"), 0.0, {{s, 1.0}}), hadm::ConfigError);
    }
}

TEST_CASE("terminal states carry exactly one self-loop") {
    ProblemBuilder b;
    auto s = b.add_state("s");
    auto t = b.add_state("t");
    auto a = b.add_action("go");
    b.add_choice(s, a, {{t, 1.0, -3.0}});
    b.set_terminal(t, 2.0);
    b.horizon(2);
    Problem p = std::move(b).build();
    REQUIRE(p.choices(t).size() == 1);
    CHECK(p.choices(t)[0].action == p.stay_action());
    CHECK(p.transitions(t, p.stay_action())[0].next == t);
    CHECK(p.reward(t, p.stay_action()) == 2.0);
    CHECK(p.reward(s, a) == -3.0);
    CHECK(p.is_terminal(t));
    CHECK_FALSE(p.is_terminal(s));
    CHECK_THROWS_AS(p.choice(t, a), hadm::DomainError);
}

TEST_CASE("expected reward is the probability-weighted outcome reward") {
    ProblemBuilder b;
    auto s = b.add_state("s");
    auto x = b.add_state("x");
    auto y = b.add_state("y");
    auto a = b.add_action("go");
    b.add_choice(s, a, {{x, 0.4, -1200.0}, {y, 0.6, -600.0}});
    b.set_terminal(x);
    b.set_terminal(y);
    b.horizon(1);
    Problem p = std::move(b).build();
    CHECK(p.reward(s, a) == doctest::Approx(-840.0).epsilon(1e-12));
}

TEST_CASE("identity observation model without declared alphabet") {
    ProblemBuilder b;
    auto s = b.add_state("s");
    auto t = b.add_state("t");
    auto a = b.add_action("go");
    b.add_choice(s, a, 0.0, {{t, 1.0}});
    b.set_terminal(t);
    b.horizon(1);
    Problem p = std::move(b).build();
    CHECK_FALSE(p.has_observation_model());
    CHECK(p.observation_count() == 2);
    CHECK(p.observation_probability(t, a, ObservationId{t.value}) == 1.0);
    CHECK(p.observation_probability(t, a, ObservationId{s.value}) == 0.0);
    CHECK(p.find_observation("t")->value == t.value);
}
