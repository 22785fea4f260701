#include <doctest.h>

#include <cmath>

#include "hadm/core/errors.hpp"
#include "hadm/core/planning.hpp"
#include "support/oracles.hpp"

using namespace hadm::core;

TEST_CASE("open-loop plan on a deterministic problem is a single scenario") {
    ProblemBuilder b;
    auto s0 = b.add_state("s0");
    auto s1 = b.add_state("s1");
    auto s2 = b.add_state("s2");
    auto go = b.add_action("go");
    b.add_choice(s0, go, -2.0, {{s1, 1.0}});
    b.add_choice(s1, go, -5.0, {{s2, 1.0}});
    b.set_terminal(s2);
    b.horizon(3);
    Problem p = std::move(b).build();
    Plan plan{{go, go}};
    auto r = open_loop_expectation(p, s0, plan);
    REQUIRE(r.scenarios.size() == 1);
    CHECK(r.scenarios[0].probability == 1.0);
    CHECK(r.expected == plan_utility(p, s0, plan));
    CHECK(r.scenarios[0].final_state == s2);
    CHECK(closed_loop_value(p, s0) == r.expected);
    CHECK(open_loop_expectation(p, s0, UniformRandom{}).expected == r.expected);
}

TEST_CASE("open-loop enumeration lists every weighted outcome") {
    ProblemBuilder b;
    auto s0 = b.add_state("s0");
    auto hi = b.add_state("hi");
    auto lo = b.add_state("lo");
    auto end = b.add_state("end");
    auto left = b.add_action("left");
    auto right = b.add_action("right");
    b.add_choice(s0, left, {{hi, 0.25, -10.0}, {lo, 0.75, -2.0}});
    b.add_choice(hi, left, -1.0, {{end, 1.0}});
    b.add_choice(hi, right, -3.0, {{end, 1.0}});
    b.add_choice(lo, left, -4.0, {{end, 1.0}});
    b.set_terminal(end);
    b.horizon(2);
    Problem p = std::move(b).build();
    auto r = open_loop_expectation(p, s0, UniformRandom{});
    REQUIRE(r.scenarios.size() == 3);
    CHECK(r.scenarios[0].probability == 0.125);
    CHECK(r.scenarios[0].total_reward == -11.0);
    CHECK(r.scenarios[1].total_reward == -13.0);
    CHECK(r.scenarios[2].probability == 0.75);
    CHECK(r.scenarios[2].total_reward == -6.0);
    CHECK(r.expected == doctest::Approx(0.125 * -11 + 0.125 * -13 + 0.75 * -6).epsilon(1e-12));
    CHECK(closed_loop_value(p, s0) == doctest::Approx(0.25 * -11 + 0.75 * -6).epsilon(1e-12));
}

TEST_CASE("enumeration needs a bounded horizon") {
    ProblemBuilder b;
    auto s = b.add_state("s");
    b.add_choice(s, b.add_action("spin"), -1.0, {{s, 1.0}});
    b.discount(0.5);
    Problem p = std::move(b).build();
    CHECK_THROWS_AS(open_loop_expectation(p, s, UniformRandom{}), hadm::InvalidConfigError);
    CHECK_THROWS_AS(closed_loop_value(p, s), hadm::InvalidConfigError);
}

TEST_CASE("scenario cap raises a resource error") {
    ProblemBuilder b;
    auto s = b.add_state("s");
    auto t = b.add_state("t");
    b.add_choice(s, b.add_action("coin"), 0.0, {{s, 0.5}, {t, 0.5}});
    b.set_terminal(t);
    b.horizon(20);
    Problem p = std::move(b).build();
    CHECK_THROWS_AS(open_loop_expectation(p, s, UniformRandom{}, 10), hadm::ResourceError);
}

TEST_CASE("closed-loop value equals value iteration on fully observable problems") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Problem p = oracle::random_mdp(seed);
        ValueTable u = value_iterate(p, HorizonStop{*p.horizon()});
        for (std::size_t i = 0; i < p.state_count(); ++i) {
            CHECK(std::abs(closed_loop_value(p, StateId{i}) - u.values[i]) <= 1e-9);
        }
    }
}

TEST_CASE("closed-loop value matches the best observation-to-action rule") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto sc = oracle::random_two_stage(seed);
        Belief b0 = Belief::point_mass(sc.problem.state_count(), sc.start);
        const double closed = closed_loop_value(sc.problem, b0);
        CHECK(std::abs(closed - oracle::best_decision_rule(sc)) <= 1e-9);
        for (double open : oracle::all_open_loop_plans(sc)) CHECK(closed >= open - 1e-9);
        CHECK(closed >= open_loop_expectation(sc.problem, sc.start, UniformRandom{}).expected - 1e-9);
    }
}

TEST_CASE("action filter restricts the search") {
    ProblemBuilder b;
    auto s = b.add_state("s");
    auto t = b.add_state("t");
    auto good = b.add_action("good");
    auto poor = b.add_action("poor");
    b.add_choice(s, good, 5.0, {{t, 1.0}});
    b.add_choice(s, poor, 1.0, {{t, 1.0}});
    b.set_terminal(t);
    b.horizon(1);
    Problem p = std::move(b).build();
    Belief b0 = Belief::point_mass(2, s);
    CHECK(best_action(p, b0, 1).action == good);
    auto d = best_action(p, b0, 1, [&](StateId, ActionId a) { return a != good; });
    CHECK(d.action == poor);
    CHECK(d.value == 1.0);
    CHECK_THROWS_AS(best_action(p, b0, 1, [](StateId, ActionId) { return false; }), hadm::DomainError);
    CHECK(best_action(p, Belief::point_mass(2, t), 1).action == p.stay_action());
}
