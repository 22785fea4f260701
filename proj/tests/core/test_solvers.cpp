#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "hadm/core/errors.hpp"
#include "hadm/core/solvers.hpp"
#include "support/oracles.hpp"

using namespace hadm::core;

namespace {

Problem chain(std::vector<double> rewards) {
    ProblemBuilder b;
    std::vector<StateId> s;
    for (std::size_t i = 0; i <= rewards.size(); ++i) s.push_back(b.add_state("c" + std::to_string(i)));
    auto step = b.add_action("step");
    for (std::size_t i = 0; i < rewards.size(); ++i) b.add_choice(s[i], step, rewards[i], {{s[i + 1], 1.0}});
    b.set_terminal(s.back());
    b.horizon(rewards.size());
    return std::move(b).build();
}

Problem shifted(const Problem& p, double c) {
    ProblemBuilder b;
    for (std::size_t i = 0; i < p.state_count(); ++i) b.add_state(p.state(StateId{i}));
    for (std::size_t a = 1; a < p.action_count(); ++a) b.add_action(p.action_label(ActionId{a}));
    for (std::size_t i = 0; i < p.state_count(); ++i) {
        const StateId s{i};
        if (p.is_terminal(s)) {
            b.set_terminal(s, p.reward(s, p.stay_action()) + c);
            continue;
        }
        for (const auto& ch : p.choices(s)) {
            std::vector<Outcome> outs(ch.outcomes.begin(), ch.outcomes.end());
            for (auto& o : outs) o.reward += c;
            b.add_choice(s, ch.action, outs);
        }
    }
    b.discount(p.discount());
    b.horizon(p.horizon());
    return std::move(b).build();
}

double sup_diff(const ValueTable& a, const ValueTable& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

}  // namespace

TEST_CASE("expected utility of a terminal self-loop is its value") {
    Problem p = chain({-1.0});
    ValueTable u = ValueTable::zeros(p.state_count());
    u.values[1] = 7.5;
    CHECK(expected_utility(p, StateId{1}, p.stay_action(), u) == 7.5);
}

TEST_CASE("expected utility errors") {
    Problem p = chain({-1.0, -2.0});
    ValueTable u = ValueTable::undefined(p.state_count());
    CHECK_THROWS_AS(expected_utility(p, StateId{0}, *p.find_action("step"), u), hadm::IncompleteTableError);
    CHECK_THROWS_AS(expected_utility(p, StateId{2}, *p.find_action("step"), ValueTable::zeros(3)), hadm::DomainError);
}

TEST_CASE("plan utility sums rewards along a deterministic trajectory") {
    Problem p = chain({-1.0, -2.0, -3.0});
    auto step = *p.find_action("step");
    CHECK(plan_utility(p, StateId{0}, Plan{}) == 0.0);
    CHECK(plan_utility(p, StateId{0}, Plan{{step, step, step}}) == -6.0);
    CHECK_THROWS_AS(plan_utility(p, StateId{0}, Plan{{step, p.stay_action()}}), hadm::DomainError);
    CHECK(plan_utility(p, StateId{3}, Plan{{step}}) == 0.0);

    ProblemBuilder b;
    auto s = b.add_state("s");
    auto x = b.add_state("x");
    auto a = b.add_action("go");
    b.add_choice(s, a, 0.0, {{s, 0.5}, {x, 0.5}});
    b.set_terminal(x);
    b.horizon(2);
    Problem coin = std::move(b).build();
    CHECK_THROWS_AS(plan_utility(coin, s, Plan{{a}}), hadm::NotDeterministicError);
}

TEST_CASE("policy evaluation base case is the immediate reward") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Problem p = oracle::random_mdp(seed);
        Policy pi(p.state_count());
        for (std::size_t i = 0; i < p.state_count(); ++i) pi.set(StateId{i}, p.choices(StateId{i}).back().action);
        ValueTable u = evaluate_policy(p, pi, 0);
        for (std::size_t i = 0; i < p.state_count(); ++i) {
            CHECK(u.values[i] == p.reward(StateId{i}, pi.at(StateId{i})));
        }
    }
}

TEST_CASE("policy evaluation matches trajectory enumeration") {
    for (std::uint64_t seed = 100; seed < 160; ++seed) {
        Problem p = oracle::random_mdp(seed);
        const auto policies = oracle::all_stationary_policies(p);
        const Policy& pi = policies[seed % policies.size()];
        for (std::size_t t = 0; t <= 3; ++t) {
            ValueTable u = evaluate_policy(p, pi, t);
            for (std::size_t i = 0; i < p.state_count(); ++i) {
                CHECK(u.values[i] == doctest::Approx(oracle::trajectory_value(p, pi, StateId{i}, t)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("value iteration equals the best enumerated non-stationary policy") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Problem p = oracle::random_mdp(seed);
        const std::size_t t = *p.horizon();
        ValueTable u = value_iterate(p, HorizonStop{t});
        auto best = oracle::best_over_policies(p, t);
        for (std::size_t i = 0; i < p.state_count(); ++i) CHECK(std::abs(u.values[i] - best[i]) <= 1e-9);
        for (const auto& pi : oracle::all_stationary_policies(p)) {
            for (std::size_t i = 0; i < p.state_count(); ++i) {
                CHECK(oracle::trajectory_value(p, pi, StateId{i}, t) <= u.values[i] + 1e-9);
            }
        }
    }
}

TEST_CASE("greedy schedule reproduces the optimal finite-horizon values") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Problem p = oracle::random_mdp(seed);
        const std::size_t t = *p.horizon();
        std::vector<Policy> schedule{extract_policy(p, ValueTable::zeros(p.state_count()))};
        for (std::size_t k = 1; k <= t; ++k) schedule.push_back(extract_policy(p, value_iterate(p, HorizonStop{k - 1})));
        ValueTable greedy = evaluate_policy(p, schedule);
        ValueTable optimal = value_iterate(p, HorizonStop{t});
        CHECK(sup_diff(greedy, optimal) <= 1e-9);
        for (std::size_t i = 0; i < p.state_count(); ++i) {
            CHECK(std::abs(oracle::trajectory_value(p, schedule, StateId{i}) - optimal.values[i]) <= 1e-9);
        }
    }
}

TEST_CASE("value iteration on a lone terminal state") {
    for (double gamma : {0.0, 0.5, 0.9}) {
        ProblemBuilder b;
        b.set_terminal(b.add_state("done"), 2.0);
        b.discount(gamma);
        Problem p = std::move(b).build();
        ValueTable u = value_iterate(p);
        CHECK(u.values[0] == doctest::Approx(2.0 / (1.0 - gamma)).epsilon(1e-8));
    }
    ProblemBuilder b;
    b.set_terminal(b.add_state("done"));
    b.horizon(5);
    Problem p = std::move(b).build();
    CHECK(value_iterate(p).values[0] == 0.0);
}

TEST_CASE("residual stopping requires discounting") {
    Problem p = chain({-1.0});
    CHECK_THROWS_AS(value_iterate(p, ResidualStop{}), hadm::InvalidConfigError);
}

TEST_CASE("successive sweeps contract by the discount") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Problem base = oracle::random_mdp(seed);
        if (base.discount() >= 1.0) continue;
        std::vector<ValueTable> sweeps;
        for (std::size_t k = 0; k < 12; ++k) sweeps.push_back(value_iterate(base, HorizonStop{k}));
        for (std::size_t k = 1; k + 1 < sweeps.size(); ++k) {
            CHECK(sup_diff(sweeps[k + 1], sweeps[k]) <= base.discount() * sup_diff(sweeps[k], sweeps[k - 1]) + 1e-9);
        }
        ValueTable fixed = value_iterate(base, ResidualStop{1e-9});
        CHECK(fixed.residual < 1e-9);
        CHECK(fixed.iterations > 0);
    }
}

TEST_CASE("extract policy breaks ties toward the earliest admissible action") {
    ProblemBuilder b;
    auto s = b.add_state("s");
    auto t = b.add_state("t");
    auto late = b.add_action("late");
    auto early = b.add_action("early");
    b.add_choice(s, early, 1.0, {{t, 1.0}});
    b.add_choice(s, late, 1.0, {{t, 1.0}});
    b.set_terminal(t);
    b.horizon(1);
    Problem p = std::move(b).build();
    Policy pi = extract_policy(p, value_iterate(p));
    CHECK(pi.at(s) == early);
    CHECK(pi.tie_broken(s));
    CHECK_FALSE(pi.tie_broken(t));
    CHECK(pi.at(t) == p.stay_action());
}

TEST_CASE("extract policy with a single admissible action") {
    Problem p = chain({-4.0});
    Policy pi = extract_policy(p, value_iterate(p));
    CHECK(pi.at(StateId{0}) == *p.find_action("step"));
    CHECK(pi.tie_count() == 0);
}

TEST_CASE("adding a constant to every reward leaves the greedy policy unchanged") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Problem p = oracle::random_mdp(seed);
        if (p.discount() != 1.0) continue;
        Problem q = shifted(p, 7.25);
        const std::size_t t = *p.horizon();
        Policy a = extract_policy(p, value_iterate(p, HorizonStop{t}));
        Policy b = extract_policy(q, value_iterate(q, HorizonStop{t}));
        for (std::size_t i = 0; i < p.state_count(); ++i) CHECK(a.at(StateId{i}) == b.at(StateId{i}));
    }
}

TEST_CASE("value and policy tables serialize to CSV") {
    Problem p = chain({-1.5, -2.0});
    ValueTable u = value_iterate(p);
    std::ostringstream values;
    write_values_csv(values, p, u);
    CHECK(values.str() == "state,value\nc0,-3.5\nc1,-2\nc2,0\n");
    std::ostringstream policy;
    write_policy_csv(policy, p, extract_policy(p, u));
    CHECK(policy.str() == "state,action\nc0,step\nc1,step\nc2,stay\n");
}
