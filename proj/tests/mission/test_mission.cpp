#include <doctest.h>

#include <cmath>

#include "hadm/core/errors.hpp"
#include "hadm/core/planning.hpp"
#include "hadm/mission/mission.hpp"
#include "hadm/rover/scenario.hpp"

using namespace hadm;
using mission::Mission;
using mission::Strategy;

namespace {

std::vector<std::string> actions_of(const mission::EpisodeResult& r) {
    std::vector<std::string> out;
    for (const auto& s : r.trace.steps) out.push_back(s.action_label);
    return out;
}

const std::vector<std::string> kDifficultBoth{"terrain=difficult-both"};
const std::vector<std::string> kRedo{"redo=true"};
const std::vector<std::string> kNoRedo{"redo=false"};

}  // namespace

TEST_CASE("strategy names") {
    for (auto s : mission::kAllStrategies) CHECK(mission::parse_strategy(mission::to_string(s)) == s);
    CHECK_THROWS_AS(mission::parse_strategy("greedy"), ConfigError);
    CHECK_THROWS_AS(Mission(rover::builtin_scenario(1)), ConfigError);
}

TEST_CASE("example 2: prognostic commitment versus closed loop") {
    const Mission m(rover::builtin_scenario(2));
    CHECK(*m.analytic_value(Strategy::phm_commit) == -840);
    CHECK(*m.analytic_value(Strategy::shm_baseline) == -840);
    CHECK(*m.analytic_value(Strategy::hadm) == -800);

    const auto phm = m.run_seeded(Strategy::phm_commit, kDifficultBoth, 1);
    CHECK(actions_of(phm) == std::vector<std::string>{"drive(wp0->wp1)", "drive(wp1->wp4)"});
    CHECK(phm.outcome == "stranded");
    CHECK(phm.final_state.deficit_wh == 100);

    const auto baseline = m.run_seeded(Strategy::shm_baseline, kDifficultBoth, 1);
    CHECK(baseline.outcome == "stranded");
    CHECK(baseline.final_state.deficit_wh == 100);

    const auto hadm = m.run_seeded(Strategy::hadm, kDifficultBoth, 1);
    CHECK(actions_of(hadm) == std::vector<std::string>{"drive(wp0->wp2)", "drive(wp2->wp3)", "drive(wp3->wp4)"});
    CHECK(hadm.outcome == "complete");
    CHECK(hadm.final_state.battery_wh == 100);

    CHECK(*m.analytic_value(Strategy::hadm, kDifficultBoth) == -1000);
    CHECK(*m.analytic_value(Strategy::phm_commit, kDifficultBoth) == -1200);

    mission::MissionOptions o;
    o.rerun_prognosis = true;
    const Mission rerun(rover::builtin_scenario(2), o);
    CHECK(rerun.run_seeded(Strategy::phm_commit, kDifficultBoth, 1).outcome == "stranded");
}

TEST_CASE("example 3: restore-to-nominal versus unified planning") {
    const Mission m(rover::builtin_scenario(3));
    const auto baseline = m.run_seeded(Strategy::shm_baseline, kRedo, 1);
    CHECK(baseline.outcome == "stranded");
    CHECK(baseline.final_state.deficit_wh == 300);
    REQUIRE(baseline.trace.steps.size() >= 1);
    CHECK(baseline.trace.steps[0].action_label == "charge_to_full");
    CHECK(baseline.trace.steps[0].provider == "SHM");
    REQUIRE(baseline.shm_events.size() == 3);
    CHECK(baseline.shm_events[0].stage == shm::PipelineEvent::Stage::detect);
    CHECK(baseline.shm_events[1].stage == shm::PipelineEvent::Stage::diagnose);
    CHECK(baseline.shm_events[2].stage == shm::PipelineEvent::Stage::recover);

    const auto redo = m.run_seeded(Strategy::hadm, kRedo, 1);
    CHECK(redo.outcome == "complete");
    CHECK(redo.final_state.battery_wh == 300);
    const auto no_redo = m.run_seeded(Strategy::hadm, kNoRedo, 1);
    CHECK(no_redo.final_state.battery_wh == 200);
    CHECK(actions_of(no_redo).front() == "skip_charge");

    CHECK(*m.analytic_value(Strategy::hadm) == 250);
    CHECK(*m.analytic_value(Strategy::shm_baseline) == 50);

    const auto fixed = m.run_seeded(Strategy::fixed_plan, kRedo, 1);
    CHECK(fixed.outcome == "aborted");
    CHECK(fixed.trace.aborted->find("inadmissible") != std::string::npos);
}

TEST_CASE("example 4: separated pipeline aborts the detour") {
    const Mission m(rover::builtin_scenario(4));
    const auto baseline = m.run_seeded(Strategy::shm_baseline, {}, 1);
    CHECK(actions_of(baseline) ==
          std::vector<std::string>{"drive(A->B)", "stop_and_cool_down", "drive(B->A)", "drive(A->wp1)"});
    CHECK(baseline.trace.steps[1].provider == "SHM");
    bool prognosed = false;
    for (const auto& e : baseline.shm_events) {
        if (e.stage == shm::PipelineEvent::Stage::prognose) {
            prognosed = true;
            CHECK(e.detail == "increased_friction rul_h=1");
            CHECK(e.time_h == 2);
        }
    }
    CHECK(prognosed);

    const auto hadm = m.run_seeded(Strategy::hadm, {}, 1);
    CHECK(actions_of(hadm) == std::vector<std::string>{"drive(A->B)", "stop_and_cool_down", "drive(B->C)",
                                                       "stop_and_cool_down", "drive(C->wp2)", "data_collection"});
    CHECK(hadm.final_state.time_h == 9);
    CHECK(baseline.value() < hadm.value());
    CHECK(hadm.value() == 100);
    CHECK(m.fixed_plan().size() == 6);
}

TEST_CASE("hadm analytic value is the closed-loop value") {
    for (int n = 2; n <= rover::kBuiltinScenarioCount; ++n) {
        CAPTURE(n);
        const Mission m(rover::builtin_scenario(n));
        CHECK(*m.analytic_value(Strategy::hadm) ==
              doctest::Approx(core::closed_loop_value(m.compiled().problem(), m.compiled().root())).epsilon(1e-12));
    }
}

TEST_CASE("empirical means converge to analytic expectations") {
    constexpr std::size_t kRuns = 10000;
    for (int n = 2; n <= rover::kBuiltinScenarioCount; ++n) {
        const Mission m(rover::builtin_scenario(n));
        for (auto strategy : mission::kAllStrategies) {
            CAPTURE(n);
            CAPTURE(mission::to_string(strategy));
            const auto analytic = m.analytic_value(strategy);
            const auto summary = m.rollouts(strategy, {}, 20240, kRuns);
            CHECK(summary.runs == kRuns);
            if (!analytic) continue;
            CAPTURE(*analytic);
            CAPTURE(summary.mean);
            CAPTURE(summary.standard_error);
            CHECK(std::abs(summary.mean - *analytic) <= 3 * summary.standard_error + 1e-9);
        }
    }
}

TEST_CASE("rollouts are independent of thread count") {
    const Mission m(rover::builtin_scenario(2));
    const auto one = m.rollouts(Strategy::hadm, {}, 7, 200, 1);
    const auto many = m.rollouts(Strategy::hadm, {}, 7, 200, 8);
    CHECK(one.values == many.values);
    CHECK(one.outcomes == many.outcomes);
    CHECK(one.mean == many.mean);
    CHECK_THROWS_AS(m.rollouts(Strategy::hadm, {}, 7, 0), ConfigError);
    CHECK_THROWS_AS(m.run_seeded(Strategy::hadm, std::vector<std::string>{"terrain.nowhere=easy"}, 1), ConfigError);
}
