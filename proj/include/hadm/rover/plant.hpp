#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hadm/core/ids.hpp"
#include "hadm/rover/model.hpp"
#include "hadm/shm/shm.hpp"

namespace hadm::rover {

/// Hidden assignment of every random variable of a scenario: the terrain class
/// of each uncertain region and whether each redo-prone activity needs a redo.
struct GroundTruth {
    std::map<std::string, std::string> values;

    bool consistent(std::span<const Reveal> reveals) const;
    /// "terrain.left=difficult, redo.science=true".
    std::string describe() const;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Declared random variables and their positive-probability values, in
/// scenario order.
std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> random_variables(const ScenarioSpec& spec);

/// Draws every variable in declaration order with one uniform draw each.
GroundTruth sample_ground_truth(const ScenarioSpec& spec, std::mt19937_64& rng);

/// All assignments with their prior probabilities.
std::vector<std::pair<GroundTruth, double>> enumerate_ground_truths(const ScenarioSpec& spec);

/// Applies "var=value". Accepted forms: terrain.<region>=<class>,
/// redo.<activity>=true|false, terrain=<class>-both (every uncertain region),
/// redo=true|false (every redo-prone activity). Throws ConfigError for
/// undeclared variables or values outside their support.
void apply_override(const ScenarioSpec& spec, GroundTruth& truth, std::string_view assignment);
void apply_overrides(const ScenarioSpec& spec, GroundTruth& truth, std::span<const std::string> assignments);

/// Ground-truth simulator over a compiled scenario: each step takes the one
/// outcome consistent with the hidden assignment.
class Plant {
public:
    Plant(const CompiledScenario& compiled, GroundTruth truth);

    struct Step {
        core::StateId next;
        shm::SensorObservation observation;
        double reward = 0.0;
    };

    /// Throws DomainError for an inadmissible action and
    /// ModelInconsistencyError when no outcome matches the ground truth.
    Step step(core::ActionId a);

    core::StateId state() const { return state_; }
    const RoverState& rover() const { return compiled_->rover(state_); }
    shm::SensorObservation observe() const;
    bool terminal() const { return compiled_->problem().is_terminal(state_); }
    const GroundTruth& truth() const { return truth_; }
    const CompiledScenario& compiled() const { return *compiled_; }

private:
    const CompiledScenario* compiled_;
    GroundTruth truth_;
    core::StateId state_;
};

}  // namespace hadm::rover
