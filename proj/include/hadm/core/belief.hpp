#pragma once

#include <span>
#include <vector>

#include "hadm/core/ids.hpp"
#include "hadm/core/problem.hpp"

namespace hadm::core {

/// Dense probability vector over a problem's states.
class Belief {
public:
    /// Validates nonnegativity and unit mass (within kProbabilityTolerance).
    explicit Belief(std::vector<double> probabilities);

    static Belief point_mass(std::size_t state_count, StateId s);
    static Belief uniform(std::size_t state_count);
    static Belief uniform_over(std::size_t state_count, std::span<const StateId> support);

    std::size_t size() const { return p_.size(); }
    double operator[](StateId s) const { return p_.at(s.value); }
    std::span<const double> probabilities() const { return p_; }

    double mass(std::span<const StateId> states) const;
    double terminal_mass(const Problem& problem) const;
    /// Highest-probability state; ties go to the lowest index.
    StateId most_likely() const;
    std::vector<StateId> support() const;

private:
    std::vector<double> p_;
};

/// Predicted successor distribution sum_s T(s,a,s') b(s). Terminal states in the
/// support self-loop regardless of `a`.
std::vector<double> predict(const Problem& problem, const Belief& b, ActionId a);

/// P(o | b, a).
double observation_likelihood(const Problem& problem, const Belief& b, ActionId a, ObservationId o);

/// b'(s') ∝ O(s',a,o) sum_s T(s,a,s') b(s). Throws ImpossibleObservationError
/// when the normalizer is zero and DomainError when `a` is inadmissible in a
/// non-terminal state carrying mass.
Belief belief_update(const Problem& problem, const Belief& b, ActionId a, ObservationId o);

}  // namespace hadm::core
