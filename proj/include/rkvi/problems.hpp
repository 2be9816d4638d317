#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rkvi/geometry.hpp"

namespace rkvi {

struct NamedProblem {
  std::string name;
  std::string description;
  ProblemSpec spec;
  State default_state;
  /// Rest state, when the problem has one.
  std::optional<State> equilibrium;
  GroupActionSpec symmetries;
};

/// circle, sphere-pendulum, double-sphere-pendulum, magnetic-sphere,
/// curved-mass-circle, quartic-curve. All derivatives are analytic.
const std::vector<NamedProblem>& catalog();

/// Throws ConfigError("problem", ...) for unknown names.
const NamedProblem& find_problem(const std::string& name);

std::vector<std::string> problem_names();

/// RK4 with T / fine_h substeps, then projection of q onto the constraint and
/// of v onto its tangent space. The step count is rounded up so that the
/// substep never exceeds fine_h.
State reference_solution(const ProblemSpec& spec, const State& w0, double t_final, double fine_h);

}  // namespace rkvi
