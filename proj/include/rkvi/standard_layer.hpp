#pragma once

#include <string>
#include <vector>

#include "rkvi/model.hpp"

namespace rkvi {

/// Explicit Runge-Kutta tableau.
struct ButcherTableau {
  std::string name;
  Mat stages;  ///< s x s, strictly lower triangular
  Vec weights;
  Vec nodes;
  int order = 1;

  Index stage_count() const { return weights.size(); }
  bool is_explicit() const;

  /// "euler", "midpoint", "heun" or "rk4"; throws ConfigError otherwise.
  static ButcherTableau by_name(const std::string& name);
  static std::vector<std::string> names();
};

/// (q, v, S) with S the accumulated action along the segment.
struct ExtendedState {
  Vec q;
  Vec v;
  double action = 0.0;

  State state() const { return {q, v}; }
};

/// ExtendedState plus its sensitivity to the initial (q, v):
/// `sensitivity` is d(q, v)/d(q0, v0) (2N x 2N), `action_gradient` is dS/d(q0, v0).
struct JetState {
  ExtendedState state;
  Mat sensitivity;
  Vec action_gradient;

  Index n() const { return state.q.size(); }
  auto dq() const { return sensitivity.topRows(n()); }
  auto dv() const { return sensitivity.bottomRows(n()); }
};

/// `substeps` equal steps of size t / substeps on dq = v, dv = A, dS = L,
/// starting from (q, v, 0). Negative t integrates backward.
ExtendedState rk_flow(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                      double t, int substeps = 1);

/// rk_flow together with the same tableau applied to the first-variation system.
JetState rk_flow_jet(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                     double t, int substeps = 1);

/// Adjoint method: returns w' with rk_flow(w', -t) = (q, v) and action equal to
/// minus the action of that reverse flow. Solved by Newton's method on the jet.
ExtendedState adjoint_flow(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                           double t, int substeps = 1, double tol = 1e-14, int max_iter = 30);

JetState adjoint_flow_jet(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                          double t, int substeps = 1, double tol = 1e-14, int max_iter = 30);

/// A standard layer: a tableau, optionally used through its adjoint.
struct Layer {
  ButcherTableau tableau = ButcherTableau::by_name("rk4");
  bool adjoint = false;
  int substeps = 1;
  double adjoint_tol = 1e-14;
  int adjoint_max_iter = 30;

  ExtendedState flow(const ProblemSpec& spec, const State& w, double t) const;
  JetState flow_jet(const ProblemSpec& spec, const State& w, double t) const;
};

}  // namespace rkvi
