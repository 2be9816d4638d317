#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rkvi/boundary.hpp"

namespace rkvi {

/// Which linearization of the q2 equation the approximate system uses.
/// kAsPrinted uses + h alpha_plus v2; kAlphaCorrected uses + h alpha_minus v2,
/// the first-order expansion of the backward boundary map at w2.
enum class ApproximateVariant { kAsPrinted, kAlphaCorrected };

/// Configuration supplying the frozen Dg, mass and one-form of the approximate.
enum class FreezePoint { kQ1, kQBar };

ApproximateVariant parse_variant(const std::string& name);
std::string to_string(ApproximateVariant variant);
FreezePoint parse_freeze_point(const std::string& name);

struct StepConfig {
  double h = 0.01;
  Bias bias;
  std::string tableau = "rk4";
  /// Use the adjoint of `tableau` for negative integration times.
  bool adjoint_backward = false;
  int substeps = 1;
  double tol_fixed_point = 1e-12;
  int max_iter = 50;
  FreezePoint freeze_point = FreezePoint::kQ1;
  ApproximateVariant variant = ApproximateVariant::kAlphaCorrected;
  double tol_constraint = 1e-10;
  double tol_projection = 1e-13;

  /// Throws ConfigError on invalid values. Negative h is accepted and runs the
  /// step backward in time.
  void validate() const;
  LayerPair layers() const;
};

/// Unknowns of the step equations. Covectors are stored as column vectors.
struct Stage4Variables {
  Vec q2, v2;
  Vec q1_minus, q_bar, q2_plus;
  Vec theta_plus;
  Vec lambda_minus, lambda_plus, mu;
  Vec lambda_hat_minus, lambda_hat_plus, mu_hat_1, mu_hat_2;
  Vec nu1_minus, nu2_minus, nu1_plus, nu2_plus;

  static Stage4Variables zeros(Index n, Index d);
  static Index size(Index n, Index d) { return 12 * n + 5 * d; }
  Vec flatten() const;
  static Stage4Variables unflatten(const Vec& x, Index n, Index d);
  State w2() const { return {q2, v2}; }
};

/// One block per equation group; total length 12N + 5d.
struct Stage4Residual {
  Vec s1, s2;
  Vec s3a, s3b, s3c;
  Vec s4a, s4b, s4c;
  Vec s5a, s5b, s5c;
  Vec s6a, s6b, s6c;
  Vec s7a, s7b;
  Vec s8;

  static Stage4Residual zeros(Index n, Index d);
  Vec flatten() const;
  static Stage4Residual unflatten(const Vec& x, Index n, Index d);
  double max_norm() const;
  std::vector<std::pair<std::string, double>> block_norms() const;
};

/// The full nonlinear step equations at fixed w1. Data that depend only on w1
/// (boundary maps, their projections and derivatives) are computed once.
class Stage4System {
 public:
  Stage4System(const ProblemSpec& spec, const StepConfig& config, const State& w1);
  ~Stage4System();
  Stage4System(Stage4System&&) noexcept;

  Stage4Residual residual(const Stage4Variables& vars) const;
  /// Seed: forward flow projected to TQ, hat maps projected, multipliers by
  /// least squares on the residual with the configurations held fixed.
  Stage4Variables initialize() const;
  /// Least-squares multipliers for the configurations and velocities in vars.
  Stage4Variables fit_multipliers(const Stage4Variables& vars) const;

  const ProblemSpec& spec() const;
  const StepConfig& config() const;
  const State& w1() const;
  const BoundaryData& w1_boundary() const;
  /// Projection of the forward hat map at w1.
  const Projection& q_bar_projection() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Stage4Residual residual(const ProblemSpec& spec, const StepConfig& config, const State& w1,
                        const Stage4Variables& vars);
Stage4Variables initialize(const ProblemSpec& spec, const StepConfig& config, const State& w1);

/// The linear approximate system with frozen G0, M0, a0. Building it factors
/// one identity-type and one mass-type saddle matrix; apply/solve reuse them.
class ApproximateSystem {
 public:
  ApproximateSystem(const ProblemSpec& spec, const StepConfig& config, const State& w1);

  /// Linear part of the approximate equations applied to vars.
  Stage4Residual apply(const Stage4Variables& vars) const;
  /// Inverse of apply.
  Stage4Variables solve(const Stage4Residual& rhs) const;

  const Mat& g0() const { return g0_; }
  const Mat& m0() const { return m0_; }
  const Vec& a0() const { return a0_; }
  const Mat& c1() const { return c1_; }

 private:
  ApproximateSystem(const ProblemSpec& spec, const StepConfig& config, const State& w1,
                    const Vec& freeze_q);
  Vec dp0(const Vec& lambda) const;

  Index n_, d_;
  double h_;
  Bias bias_;
  ApproximateVariant variant_;
  Mat g0_, m0_, c1_;
  Vec a0_;
  saddle::SaddleFactorization identity_fact_;
  saddle::SaddleFactorization mass_fact_;
};

Stage4Residual approximate_apply(const ProblemSpec& spec, const StepConfig& config,
                                 const Stage4Variables& vars, const State& w1);
Stage4Variables approximate_solve(const ProblemSpec& spec, const StepConfig& config,
                                  const Stage4Residual& rhs, const State& w1);

struct StepDiagnostics {
  int iterations = 0;
  std::vector<double> update_norms;    ///< (q2, v2) update per iteration
  std::vector<double> residual_norms;  ///< full residual before each update
  std::vector<std::pair<std::string, double>> final_residual;
  double final_residual_norm = 0.0;
  double constraint_violation = 0.0;  ///< ||g(q2)||_inf
  double velocity_violation = 0.0;    ///< ||Dg(q2) v2||_inf
  /// Forces of constraint Dg^T nu for nu1-, nu2- (at q1) and nu1+, nu2+ (at q2).
  std::vector<Vec> constraint_forces;
  std::size_t factorizations = 0;
  Stage4Variables variables;
};

struct StepResult {
  State w2;
  StepDiagnostics diagnostics;
};

/// One step of the variational integrator by the fixed-point iteration
/// r0 = f0(x0), r_{i+1} = r_i - f(x_i), f0(x_{i+1}) = r_{i+1}.
StepResult step(const ProblemSpec& spec, const StepConfig& config, const State& w1);

struct Trajectory {
  std::vector<State> states;
  std::vector<StepDiagnostics> diagnostics;
  /// Set when a step failed; states holds everything computed before it.
  std::optional<std::string> error;
  bool complete() const { return !error.has_value(); }
};

/// n_steps applications of step. Stops at the first NonConvergence or
/// SingularSystem and reports it in Trajectory::error. `keep_diagnostics`
/// false stores only iteration counts and residuals to save memory.
Trajectory simulate(const ProblemSpec& spec, const StepConfig& config, const State& w0,
                    int n_steps, bool keep_diagnostics = true);

}  // namespace rkvi
