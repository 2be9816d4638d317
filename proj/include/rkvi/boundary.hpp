#pragma once

#include "rkvi/saddle.hpp"
#include "rkvi/standard_layer.hpp"

namespace rkvi {

/// Backward/forward fractions of a step, alpha_plus - alpha_minus = 1.
struct Bias {
  double minus = -0.5;
  double plus = 0.5;

  /// Throws ConfigError unless alpha_minus is in [-1, 0], alpha_plus in [0, 1]
  /// and their difference is 1.
  static Bias make(double alpha_minus, double alpha_plus);
  void validate() const;
};

/// The layers used for negative and positive integration times. Boundary maps
/// at time t use `backward` when t < 0 and `forward` otherwise, so that a
/// negative step runs the same curve segments in reverse.
struct LayerPair {
  Layer backward;
  Layer forward;

  const Layer& for_time(double t) const { return t < 0.0 ? backward : forward; }

  static LayerPair single(const Layer& layer) { return {layer, layer}; }
  /// forward = tableau, backward = its adjoint.
  static LayerPair with_adjoint_backward(const ButcherTableau& tableau, int substeps = 1);
};

struct BoundaryData {
  Vec hat_minus;
  Vec hat_plus;
  double lh = 0.0;
  Mat d_hat_minus;  ///< N x 2N
  Mat d_hat_plus;   ///< N x 2N
  Vec d_lh;         ///< 2N

  Index n() const { return hat_minus.size(); }
  auto dq_hat_minus() const { return d_hat_minus.leftCols(n()); }
  auto dv_hat_minus() const { return d_hat_minus.rightCols(n()); }
  auto dq_hat_plus() const { return d_hat_plus.leftCols(n()); }
  auto dv_hat_plus() const { return d_hat_plus.rightCols(n()); }
  auto dq_lh() const { return d_lh.head(n()); }
  auto dv_lh() const { return d_lh.tail(n()); }
};

/// Boundary maps and discrete Lagrangian without derivatives.
struct BoundaryValues {
  Vec hat_minus;
  Vec hat_plus;
  double lh = 0.0;
};

BoundaryData boundary_data(const LayerPair& layers, const ProblemSpec& spec, const State& w,
                           double h, const Bias& bias);
BoundaryData boundary_data(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                           double h, const Bias& bias, int substeps = 1);
BoundaryValues boundary_values(const LayerPair& layers, const ProblemSpec& spec, const State& w,
                               double h, const Bias& bias);

/// iota(q, theta) = q + Dg(q)^T theta.
Vec iota(const ProblemSpec& spec, const Vec& q, const Vec& theta);

struct Projection {
  Vec q;
  Vec theta;
  int iterations = 0;
};

/// Finds (q, theta) with q_hat = iota(q, theta) and g(q) = 0 by Newton's method
/// seeded at q_guess.
Projection project(const ProblemSpec& spec, const Vec& q_hat, const Vec& q_guess,
                   double tol = 1e-13, int max_iter = 50);
inline Projection project(const ProblemSpec& spec, const Vec& q_hat) {
  return project(spec, q_hat, q_hat);
}

/// Least-squares theta with q_hat - q ~ Dg(q)^T theta.
Vec fiber_coordinate(const ProblemSpec& spec, const Vec& q, const Vec& q_hat);

/// lambda_hat = DP^T lambda at the projection pair (q, theta). DP is symmetric,
/// so this also applies DP to a vector.
Vec dproject_transpose(const ProblemSpec& spec, const Vec& q, const Vec& theta, const Vec& lambda);

/// The factored projection-derivative matrix [[I + D^2(theta^T g), Dg^T], [Dg, 0]]
/// at (q, theta); the x-part of solve(lambda, 0) is DP^T lambda.
saddle::SaddleFactorization dproject_factor(const ProblemSpec& spec, const Vec& q, const Vec& theta);

/// DP as a dense N x N matrix.
Mat dproject_matrix(const ProblemSpec& spec, const Vec& q, const Vec& theta);

}  // namespace rkvi
