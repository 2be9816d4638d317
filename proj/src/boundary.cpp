#include "rkvi/boundary.hpp"

#include <cmath>
#include <string>

#include "rkvi/saddle.hpp"

namespace rkvi {

Bias Bias::make(double alpha_minus, double alpha_plus) {
  Bias b{alpha_minus, alpha_plus};
  b.validate();
  return b;
}

void Bias::validate() const {
  if (!(minus >= -1.0 && minus <= 0.0)) {
    throw ConfigError("alpha-minus", "must lie in [-1, 0], got " + std::to_string(minus));
  }
  if (!(plus >= 0.0 && plus <= 1.0)) {
    throw ConfigError("alpha-plus", "must lie in [0, 1], got " + std::to_string(plus));
  }
  if (std::abs(plus - minus - 1.0) > 1e-14) {
    throw ConfigError("alpha-plus", "alpha-plus - alpha-minus must equal 1, got " +
                                        std::to_string(plus - minus));
  }
}

LayerPair LayerPair::with_adjoint_backward(const ButcherTableau& tableau, int substeps) {
  Layer fwd;
  fwd.tableau = tableau;
  fwd.substeps = substeps;
  Layer bwd = fwd;
  bwd.adjoint = true;
  return {bwd, fwd};
}

namespace {

void check_step(double h) {
  if (h == 0.0 || !std::isfinite(h)) {
    throw ConfigError("h", "time step must be nonzero and finite");
  }
}

}  // namespace

BoundaryData boundary_data(const LayerPair& layers, const ProblemSpec& spec, const State& w,
                           double h, const Bias& bias) {
  check_step(h);
  const double tm = h * bias.minus;
  const double tp = h * bias.plus;
  const JetState jm = layers.for_time(tm).flow_jet(spec, w, tm);
  const JetState jp = layers.for_time(tp).flow_jet(spec, w, tp);
  BoundaryData out;
  out.hat_minus = jm.state.q;
  out.hat_plus = jp.state.q;
  out.lh = jp.state.action - jm.state.action;
  out.d_hat_minus = jm.dq();
  out.d_hat_plus = jp.dq();
  out.d_lh = jp.action_gradient - jm.action_gradient;
  return out;
}

BoundaryData boundary_data(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                           double h, const Bias& bias, int substeps) {
  Layer layer;
  layer.tableau = tableau;
  layer.substeps = substeps;
  return boundary_data(LayerPair::single(layer), spec, w, h, bias);
}

BoundaryValues boundary_values(const LayerPair& layers, const ProblemSpec& spec, const State& w,
                               double h, const Bias& bias) {
  check_step(h);
  const double tm = h * bias.minus;
  const double tp = h * bias.plus;
  const ExtendedState em = layers.for_time(tm).flow(spec, w, tm);
  const ExtendedState ep = layers.for_time(tp).flow(spec, w, tp);
  return {em.q, ep.q, ep.action - em.action};
}

Vec iota(const ProblemSpec& spec, const Vec& q, const Vec& theta) {
  require_size(q, spec.n, "iota q");
  require_size(theta, spec.d, "iota theta");
  return q + spec.d_constraint(q).transpose() * theta;
}

Vec fiber_coordinate(const ProblemSpec& spec, const Vec& q, const Vec& q_hat) {
  const Mat g = spec.d_constraint(q);
  return (g * g.transpose()).ldlt().solve(g * (q_hat - q));
}

namespace {

saddle::SaddleSystem projection_system(const ProblemSpec& spec, const Vec& q, const Vec& theta) {
  saddle::SaddleSystem sys;
  sys.top_block = Mat::Identity(spec.n, spec.n) + constraint_hessian(spec, q, theta);
  sys.coupling = spec.d_constraint(q);
  sys.layout = saddle::Layout::kPositiveCoupling;
  return sys;
}

}  // namespace

Projection project(const ProblemSpec& spec, const Vec& q_hat, const Vec& q_guess, double tol,
                   int max_iter) {
  require_size(q_hat, spec.n, "project q_hat");
  require_size(q_guess, spec.n, "project q_guess");
  const double scale = std::max(1.0, q_hat.lpNorm<Eigen::Infinity>());
  Projection p{q_guess, fiber_coordinate(spec, q_guess, q_hat), 0};
  bool polished = false;
  double norm = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vec f1 = iota(spec, p.q, p.theta) - q_hat;
    const Vec f2 = spec.constraint(p.q);
    norm = std::max(f1.lpNorm<Eigen::Infinity>() / scale, f2.lpNorm<Eigen::Infinity>());
    if (norm == 0.0 || (polished && norm <= tol)) {
      return p;
    }
    // One extra Newton step after reaching tol, so the result is smooth in q_hat.
    if (norm <= tol) {
      polished = true;
    }
    const saddle::SaddleFactorization fact(projection_system(spec, p.q, p.theta));
    const saddle::Solution s = fact.solve(Vec(-f1), Vec(-f2));
    p.q += s.x;
    p.theta += s.y;
    p.iterations = it + 1;
  }
  if (polished) {
    return p;
  }
  throw NonConvergence("projection onto the constraint did not converge", max_iter, norm);
}

saddle::SaddleFactorization dproject_factor(const ProblemSpec& spec, const Vec& q,
                                            const Vec& theta) {
  return saddle::SaddleFactorization(projection_system(spec, q, theta));
}

Vec dproject_transpose(const ProblemSpec& spec, const Vec& q, const Vec& theta, const Vec& lambda) {
  require_size(lambda, spec.n, "dproject_transpose lambda");
  const saddle::SaddleFactorization fact(projection_system(spec, q, theta));
  return fact.solve(lambda, Vec::Zero(spec.d)).x;
}

Mat dproject_matrix(const ProblemSpec& spec, const Vec& q, const Vec& theta) {
  const saddle::SaddleFactorization fact(projection_system(spec, q, theta));
  return fact.solve(Mat(Mat::Identity(spec.n, spec.n)), Mat(Mat::Zero(spec.d, spec.n))).x;
}

}  // namespace rkvi
