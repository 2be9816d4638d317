#include "rkvi/geometry.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace rkvi {
namespace {

// Orthonormal basis of ker(a); throws RankLoss unless it has `expected` columns.
Mat null_space(const Mat& a, Index expected, const char* what, double rel_tol = 1e-8) {
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  Index rank = 0;
  const double top = s.size() > 0 ? s(0) : 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * top && top > 0.0) {
      ++rank;
    }
  }
  const Index dim = a.cols() - rank;
  if (dim != expected) {
    throw RankLoss(std::string(what) + ": kernel has dimension " + std::to_string(dim) +
                   ", expected " + std::to_string(expected));
  }
  return svd.matrixV().rightCols(dim);
}

Vec stack(const TangentVector& dw) {
  Vec out(dw.dq.size() + dw.dv.size());
  out << dw.dq, dw.dv;
  return out;
}

Mat projected_boundary_derivative(const ProblemSpec& spec, const StepConfig& config,
                                  const Vec& hat, const Mat& d_hat, const Vec& seed) {
  const Projection p = project(spec, hat, seed, config.tol_projection);
  return dproject_matrix(spec, p.q, p.theta) * d_hat;
}

// theta-(w) applied to each column of `vectors`.
Vec one_form_columns(const VariationBasis& vb, const Mat& vectors) {
  Mat both(vb.plus.rows(), vb.plus.cols() + vb.minus.cols());
  both << vb.plus, vb.minus;
  const Mat coeffs = both.colPivHouseholderQr().solve(vectors);
  const Mat minus_part = vb.minus * coeffs.bottomRows(vb.minus.cols());
  return -(minus_part.transpose() * vb.d_lh);
}

Mat two_form_in_chart(const ProblemSpec& spec, const StepConfig& config, const TangentChart& chart,
                      double fd_step) {
  const Index k = chart.dim();
  auto alpha = [&](const Vec& s) {
    const State w = chart.point(s);
    return one_form_columns(variation_basis(spec, config, w), chart.jacobian(s));
  };
  Mat grad(k, k);  // grad(i, j) = d alpha_j / d s_i
  for (Index i = 0; i < k; ++i) {
    Vec e = Vec::Zero(k);
    e(i) = fd_step;
    grad.row(i) = ((alpha(e) - alpha(-e)) / (2.0 * fd_step)).transpose();
  }
  return -(grad - grad.transpose());
}

}  // namespace

std::pair<Vec, Vec> VariationBasis::split(const Vec& dw) const {
  Mat both(plus.rows(), plus.cols() + minus.cols());
  both << plus, minus;
  const Vec c = both.colPivHouseholderQr().solve(dw);
  return {c.head(plus.cols()), c.tail(minus.cols())};
}

VariationBasis variation_basis(const ProblemSpec& spec, const StepConfig& config, const State& w) {
  const Index n = spec.n;
  const Index d = spec.d;
  VariationBasis vb;
  vb.w = w;

  Mat c = Mat::Zero(2 * d, 2 * n);
  const Mat g = spec.d_constraint(w.q);
  c.topLeftCorner(d, n) = g;
  c.bottomLeftCorner(d, n) = spec.d2_constraint_contract(w.q, w.v);
  c.bottomRightCorner(d, n) = g;
  vb.tangent = null_space(c, 2 * (n - d), "tangent space of TQ", 1e-10);

  const BoundaryData bd = boundary_data(config.layers(), spec, w, config.h, config.bias);
  vb.d_minus = projected_boundary_derivative(spec, config, bd.hat_minus, bd.d_hat_minus, w.q);
  vb.d_plus = projected_boundary_derivative(spec, config, bd.hat_plus, bd.d_hat_plus, w.q);
  vb.d_lh = bd.d_lh;

  vb.plus = vb.tangent * null_space(vb.d_minus * vb.tangent, n - d, "ker D(d-) in TTQ");
  vb.minus = vb.tangent * null_space(vb.d_plus * vb.tangent, n - d, "ker D(d+) in TTQ");

  Mat both(2 * n, 2 * (n - d));
  both << vb.plus, vb.minus;
  const Vec s = both.jacobiSvd().singularValues();
  if (s.size() > 0 && s(s.size() - 1) <= 1e-8 * s(0)) {
    throw RankLoss("splitting sub-bases are not complementary");
  }
  return vb;
}

double one_form(const ProblemSpec& spec, const StepConfig& config, const State& w,
                const TangentVector& dw) {
  const VariationBasis vb = variation_basis(spec, config, w);
  return one_form_columns(vb, stack(dw))(0);
}

// ---------------------------------------------------------------------------

TangentChart::TangentChart(const ProblemSpec& spec, const State& base, double tol_projection)
    : spec_(&spec), base_(base), tol_(tol_projection) {
  u_ = null_space(spec.d_constraint(base.q), spec.n - spec.d, "tangent space of Q", 1e-10);
}

State TangentChart::point(const Vec& s) const {
  const Index k = u_.cols();
  const Vec q = project(*spec_, base_.q + u_ * s.head(k), base_.q, tol_).q;
  const Vec v = tangential_projection(*spec_, q, base_.v + u_ * s.tail(k));
  return {q, v};
}

Mat TangentChart::jacobian(const Vec& s) const {
  const ProblemSpec& spec = *spec_;
  const Index n = spec.n;
  const Index k = u_.cols();
  const Projection p = project(spec, base_.q + u_ * s.head(k), base_.q, tol_);
  const Vec vt = base_.v + u_ * s.tail(k);
  const Mat g = spec.d_constraint(p.q);
  const Eigen::LDLT<Mat> ggt((g * g.transpose()).eval());
  const Vec y = ggt.solve(g * vt);
  const Vec pv = vt - g.transpose() * y;

  Mat jac = Mat::Zero(2 * n, 2 * k);
  const Mat dq = dproject_matrix(spec, p.q, p.theta) * u_;
  jac.topLeftCorner(n, k) = dq;
  for (Index j = 0; j < k; ++j) {
    const Mat gp = spec.d2_constraint_contract(p.q, dq.col(j));
    const Vec dy = ggt.solve(gp * pv - g * (gp.transpose() * y));
    jac.block(n, j, n, 1) = -gp.transpose() * y - g.transpose() * dy;
  }
  jac.bottomRightCorner(n, k) = u_ - g.transpose() * ggt.solve(g * u_);
  return jac;
}

Vec TangentChart::coordinates(const TangentVector& dw) const {
  Vec c(dim());
  c << u_.transpose() * dw.dq, u_.transpose() * dw.dv;
  return c;
}

Vec TangentChart::local_coordinates(const State& w) const {
  return coordinates({w.q - base_.q, w.v - base_.v});
}

Mat two_form_matrix(const ProblemSpec& spec, const StepConfig& config, const State& w,
                    double fd_step) {
  return two_form_in_chart(spec, config, TangentChart(spec, w, config.tol_projection), fd_step);
}

double two_form(const ProblemSpec& spec, const StepConfig& config, const State& w,
                const TangentVector& d1, const TangentVector& d2, double fd_step) {
  const TangentChart chart(spec, w, config.tol_projection);
  const Mat omega = two_form_in_chart(spec, config, chart, fd_step);
  return chart.coordinates(d1).dot(omega * chart.coordinates(d2));
}

double symplecticity_defect(const ProblemSpec& spec, const StepConfig& config, const StateMap& map,
                            const State& w1, double fd_step) {
  const TangentChart chart1(spec, w1, config.tol_projection);
  const State w2 = map(w1);
  const TangentChart chart2(spec, w2, config.tol_projection);
  const Index k = chart1.dim();
  Mat df(k, k);
  for (Index i = 0; i < k; ++i) {
    Vec e = Vec::Zero(k);
    e(i) = fd_step;
    const Vec cp = chart2.local_coordinates(map(chart1.point(e)));
    const Vec cm = chart2.local_coordinates(map(chart1.point(-e)));
    df.col(i) = (cp - cm) / (2.0 * fd_step);
  }
  const Mat omega1 = two_form_in_chart(spec, config, chart1, fd_step);
  const Mat omega2 = two_form_in_chart(spec, config, chart2, fd_step);
  return (df.transpose() * omega2 * df - omega1).cwiseAbs().maxCoeff();
}

double symplecticity_defect(const ProblemSpec& spec, const StepConfig& config, const State& w1,
                            double fd_step) {
  const StateMap map = [&](const State& w) { return step(spec, config, w).w2; };
  return symplecticity_defect(spec, config, map, w1, fd_step);
}

StateMap raw_layer_map(const ProblemSpec& spec, const StepConfig& config) {
  const LayerPair layers = config.layers();
  return [spec, config, layers](const State& w) {
    const ExtendedState r = layers.for_time(config.h).flow(spec, w, config.h);
    const Vec q = project(spec, r.q, w.q, config.tol_projection).q;
    return State{q, tangential_projection(spec, q, r.v)};
  };
}

// ---------------------------------------------------------------------------

TangentVector GroupActionSpec::infinitesimal(std::size_t index, const State& w) const {
  if (index >= generators.size()) {
    throw ConfigError("generator", "index " + std::to_string(index) + " out of range");
  }
  const Mat& xi = generators[index].matrix;
  return {xi * w.q, xi * w.v};
}

double discrete_momentum(const ProblemSpec& spec, const StepConfig& config, const State& w,
                         const GroupActionSpec& action, std::size_t index, double tol) {
  const TangentVector xw = action.infinitesimal(index, w);
  const double normal = (spec.d_constraint(w.q) * xw.dq).lpNorm<Eigen::Infinity>();
  if (normal > tol) {
    throw GeneratorNotTangent("generator '" + action.generators[index].name +
                              "' is not tangent to the constraint (|Dg xi q| = " +
                              std::to_string(normal) + ")");
  }
  return -one_form(spec, config, w, xw);
}

double equivariance_error(const ProblemSpec& spec, const StepConfig& config, const State& w,
                          const GroupActionSpec& action, std::size_t index, double eps) {
  if (index >= action.generators.size()) {
    throw ConfigError("generator", "index " + std::to_string(index) + " out of range");
  }
  const Mat e = (eps * action.generators[index].matrix).exp();
  const LayerPair layers = config.layers();
  auto projected = [&](const State& x) {
    const BoundaryValues b = boundary_values(layers, spec, x, config.h, config.bias);
    return std::pair<Vec, Vec>{project(spec, b.hat_minus, x.q, config.tol_projection).q,
                               project(spec, b.hat_plus, x.q, config.tol_projection).q};
  };
  const auto base = projected(w);
  const auto moved = projected({e * w.q, e * w.v});
  return std::max((moved.first - e * base.first).lpNorm<Eigen::Infinity>(),
                  (moved.second - e * base.second).lpNorm<Eigen::Infinity>());
}

DelCheck del_residual_check(const ProblemSpec& spec, const StepConfig& config, const State& w1,
                            const State& w2) {
  const VariationBasis vb1 = variation_basis(spec, config, w1);
  const VariationBasis vb2 = variation_basis(spec, config, w2);
  const Mat match = vb2.d_minus * vb2.minus;
  const auto qr = match.colPivHouseholderQr();
  double worst = 0.0;
  for (Index j = 0; j < vb1.plus.cols(); ++j) {
    const Vec d1 = vb1.plus.col(j);
    const Vec d2 = vb2.minus * qr.solve(Vec(vb1.d_plus * d1));
    worst = std::max(worst, std::abs(vb1.d_lh.dot(d1) + vb2.d_lh.dot(d2)));
  }
  const double scale = std::max({vb1.d_lh.lpNorm<Eigen::Infinity>(),
                                 vb2.d_lh.lpNorm<Eigen::Infinity>(), 1e-300});

  const LayerPair layers = config.layers();
  const BoundaryValues b1 = boundary_values(layers, spec, w1, config.h, config.bias);
  const BoundaryValues b2 = boundary_values(layers, spec, w2, config.h, config.bias);
  const Vec p1 = project(spec, b1.hat_plus, w1.q, config.tol_projection).q;
  const Vec p2 = project(spec, b2.hat_minus, w2.q, config.tol_projection).q;
  return {worst / scale, (p1 - p2).lpNorm<Eigen::Infinity>()};
}

double energy(const ProblemSpec& spec, const State& w) {
  return 0.5 * w.v.dot(spec.mass(w.q) * w.v) + spec.potential(w.q);
}

}  // namespace rkvi
