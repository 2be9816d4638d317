#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "rkvi/problems.hpp"

namespace rkvi::test {

inline Vec vec(std::initializer_list<double> values) {
  Vec out(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) {
    out(i++) = x;
  }
  return out;
}

template <class Derived>
double inf_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Vec stack(const State& w) {
  Vec x(w.q.size() + w.v.size());
  x << w.q, w.v;
  return x;
}

inline State unstack(const Vec& x) {
  const Index n = x.size() / 2;
  return {x.head(n), x.tail(n)};
}

inline Mat random_matrix(std::mt19937& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = u(rng);
    }
  }
  return m;
}

inline Vec random_vector(std::mt19937& rng, Index n) { return random_matrix(rng, n, 1); }

/// Fourth-order central difference of a vector function: columns are d f / d x_j.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double step) {
  const Vec f0 = f(x);
  Mat jac(f0.size(), x.size());
  for (Index j = 0; j < x.size(); ++j) {
    auto at = [&](double s) {
      Vec y = x;
      y(j) += s;
      return f(y);
    };
    jac.col(j) = (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step);
  }
  return jac;
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double step) {
  return fd_jacobian([&](const Vec& y) { return Vec::Constant(1, f(y)); }, x, step).transpose();
}

/// Random smooth problem with quadratic mass, one-form and constraints, all
/// derivatives analytic, and a base state on TQ. Used for property tests.
struct RandomProblem {
  ProblemSpec spec;
  State state;
};

inline RandomProblem random_problem(std::mt19937& rng, Index n, Index d) {
  const Mat a = random_matrix(rng, n, n);
  const Mat s0 = a * a.transpose() + 2.0 * Mat::Identity(n, n);
  std::vector<Mat> s1;
  for (Index k = 0; k < n; ++k) {
    const Mat b = random_matrix(rng, n, n);
    s1.push_back(0.2 * (b + b.transpose()));
  }
  const Mat b2 = random_matrix(rng, n, n);
  const Mat s2 = 0.1 * (b2 + b2.transpose());
  const Vec a0 = random_vector(rng, n);
  const Mat a1 = random_matrix(rng, n, n);
  const Vec ac = 0.3 * random_vector(rng, n);
  const Mat p = random_matrix(rng, n, n);
  const Mat pot = p + p.transpose();
  const Vec lin = random_vector(rng, n);
  std::vector<Mat> qa;
  for (Index i = 0; i < d; ++i) {
    const Mat c = random_matrix(rng, n, n);
    qa.push_back(c + c.transpose() + 2.0 * Mat::Identity(n, n));
  }
  const Mat r = random_matrix(rng, d, n);
  const Vec q0 = 0.5 * random_vector(rng, n);
  Vec offset(d);
  for (Index i = 0; i < d; ++i) {
    offset(i) = 0.5 * q0.dot(qa[i] * q0) + r.row(i).dot(q0);
  }

  ProblemSpec s;
  s.n = n;
  s.d = d;
  s.mass = [=](const Vec& q) {
    Mat m = s0 + q.squaredNorm() * s2;
    for (Index k = 0; k < n; ++k) {
      m += q(k) * s1[k];
    }
    return m;
  };
  s.d_mass = [=](const Vec& q) {
    std::vector<Mat> dm;
    for (Index k = 0; k < n; ++k) {
      dm.push_back(s1[k] + 2.0 * q(k) * s2);
    }
    return dm;
  };
  s.d2_mass = [=](const Vec&) {
    std::vector<std::vector<Mat>> d2(n, std::vector<Mat>(n, Mat::Zero(n, n)));
    for (Index k = 0; k < n; ++k) {
      d2[k][k] = 2.0 * s2;
    }
    return d2;
  };
  s.one_form = [=](const Vec& q) { return Vec(a0 + a1 * q + q.squaredNorm() * ac); };
  s.d_one_form = [=](const Vec& q) { return Mat(a1 + 2.0 * ac * q.transpose()); };
  s.d2_one_form = [=](const Vec&) {
    std::vector<Mat> d2;
    for (Index k = 0; k < n; ++k) {
      Mat m = Mat::Zero(n, n);
      m.col(k) = 2.0 * ac;
      d2.push_back(m);
    }
    return d2;
  };
  s.potential = [=](const Vec& q) { return 0.5 * q.dot(pot * q) + lin.dot(q); };
  s.d_potential = [=](const Vec& q) { return Vec(pot * q + lin); };
  s.d2_potential = [=](const Vec&) { return pot; };
  s.constraint = [=](const Vec& q) {
    Vec g(d);
    for (Index i = 0; i < d; ++i) {
      g(i) = 0.5 * q.dot(qa[i] * q) + r.row(i).dot(q) - offset(i);
    }
    return g;
  };
  s.d_constraint = [=](const Vec& q) {
    Mat g(d, n);
    for (Index i = 0; i < d; ++i) {
      g.row(i) = (qa[i] * q).transpose() + r.row(i);
    }
    return g;
  };
  s.d2_constraint_contract = [=](const Vec&, const Vec& u) {
    Mat h(d, n);
    for (Index i = 0; i < d; ++i) {
      h.row(i) = (qa[i] * u).transpose();
    }
    return h;
  };
  s.d3_constraint_contract = [=](const Vec&, const Vec&, const Vec&) { return Mat(Mat::Zero(d, n)); };

  const Vec v0 = tangential_projection(s, q0, random_vector(rng, n));
  return {s, {q0, v0}};
}

/// Rotation of q0, v0 about the origin by angle |v0| t (closed-form circle motion).
inline State circle_exact(const State& w0, double t) {
  const double angle = w0.v.norm() * t;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat r(2, 2);
  r << c, -s, s, c;
  return {r * w0.q, r * w0.v};
}

/// Independent reference for one step: Gauss-Newton on the multiplier system
///   DL_h(w1) = lm D d-(w1) + mu D d+(w1) + nu1m [Dg(q1), 0] + nu2m [v1 D2g(q1), Dg(q1)]
///   DL_h(w2) = lp D d+(w2) - mu D d-(w2) + nu1p [Dg(q2), 0] + nu2p [v2 D2g(q2), Dg(q2)]
///   d+(w1) = d-(w2),  lm Dg(d-(w1)) = 0, mu Dg(d+(w1)) = 0, lp Dg(d+(w2)) = 0,
///   g(q2) = 0, Dg(q2) v2 = 0,
/// where d+- = P o hat-d+- and every derivative of d+- and L_h is a finite difference.
struct DenseOracleResult {
  State w2;
  int iterations = 0;
  double residual = 0.0;
};

inline DenseOracleResult dense_multiplier_oracle(const ProblemSpec& spec, const StepConfig& config,
                                             const State& w1, const State& seed,
                                             double fd_step = 1e-3, int max_iter = 30) {
  const Index n = spec.n;
  const Index d = spec.d;
  const LayerPair layers = config.layers();

  auto boundary = [&](const Vec& x, bool plus) -> Vec {
    const BoundaryValues b = boundary_values(layers, spec, unstack(x), config.h, config.bias);
    const Vec& hat = plus ? b.hat_plus : b.hat_minus;
    return project(spec, hat, x.head(n), 1e-15).q;
  };
  auto action = [&](const Vec& x) {
    return boundary_values(layers, spec, unstack(x), config.h, config.bias).lh;
  };

  const Vec x1 = stack(w1);
  const Mat dm1 = fd_jacobian([&](const Vec& x) { return boundary(x, false); }, x1, fd_step);
  const Mat dp1 = fd_jacobian([&](const Vec& x) { return boundary(x, true); }, x1, fd_step);
  const Vec dl1 = fd_gradient(action, x1, fd_step);
  const Vec q1m = boundary(x1, false);
  const Vec q_bar = boundary(x1, true);
  const Mat g1 = spec.d_constraint(w1.q);
  const Mat c1 = spec.d2_constraint_contract(w1.q, w1.v);

  // Unknowns: q2, v2, lm, mu, lp (N each), nu1m, nu2m, nu1p, nu2p (d each).
  auto equations = [&](const Vec& z) {
    const Vec x2 = z.head(2 * n);
    const Vec q2 = z.segment(0, n);
    const Vec v2 = z.segment(n, n);
    const Vec lm = z.segment(2 * n, n);
    const Vec mu = z.segment(3 * n, n);
    const Vec lp = z.segment(4 * n, n);
    const Vec nu1m = z.segment(5 * n, d);
    const Vec nu2m = z.segment(5 * n + d, d);
    const Vec nu1p = z.segment(5 * n + 2 * d, d);
    const Vec nu2p = z.segment(5 * n + 3 * d, d);

    const Mat dm2 = fd_jacobian([&](const Vec& x) { return boundary(x, false); }, x2, fd_step);
    const Mat dp2 = fd_jacobian([&](const Vec& x) { return boundary(x, true); }, x2, fd_step);
    const Vec dl2 = fd_gradient(action, x2, fd_step);
    const Mat g2 = spec.d_constraint(q2);
    const Mat c2 = spec.d2_constraint_contract(q2, v2);

    Vec e(5 * n + 5 * d);
    Index row = 0;
    Vec s1 = dl1 - dm1.transpose() * lm - dp1.transpose() * mu;
    s1.head(n) -= g1.transpose() * nu1m + c1.transpose() * nu2m;
    s1.tail(n) -= g1.transpose() * nu2m;
    e.segment(row, 2 * n) = s1;
    row += 2 * n;
    Vec s2 = dl2 - dp2.transpose() * lp + dm2.transpose() * mu;
    s2.head(n) -= g2.transpose() * nu1p + c2.transpose() * nu2p;
    s2.tail(n) -= g2.transpose() * nu2p;
    e.segment(row, 2 * n) = s2;
    row += 2 * n;
    e.segment(row, n) = q_bar - boundary(x2, false);
    row += n;
    e.segment(row, d) = spec.d_constraint(q1m) * lm;
    row += d;
    e.segment(row, d) = spec.d_constraint(q_bar) * mu;
    row += d;
    e.segment(row, d) = spec.d_constraint(boundary(x2, true)) * lp;
    row += d;
    e.segment(row, d) = spec.constraint(q2);
    row += d;
    e.segment(row, d) = g2 * v2;
    return e;
  };

  Vec z = Vec::Zero(5 * n + 4 * d);
  z.head(n) = seed.q;
  z.segment(n, n) = seed.v;
  // Multipliers from the linear least-squares problem at the seed.
  {
    const Vec base = equations(z);
    Mat jm(base.size(), z.size() - 2 * n);
    for (Index j = 0; j < jm.cols(); ++j) {
      Vec y = z;
      y(2 * n + j) += 1.0;
      jm.col(j) = equations(y) - base;
    }
    z.tail(z.size() - 2 * n) = -jm.completeOrthogonalDecomposition().solve(base);
  }

  DenseOracleResult out;
  for (int it = 0; it < max_iter; ++it) {
    const Vec e = equations(z);
    out.residual = e.lpNorm<Eigen::Infinity>();
    const Mat jac = fd_jacobian(equations, z, 1e-6);
    const Vec dz = jac.completeOrthogonalDecomposition().solve(-e);
    z += dz;
    out.iterations = it + 1;
    if (dz.head(2 * n).lpNorm<Eigen::Infinity>() < 1e-14) {
      break;
    }
  }
  out.residual = equations(z).lpNorm<Eigen::Infinity>();
  out.w2 = {z.head(n), z.segment(n, n)};
  return out;
}

}  // namespace rkvi::test
