#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rkvi/types.hpp"

namespace rkvi {

/// Constrained quadratic Lagrangian
///   L(q, v) = 1/2 v^T m(q) v + a(q) . v - V(q),   subject to g(q) = 0.
///
/// All callbacks must be pure. Index conventions:
///   d_mass(q)[k]              = dm/dq^k                  (N x N each)
///   d2_mass(q)[k][l]          = d^2 m / dq^k dq^l
///   d_one_form(q)(i, j)       = da_i/dq^j
///   d2_one_form(q)[k](i, j)   = d^2 a_i / dq^j dq^k
///   d2_constraint_contract(q, u)(a, j)    = u^i d^2 g^a / dq^i dq^j
///   d3_constraint_contract(q, u, w)(a, m) = u^i w^j d^3 g^a / dq^i dq^j dq^m
struct ProblemSpec {
  Index n = 0;
  Index d = 0;

  std::function<Mat(const Vec&)> mass;
  std::function<std::vector<Mat>(const Vec&)> d_mass;
  std::function<std::vector<std::vector<Mat>>(const Vec&)> d2_mass;

  std::function<Vec(const Vec&)> one_form;
  std::function<Mat(const Vec&)> d_one_form;
  std::function<std::vector<Mat>(const Vec&)> d2_one_form;

  std::function<double(const Vec&)> potential;
  std::function<Vec(const Vec&)> d_potential;
  std::function<Mat(const Vec&)> d2_potential;

  std::function<Vec(const Vec&)> constraint;
  std::function<Mat(const Vec&)> d_constraint;
  std::function<Mat(const Vec&, const Vec&)> d2_constraint_contract;
  std::function<Mat(const Vec&, const Vec&, const Vec&)> d3_constraint_contract;
};

/// Fills any missing derivative callback with central finite differences of
/// the next lower one. Throws ConfigError if a base callback (mass, one_form,
/// potential, constraint) or the first constraint derivative is missing.
/// Finite-difference derivatives carry roughly 1e-8 relative error.
ProblemSpec with_fd_derivatives(ProblemSpec spec, double step = 1e-5);

struct State {
  Vec q;
  Vec v;
};

struct TangentVector {
  Vec dq;
  Vec dv;
};

struct LagrangianGradient {
  Vec dq;  ///< D_q L
  Vec dv;  ///< D_v L = m(q) v + a(q)
};

struct FieldValue {
  Vec accel;       ///< A(q, v)
  Vec multiplier;  ///< lambda
};

struct FieldJacobian {
  Mat daccel_dq;
  Mat daccel_dv;
  Mat dmultiplier_dq;
  Mat dmultiplier_dv;
};

double lagrangian(const ProblemSpec& spec, const Vec& q, const Vec& v);
LagrangianGradient d_lagrangian(const ProblemSpec& spec, const Vec& q, const Vec& v);

/// Gamma[i](k, l) = 1/2 (dm_il/dq^k + dm_ik/dq^l - dm_kl/dq^i).
std::vector<Mat> christoffel(const ProblemSpec& spec, const Vec& q);

/// b(i, j) = da_i/dq^j - da_j/dq^i.
Mat magnetic(const ProblemSpec& spec, const Vec& q);

/// D^2(theta^T g)(q) = sum_a theta_a D^2 g^a(q), an N x N symmetric matrix.
Mat constraint_hessian(const ProblemSpec& spec, const Vec& q, const Vec& theta);

/// Acceleration and constraint multiplier from the Euler-Lagrange saddle system
/// [[M, -Dg^T], [-Dg, 0]] (A, lambda) = (-Gamma v v - b v - dV, v^T D^2 g v).
FieldValue el_field(const ProblemSpec& spec, const Vec& q, const Vec& v);

/// q- and v-derivatives of (A, lambda); one factorization serves all 2N columns.
FieldJacobian el_field_jacobian(const ProblemSpec& spec, const Vec& q, const Vec& v,
                                const FieldValue& field);

bool tq_membership(const ProblemSpec& spec, const State& w, double tol);
bool ttq_membership(const ProblemSpec& spec, const State& w, const TangentVector& dw, double tol);

/// Orthogonal projection of v onto ker Dg(q).
Vec tangential_projection(const ProblemSpec& spec, const Vec& q, const Vec& v);

/// Largest relative mismatch between each analytic derivative and a central
/// difference of the quantity below it, at the given state.
struct DerivativeReport {
  std::vector<std::pair<std::string, double>> entries;
  double worst() const;
};

DerivativeReport check_derivatives(const ProblemSpec& spec, const State& w, double fd_step = 1e-6);

/// max |a - b| / max(1, max |b|).
double relative_error(const Mat& analytic, const Mat& reference);

}  // namespace rkvi
