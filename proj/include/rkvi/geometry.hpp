#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rkvi/del_solver.hpp"

namespace rkvi {

/// Splitting of T_w TTQ into ker D(d-) (plus) and ker D(d+) (minus), where
/// d-/d+ are the projected boundary maps. Columns are (dq, dv) stacked, 2N rows.
struct VariationBasis {
  State w;
  Mat tangent;  ///< orthonormal basis of T_w TTQ, 2(N - d) columns
  Mat plus;     ///< orthonormal basis of ker D(d-) within T_w TTQ, N - d columns
  Mat minus;    ///< orthonormal basis of ker D(d+) within T_w TTQ, N - d columns
  Mat d_minus;  ///< D(P o hat-minus), N x 2N
  Mat d_plus;   ///< D(P o hat-plus), N x 2N
  Vec d_lh;     ///< DL_h, 2N

  /// Coefficients (a, b) with dw = plus a + minus b, by least squares.
  std::pair<Vec, Vec> split(const Vec& dw) const;
};

/// The boundary maps, action and step size of `config` define all forms below.
VariationBasis variation_basis(const ProblemSpec& spec, const StepConfig& config, const State& w);

/// Discrete Lagrange one-form: -DL_h(w) dw_minus, dw = dw_plus + dw_minus.
double one_form(const ProblemSpec& spec, const StepConfig& config, const State& w,
                const TangentVector& dw);

/// Orthonormal chart of TQ around a base state:
/// phi(s) = (P(q + U s_q), Pi(v + U s_v)), with U an orthonormal basis of ker Dg(q)
/// and Pi the orthogonal projection onto ker Dg at the new configuration.
/// At the base, chart coordinates of a tangent vector are (U^T dq, U^T dv).
class TangentChart {
 public:
  TangentChart(const ProblemSpec& spec, const State& base, double tol_projection = 1e-13);

  Index dim() const { return 2 * u_.cols(); }
  const Mat& u() const { return u_; }
  const State& base() const { return base_; }

  State point(const Vec& s) const;
  /// Columns are d phi / d s_j at s, as stacked (dq, dv).
  Mat jacobian(const Vec& s) const;
  /// (U^T dq, U^T dv).
  Vec coordinates(const TangentVector& dw) const;
  /// First-order inverse of phi: (U^T (q - q0), U^T (v - v0)).
  Vec local_coordinates(const State& w) const;

 private:
  const ProblemSpec* spec_;
  State base_;
  Mat u_;
  double tol_;
};

/// The matrix of omega = -d(theta-) in chart coordinates at w, by central
/// differences of the pulled-back one-form with step fd_step.
Mat two_form_matrix(const ProblemSpec& spec, const StepConfig& config, const State& w,
                    double fd_step = 1e-5);

double two_form(const ProblemSpec& spec, const StepConfig& config, const State& w,
                const TangentVector& d1, const TangentVector& d2, double fd_step = 1e-5);

using StateMap = std::function<State(const State&)>;

/// max_ij |omega_{F(w)}(DF e_i, DF e_j) - omega_w(e_i, e_j)| over chart basis
/// vectors e_i at w, for an arbitrary map F of TQ. DF by central differences.
double symplecticity_defect(const ProblemSpec& spec, const StepConfig& config, const StateMap& map,
                            const State& w1, double fd_step = 1e-5);

/// Same, with F the variational step defined by config.
double symplecticity_defect(const ProblemSpec& spec, const StepConfig& config, const State& w1,
                            double fd_step = 1e-5);

/// The unprojected standard layer over one step followed by projection to TQ:
/// (P(R^q_h(w)), Pi R^v_h(w)).
StateMap raw_layer_map(const ProblemSpec& spec, const StepConfig& config);

/// A linear infinitesimal action q -> xi q, lifted to (q, v) -> (xi q, xi v).
struct Generator {
  std::string name;
  Mat matrix;
  /// True when the Lagrangian and the constraint are both invariant.
  bool symmetry = true;
};

struct GroupActionSpec {
  std::vector<Generator> generators;

  TangentVector infinitesimal(std::size_t index, const State& w) const;
};

/// J_xi(w) = -theta-(w)(xi q, xi v). Throws GeneratorNotTangent when
/// ||Dg(q) xi q||_inf exceeds tol.
double discrete_momentum(const ProblemSpec& spec, const StepConfig& config, const State& w,
                         const GroupActionSpec& action, std::size_t index, double tol = 1e-10);

/// max over the two boundary maps of ||d(exp(eps xi) w) - exp(eps xi) d(w)||_inf.
double equivariance_error(const ProblemSpec& spec, const StepConfig& config, const State& w,
                          const GroupActionSpec& action, std::size_t index, double eps);

struct DelCheck {
  double stationarity = 0.0;  ///< max |DL_h(w1) dw1 + DL_h(w2) dw2| / ||DL_h||
  double connection = 0.0;    ///< ||d+(w1) - d-(w2)||_inf
  double value() const { return std::max(stationarity, connection); }
};

/// Multiplier-free discrete Euler-Lagrange conditions for the pair (w1, w2).
DelCheck del_residual_check(const ProblemSpec& spec, const StepConfig& config, const State& w1,
                            const State& w2);

/// E = 1/2 v^T m(q) v + V(q).
double energy(const ProblemSpec& spec, const State& w);

}  // namespace rkvi
