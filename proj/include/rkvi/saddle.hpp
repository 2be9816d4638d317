#pragma once

#include <cstddef>
#include <memory>

#include "rkvi/types.hpp"

namespace rkvi::saddle {

/// Sign convention of the assembled saddle-point matrix.
enum class Layout {
  /// [[M, -G^T], [-G, 0]]: multiplier systems of the Euler-Lagrange field.
  kNegativeCoupling,
  /// [[B, G^T], [G, 0]]: projection-derivative systems.
  kPositiveCoupling,
};

/// A symmetric saddle-point system. `coupling` always holds G (typically Dg(q));
/// the layout decides the sign it enters with.
struct SaddleSystem {
  Mat top_block;
  Mat coupling;
  Layout layout = Layout::kNegativeCoupling;

  Index n() const { return top_block.rows(); }
  Index d() const { return coupling.rows(); }
  Mat assembled() const;
};

struct Solution {
  Vec x;
  Vec y;
};

struct MatSolution {
  Mat x;
  Mat y;
};

/// Reusable factorization of a SaddleSystem. Immutable once built.
///
/// The top block is eliminated first (range-space method on the d x d Schur
/// complement G M^{-1} G^T). If the top block is not positive definite or the
/// Schur complement has condition estimate above 1e12, the assembled matrix is
/// factored instead with a full-pivot LU. A pivot below 1e-13 times the largest
/// pivot of the final factorization raises SingularSystem.
class SaddleFactorization {
 public:
  explicit SaddleFactorization(const SaddleSystem& system);

  Solution solve(const Vec& rhs_top, const Vec& rhs_bottom) const;
  MatSolution solve(const Mat& rhs_top, const Mat& rhs_bottom) const;

  Index n() const { return n_; }
  Index d() const { return d_; }
  double condition_estimate() const { return condition_; }
  bool uses_schur_complement() const { return schur_ != nullptr; }
  Layout layout() const { return layout_; }

 private:
  struct Schur;
  struct Dense;

  Index n_ = 0;
  Index d_ = 0;
  Layout layout_ = Layout::kNegativeCoupling;
  double condition_ = 0.0;
  std::shared_ptr<const Schur> schur_;
  std::shared_ptr<const Dense> dense_;
};

SaddleFactorization factor(const SaddleSystem& system);
Solution solve(const SaddleFactorization& fact, const Vec& rhs_top, const Vec& rhs_bottom);

/// Number of factorizations built since the last reset (instrumentation).
std::size_t factorization_count();
void reset_factorization_count();

}  // namespace rkvi::saddle
