#include "rkvi/saddle.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <string>

namespace rkvi::saddle {
namespace {

constexpr double kPivotRatio = 1e-13;
constexpr double kSchurConditionLimit = 1e12;

std::atomic<std::size_t> g_factorizations{0};

double pivot_ratio(const Eigen::VectorXd& pivots) {
  if (pivots.size() == 0) {
    return 1.0;
  }
  const double largest = pivots.cwiseAbs().maxCoeff();
  if (largest == 0.0) {
    return 0.0;
  }
  return pivots.cwiseAbs().minCoeff() / largest;
}

}  // namespace

struct SaddleFactorization::Schur {
  Eigen::LDLT<Mat> top;
  Eigen::LDLT<Mat> schur;
  Mat coupling;
};

struct SaddleFactorization::Dense {
  Eigen::FullPivLU<Mat> lu;
};

Mat SaddleSystem::assembled() const {
  const Index nn = n();
  const Index dd = d();
  const double sign = layout == Layout::kNegativeCoupling ? -1.0 : 1.0;
  Mat k = Mat::Zero(nn + dd, nn + dd);
  k.topLeftCorner(nn, nn) = top_block;
  k.topRightCorner(nn, dd) = sign * coupling.transpose();
  k.bottomLeftCorner(dd, nn) = sign * coupling;
  return k;
}

SaddleFactorization::SaddleFactorization(const SaddleSystem& system)
    : n_(system.n()), d_(system.d()), layout_(system.layout) {
  if (system.top_block.cols() != n_ || system.coupling.cols() != n_) {
    throw DimensionMismatch("saddle system: top block is " + std::to_string(n_) + "x" +
                            std::to_string(system.top_block.cols()) + ", coupling has " +
                            std::to_string(system.coupling.cols()) + " columns");
  }
  if (d_ > n_) {
    throw SingularSystem("saddle system: more constraints than unknowns");
  }
  ++g_factorizations;

  // Range-space route.
  auto schur = std::make_shared<Schur>();
  schur->top.compute(system.top_block);
  bool top_ok = schur->top.info() == Eigen::Success && schur->top.isPositive();
  if (top_ok) {
    const Eigen::VectorXd top_pivots = schur->top.vectorD();
    top_ok = top_pivots.minCoeff() > 0.0 && pivot_ratio(top_pivots) > kPivotRatio;
  }
  if (top_ok) {
    schur->coupling = system.coupling;
    const Mat minv_gt = schur->top.solve(system.coupling.transpose());
    const Mat s = system.coupling * minv_gt;
    schur->schur.compute(s);
    const double top_cond = 1.0 / schur->top.rcond();
    double schur_cond = 1.0;
    if (d_ > 0) {
      const Eigen::VectorXd s_pivots = schur->schur.vectorD();
      const bool s_ok = schur->schur.info() == Eigen::Success && s_pivots.minCoeff() > 0.0 &&
                        pivot_ratio(s_pivots) > kPivotRatio;
      schur_cond = s_ok ? 1.0 / schur->schur.rcond() : std::numeric_limits<double>::infinity();
    }
    if (std::isfinite(schur_cond) && schur_cond <= kSchurConditionLimit) {
      condition_ = top_cond * schur_cond;
      schur_ = std::move(schur);
      return;
    }
  }

  // Assembled fallback.
  auto dense = std::make_shared<Dense>();
  dense->lu.compute(system.assembled());
  const Mat& lu = dense->lu.matrixLU();
  const Eigen::VectorXd pivots = lu.diagonal();
  if (pivot_ratio(pivots) <= kPivotRatio) {
    throw SingularSystem("saddle system is singular (pivot ratio " +
                         std::to_string(pivot_ratio(pivots)) + ")");
  }
  condition_ = 1.0 / dense->lu.rcond();
  dense_ = std::move(dense);
}

MatSolution SaddleFactorization::solve(const Mat& rhs_top, const Mat& rhs_bottom) const {
  if (rhs_top.rows() != n_ || rhs_bottom.rows() != d_ || rhs_top.cols() != rhs_bottom.cols()) {
    throw DimensionMismatch("saddle solve: right-hand side has shape (" +
                            std::to_string(rhs_top.rows()) + ", " +
                            std::to_string(rhs_bottom.rows()) + "), expected (" +
                            std::to_string(n_) + ", " + std::to_string(d_) + ")");
  }
  MatSolution out;
  if (schur_) {
    const Mat& g = schur_->coupling;
    const Mat minv_r = schur_->top.solve(rhs_top);
    if (layout_ == Layout::kNegativeCoupling) {
      // M x - G^T y = r1, -G x = r2  =>  S y = -r2 - G M^{-1} r1.
      out.y = d_ > 0 ? Mat(schur_->schur.solve(-rhs_bottom - g * minv_r))
                     : Mat(0, rhs_top.cols());
      out.x = minv_r + schur_->top.solve(g.transpose() * out.y);
    } else {
      // B x + G^T y = r1, G x = r2  =>  S y = G B^{-1} r1 - r2.
      out.y = d_ > 0 ? Mat(schur_->schur.solve(g * minv_r - rhs_bottom))
                     : Mat(0, rhs_top.cols());
      out.x = minv_r - schur_->top.solve(g.transpose() * out.y);
    }
    return out;
  }
  Mat rhs(n_ + d_, rhs_top.cols());
  rhs.topRows(n_) = rhs_top;
  rhs.bottomRows(d_) = rhs_bottom;
  const Mat sol = dense_->lu.solve(rhs);
  out.x = sol.topRows(n_);
  out.y = sol.bottomRows(d_);
  return out;
}

Solution SaddleFactorization::solve(const Vec& rhs_top, const Vec& rhs_bottom) const {
  require_size(rhs_top, n_, "saddle solve rhs_top");
  require_size(rhs_bottom, d_, "saddle solve rhs_bottom");
  MatSolution m = solve(Mat(rhs_top), Mat(rhs_bottom));
  return {m.x.col(0), m.y.col(0)};
}

SaddleFactorization factor(const SaddleSystem& system) { return SaddleFactorization(system); }

Solution solve(const SaddleFactorization& fact, const Vec& rhs_top, const Vec& rhs_bottom) {
  return fact.solve(rhs_top, rhs_bottom);
}

std::size_t factorization_count() { return g_factorizations.load(); }
void reset_factorization_count() { g_factorizations = 0; }

}  // namespace rkvi::saddle
