#include "rkvi/model.hpp"

#include <algorithm>
#include <cmath>

#include "rkvi/saddle.hpp"

namespace rkvi {
namespace {

Vec unit(Index n, Index k) {
  Vec e = Vec::Zero(n);
  e(k) = 1.0;
  return e;
}

// Central difference of a matrix-valued function along direction u.
template <class F>
Mat directional_fd(F&& f, const Vec& q, const Vec& u, double step) {
  const double norm = u.norm();
  if (norm == 0.0) {
    return Mat::Zero(f(q).rows(), f(q).cols());
  }
  const Vec dir = u / norm;
  return norm * (f(q + step * dir) - f(q - step * dir)) / (2.0 * step);
}

saddle::SaddleSystem field_system(const ProblemSpec& spec, const Vec& q) {
  return {spec.mass(q), spec.d_constraint(q), saddle::Layout::kNegativeCoupling};
}

}  // namespace

ProblemSpec with_fd_derivatives(ProblemSpec spec, double step) {
  if (!spec.mass || !spec.one_form || !spec.potential || !spec.constraint ||
      !spec.d_constraint) {
    throw ConfigError("problem",
                      "mass, one_form, potential, constraint and d_constraint are required");
  }
  const Index n = spec.n;
  if (!spec.d_mass) {
    auto m = spec.mass;
    spec.d_mass = [m, n, step](const Vec& q) {
      std::vector<Mat> out;
      for (Index k = 0; k < n; ++k) {
        out.push_back(directional_fd(m, q, unit(n, k), step));
      }
      return out;
    };
  }
  if (!spec.d2_mass) {
    auto dm = spec.d_mass;
    spec.d2_mass = [dm, n, step](const Vec& q) {
      std::vector<std::vector<Mat>> out(n, std::vector<Mat>(n));
      for (Index k = 0; k < n; ++k) {
        const Vec e = unit(n, k);
        const auto plus = dm(q + step * e);
        const auto minus = dm(q - step * e);
        for (Index l = 0; l < n; ++l) {
          out[k][l] = (plus[l] - minus[l]) / (2.0 * step);
        }
      }
      return out;
    };
  }
  if (!spec.d_one_form) {
    auto a = spec.one_form;
    spec.d_one_form = [a, n, step](const Vec& q) {
      Mat j(n, n);
      for (Index k = 0; k < n; ++k) {
        j.col(k) = directional_fd([&](const Vec& x) { return Mat(a(x)); }, q, unit(n, k), step);
      }
      return j;
    };
  }
  if (!spec.d2_one_form) {
    auto da = spec.d_one_form;
    spec.d2_one_form = [da, n, step](const Vec& q) {
      std::vector<Mat> out;
      for (Index k = 0; k < n; ++k) {
        out.push_back(directional_fd(da, q, unit(n, k), step));
      }
      return out;
    };
  }
  if (!spec.d_potential) {
    auto pot = spec.potential;
    spec.d_potential = [pot, n, step](const Vec& q) {
      Vec g(n);
      for (Index k = 0; k < n; ++k) {
        const Vec e = unit(n, k);
        g(k) = (pot(q + step * e) - pot(q - step * e)) / (2.0 * step);
      }
      return g;
    };
  }
  if (!spec.d2_potential) {
    auto dp = spec.d_potential;
    spec.d2_potential = [dp, n, step](const Vec& q) {
      Mat h(n, n);
      for (Index k = 0; k < n; ++k) {
        h.col(k) = directional_fd([&](const Vec& x) { return Mat(dp(x)); }, q, unit(n, k), step);
      }
      return Mat(0.5 * (h + h.transpose()));
    };
  }
  if (!spec.d2_constraint_contract) {
    auto dg = spec.d_constraint;
    spec.d2_constraint_contract = [dg, step](const Vec& q, const Vec& u) {
      return directional_fd(dg, q, u, step);
    };
  }
  if (!spec.d3_constraint_contract) {
    auto d2 = spec.d2_constraint_contract;
    spec.d3_constraint_contract = [d2, step](const Vec& q, const Vec& u, const Vec& w) {
      return directional_fd([&](const Vec& x) { return d2(x, u); }, q, w, step);
    };
  }
  return spec;
}

double lagrangian(const ProblemSpec& spec, const Vec& q, const Vec& v) {
  require_size(q, spec.n, "lagrangian q");
  require_size(v, spec.n, "lagrangian v");
  return 0.5 * v.dot(spec.mass(q) * v) + spec.one_form(q).dot(v) - spec.potential(q);
}

LagrangianGradient d_lagrangian(const ProblemSpec& spec, const Vec& q, const Vec& v) {
  require_size(q, spec.n, "d_lagrangian q");
  require_size(v, spec.n, "d_lagrangian v");
  const auto dm = spec.d_mass(q);
  LagrangianGradient out;
  out.dq = spec.d_one_form(q).transpose() * v - spec.d_potential(q);
  for (Index k = 0; k < spec.n; ++k) {
    out.dq(k) += 0.5 * v.dot(dm[k] * v);
  }
  out.dv = spec.mass(q) * v + spec.one_form(q);
  return out;
}

std::vector<Mat> christoffel(const ProblemSpec& spec, const Vec& q) {
  const Index n = spec.n;
  const auto dm = spec.d_mass(q);
  std::vector<Mat> gamma(n, Mat(n, n));
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) {
      for (Index l = 0; l < n; ++l) {
        gamma[i](k, l) = 0.5 * (dm[k](i, l) + dm[l](i, k) - dm[i](k, l));
      }
    }
  }
  return gamma;
}

Mat magnetic(const ProblemSpec& spec, const Vec& q) {
  const Mat da = spec.d_one_form(q);
  return da - da.transpose();
}

Mat constraint_hessian(const ProblemSpec& spec, const Vec& q, const Vec& theta) {
  require_size(theta, spec.d, "constraint_hessian theta");
  Mat h(spec.n, spec.n);
  for (Index j = 0; j < spec.n; ++j) {
    h.row(j) = (spec.d2_constraint_contract(q, unit(spec.n, j)).transpose() * theta).transpose();
  }
  return h;
}

FieldValue el_field(const ProblemSpec& spec, const Vec& q, const Vec& v) {
  require_size(q, spec.n, "el_field q");
  require_size(v, spec.n, "el_field v");
  const auto gamma = christoffel(spec, q);
  Vec rhs_top = -magnetic(spec, q) * v - spec.d_potential(q);
  for (Index i = 0; i < spec.n; ++i) {
    rhs_top(i) -= v.dot(gamma[i] * v);
  }
  const Vec rhs_bottom = spec.d2_constraint_contract(q, v) * v;
  const auto sol = saddle::factor(field_system(spec, q)).solve(rhs_top, rhs_bottom);
  return {sol.x, sol.y};
}

FieldJacobian el_field_jacobian(const ProblemSpec& spec, const Vec& q, const Vec& v,
                                const FieldValue& field) {
  const Index n = spec.n;
  const Index d = spec.d;
  const auto dm = spec.d_mass(q);
  const auto d2m = spec.d2_mass(q);
  const auto d2a = spec.d2_one_form(q);
  const auto gamma = christoffel(spec, q);
  const Mat b = magnetic(spec, q);
  const Mat d2v = spec.d2_potential(q);
  const Mat lambda_hessian = constraint_hessian(spec, q, field.multiplier);
  const Mat d2g_v = spec.d2_constraint_contract(q, v);
  const Mat d2g_a = spec.d2_constraint_contract(q, field.accel);
  const Mat d3g_vv = spec.d3_constraint_contract(q, v, v);

  // Columns 0..n-1: q-derivatives; n..2n-1: v-derivatives.
  Mat rhs_top(n, 2 * n);
  Mat rhs_bottom(d, 2 * n);
  for (Index m = 0; m < n; ++m) {
    Vec col = -d2v.col(m) - dm[m] * field.accel + lambda_hessian.col(m);
    // d(Gamma_ikl)/dq^m v^k v^l
    for (Index i = 0; i < n; ++i) {
      double acc = -0.5 * v.dot(d2m[m][i] * v);
      for (Index k = 0; k < n; ++k) {
        acc += v(k) * d2m[m][k].row(i).dot(v);
      }
      col(i) -= acc;
    }
    // d(b_ij)/dq^m v^j with d2a[m](i, j) = d^2 a_i / dq^j dq^m.
    col -= (d2a[m] - d2a[m].transpose()) * v;
    rhs_top.col(m) = col;
    rhs_bottom.col(m) = d3g_vv.col(m) + d2g_a.col(m);

    Vec vcol = -b.col(m);
    for (Index i = 0; i < n; ++i) {
      vcol(i) -= 2.0 * gamma[i].col(m).dot(v);
    }
    rhs_top.col(n + m) = vcol;
    rhs_bottom.col(n + m) = 2.0 * d2g_v.col(m);
  }
  const auto sol = saddle::factor(field_system(spec, q)).solve(rhs_top, rhs_bottom);
  return {sol.x.leftCols(n), sol.x.rightCols(n), sol.y.leftCols(n), sol.y.rightCols(n)};
}

bool tq_membership(const ProblemSpec& spec, const State& w, double tol) {
  return spec.constraint(w.q).lpNorm<Eigen::Infinity>() <= tol &&
         (spec.d_constraint(w.q) * w.v).lpNorm<Eigen::Infinity>() <= tol;
}

bool ttq_membership(const ProblemSpec& spec, const State& w, const TangentVector& dw, double tol) {
  const Mat g = spec.d_constraint(w.q);
  const Vec first = g * dw.dq;
  const Vec second = spec.d2_constraint_contract(w.q, w.v) * dw.dq + g * dw.dv;
  return first.lpNorm<Eigen::Infinity>() <= tol && second.lpNorm<Eigen::Infinity>() <= tol;
}

Vec tangential_projection(const ProblemSpec& spec, const Vec& q, const Vec& v) {
  const Mat g = spec.d_constraint(q);
  return v - g.transpose() * (g * g.transpose()).ldlt().solve(g * v);
}

double DerivativeReport::worst() const {
  double w = 0.0;
  for (const auto& [name, err] : entries) {
    w = std::max(w, err);
  }
  return w;
}

double relative_error(const Mat& analytic, const Mat& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

DerivativeReport check_derivatives(const ProblemSpec& spec, const State& w, double fd_step) {
  const Index n = spec.n;
  const Vec& q = w.q;
  const Vec& v = w.v;
  DerivativeReport report;
  auto add = [&](const std::string& name, double err) { report.entries.emplace_back(name, err); };

  // Second direction for contractions, deliberately not parallel to v.
  Vec u(n);
  for (Index i = 0; i < n; ++i) {
    u(i) = 0.3 + 0.1 * static_cast<double>(i) - 0.05 * static_cast<double>(i * i);
  }

  {
    const auto grad = d_lagrangian(spec, q, v);
    Vec fd_q(n), fd_v(n);
    for (Index k = 0; k < n; ++k) {
      const Vec e = fd_step * unit(n, k);
      fd_q(k) = (lagrangian(spec, q + e, v) - lagrangian(spec, q - e, v)) / (2 * fd_step);
      fd_v(k) = (lagrangian(spec, q, v + e) - lagrangian(spec, q, v - e)) / (2 * fd_step);
    }
    add("d_lagrangian", std::max(relative_error(grad.dq, fd_q), relative_error(grad.dv, fd_v)));
  }
  {
    const auto dm = spec.d_mass(q);
    const auto d2m = spec.d2_mass(q);
    double e1 = 0.0, e2 = 0.0;
    for (Index k = 0; k < n; ++k) {
      const Vec e = fd_step * unit(n, k);
      e1 = std::max(e1, relative_error(dm[k], (spec.mass(q + e) - spec.mass(q - e)) / (2 * fd_step)));
      const auto plus = spec.d_mass(q + e);
      const auto minus = spec.d_mass(q - e);
      for (Index l = 0; l < n; ++l) {
        e2 = std::max(e2, relative_error(d2m[k][l], (plus[l] - minus[l]) / (2 * fd_step)));
      }
    }
    add("d_mass", e1);
    add("d2_mass", e2);
  }
  {
    const Mat da = spec.d_one_form(q);
    const auto d2a = spec.d2_one_form(q);
    Mat fd_da(n, n);
    double e2 = 0.0;
    for (Index k = 0; k < n; ++k) {
      const Vec e = fd_step * unit(n, k);
      fd_da.col(k) = (spec.one_form(q + e) - spec.one_form(q - e)) / (2 * fd_step);
      e2 = std::max(e2, relative_error(d2a[k], (spec.d_one_form(q + e) - spec.d_one_form(q - e)) /
                                                   (2 * fd_step)));
    }
    add("d_one_form", relative_error(da, fd_da));
    add("d2_one_form", e2);
  }
  {
    Vec fd_dv(n);
    Mat fd_d2v(n, n);
    for (Index k = 0; k < n; ++k) {
      const Vec e = fd_step * unit(n, k);
      fd_dv(k) = (spec.potential(q + e) - spec.potential(q - e)) / (2 * fd_step);
      fd_d2v.col(k) = (spec.d_potential(q + e) - spec.d_potential(q - e)) / (2 * fd_step);
    }
    add("d_potential", relative_error(spec.d_potential(q), fd_dv));
    add("d2_potential", relative_error(spec.d2_potential(q), fd_d2v));
  }
  {
    Mat fd_dg(spec.d, n);
    for (Index k = 0; k < n; ++k) {
      const Vec e = fd_step * unit(n, k);
      fd_dg.col(k) = (spec.constraint(q + e) - spec.constraint(q - e)) / (2 * fd_step);
    }
    add("d_constraint", relative_error(spec.d_constraint(q), fd_dg));
    double e2 = 0.0, e3 = 0.0;
    for (const Vec& dir : {v, u}) {
      const Mat fd2 =
          (spec.d_constraint(q + fd_step * dir) - spec.d_constraint(q - fd_step * dir)) /
          (2 * fd_step);
      e2 = std::max(e2, relative_error(spec.d2_constraint_contract(q, dir), fd2));
      const Mat fd3 = (spec.d2_constraint_contract(q + fd_step * u, dir) -
                       spec.d2_constraint_contract(q - fd_step * u, dir)) /
                      (2 * fd_step);
      e3 = std::max(e3, relative_error(spec.d3_constraint_contract(q, dir, u), fd3));
    }
    add("d2_constraint_contract", e2);
    add("d3_constraint_contract", e3);
  }
  {
    const auto gamma = christoffel(spec, q);
    const Mat b = magnetic(spec, q);
    std::vector<Mat> fd_dm;
    Mat fd_da(n, n);
    for (Index k = 0; k < n; ++k) {
      const Vec e = fd_step * unit(n, k);
      fd_dm.push_back((spec.mass(q + e) - spec.mass(q - e)) / (2 * fd_step));
      fd_da.col(k) = (spec.one_form(q + e) - spec.one_form(q - e)) / (2 * fd_step);
    }
    double eg = 0.0;
    for (Index i = 0; i < n; ++i) {
      Mat ref(n, n);
      for (Index k = 0; k < n; ++k) {
        for (Index l = 0; l < n; ++l) {
          ref(k, l) = 0.5 * (fd_dm[k](i, l) + fd_dm[l](i, k) - fd_dm[i](k, l));
        }
      }
      eg = std::max(eg, relative_error(gamma[i], ref));
    }
    add("christoffel", eg);
    add("magnetic", relative_error(b, fd_da - fd_da.transpose()));
  }
  {
    const auto field = el_field(spec, q, v);
    const auto jac = el_field_jacobian(spec, q, v, field);
    Mat fd_aq(n, n), fd_av(n, n), fd_lq(spec.d, n), fd_lv(spec.d, n);
    for (Index k = 0; k < n; ++k) {
      const Vec e = fd_step * unit(n, k);
      const auto qp = el_field(spec, q + e, v);
      const auto qm = el_field(spec, q - e, v);
      const auto vp = el_field(spec, q, v + e);
      const auto vm = el_field(spec, q, v - e);
      fd_aq.col(k) = (qp.accel - qm.accel) / (2 * fd_step);
      fd_lq.col(k) = (qp.multiplier - qm.multiplier) / (2 * fd_step);
      fd_av.col(k) = (vp.accel - vm.accel) / (2 * fd_step);
      fd_lv.col(k) = (vp.multiplier - vm.multiplier) / (2 * fd_step);
    }
    add("el_field_jacobian",
        std::max({relative_error(jac.daccel_dq, fd_aq), relative_error(jac.daccel_dv, fd_av),
                  relative_error(jac.dmultiplier_dq, fd_lq),
                  relative_error(jac.dmultiplier_dv, fd_lv)}));
  }
  return report;
}

}  // namespace rkvi
