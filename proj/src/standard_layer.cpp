#include "rkvi/standard_layer.hpp"

#include <algorithm>
#include <cmath>

namespace rkvi {

bool ButcherTableau::is_explicit() const {
  for (Index i = 0; i < stages.rows(); ++i) {
    for (Index j = i; j < stages.cols(); ++j) {
      if (stages(i, j) != 0.0) {
        return false;
      }
    }
  }
  return true;
}

std::vector<std::string> ButcherTableau::names() { return {"euler", "midpoint", "heun", "rk4"}; }

ButcherTableau ButcherTableau::by_name(const std::string& name) {
  ButcherTableau t;
  t.name = name;
  if (name == "euler") {
    t.stages = Mat::Zero(1, 1);
    t.weights = Vec::Ones(1);
    t.nodes = Vec::Zero(1);
    t.order = 1;
  } else if (name == "midpoint") {
    t.stages = Mat::Zero(2, 2);
    t.stages(1, 0) = 0.5;
    t.weights = Vec(2);
    t.weights << 0.0, 1.0;
    t.nodes = Vec(2);
    t.nodes << 0.0, 0.5;
    t.order = 2;
  } else if (name == "heun") {
    t.stages = Mat::Zero(2, 2);
    t.stages(1, 0) = 1.0;
    t.weights = Vec(2);
    t.weights << 0.5, 0.5;
    t.nodes = Vec(2);
    t.nodes << 0.0, 1.0;
    t.order = 2;
  } else if (name == "rk4") {
    t.stages = Mat::Zero(4, 4);
    t.stages(1, 0) = 0.5;
    t.stages(2, 1) = 0.5;
    t.stages(3, 2) = 1.0;
    t.weights = Vec(4);
    t.weights << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
    t.nodes = Vec(4);
    t.nodes << 0.0, 0.5, 0.5, 1.0;
    t.order = 4;
  } else {
    throw ConfigError("tableau", "unknown tableau '" + name + "' (expected euler, midpoint, heun, rk4)");
  }
  return t;
}

namespace {

void check_flow_args(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                     int substeps) {
  require_size(w.q, spec.n, "flow q");
  require_size(w.v, spec.n, "flow v");
  if (substeps < 1) {
    throw ConfigError("substeps", "must be at least 1");
  }
  if (!tableau.is_explicit()) {
    throw ConfigError("tableau", "standard layers must be explicit");
  }
}

struct StageDerivative {
  Vec dq;
  Vec dv;
  double ds = 0.0;
};

void rk_step(const ButcherTableau& tab, const ProblemSpec& spec, ExtendedState& y, double dt) {
  const Index s = tab.stage_count();
  std::vector<StageDerivative> k(s);
  for (Index i = 0; i < s; ++i) {
    Vec q = y.q;
    Vec v = y.v;
    for (Index j = 0; j < i; ++j) {
      const double a = tab.stages(i, j);
      if (a != 0.0) {
        q += dt * a * k[j].dq;
        v += dt * a * k[j].dv;
      }
    }
    k[i].dq = v;
    k[i].dv = el_field(spec, q, v).accel;
    k[i].ds = lagrangian(spec, q, v);
  }
  for (Index i = 0; i < s; ++i) {
    const double b = tab.weights(i);
    if (b != 0.0) {
      y.q += dt * b * k[i].dq;
      y.v += dt * b * k[i].dv;
      y.action += dt * b * k[i].ds;
    }
  }
}

struct StageJet {
  Vec dq;
  Vec dv;
  double ds = 0.0;
  Mat dsens;    // 2N x 2N
  Vec daction;  // 2N
};

void rk_step_jet(const ButcherTableau& tab, const ProblemSpec& spec, JetState& y, double dt) {
  const Index s = tab.stage_count();
  const Index n = spec.n;
  std::vector<StageJet> k(s);
  for (Index i = 0; i < s; ++i) {
    Vec q = y.state.q;
    Vec v = y.state.v;
    Mat sens = y.sensitivity;
    for (Index j = 0; j < i; ++j) {
      const double a = tab.stages(i, j);
      if (a != 0.0) {
        q += dt * a * k[j].dq;
        v += dt * a * k[j].dv;
        sens += dt * a * k[j].dsens;
      }
    }
    const FieldValue field = el_field(spec, q, v);
    const FieldJacobian jac = el_field_jacobian(spec, q, v, field);
    const LagrangianGradient grad = d_lagrangian(spec, q, v);
    const auto sq = sens.topRows(n);
    const auto sv = sens.bottomRows(n);
    k[i].dq = v;
    k[i].dv = field.accel;
    k[i].ds = lagrangian(spec, q, v);
    k[i].dsens.resize(2 * n, 2 * n);
    k[i].dsens.topRows(n) = sv;
    k[i].dsens.bottomRows(n) = jac.daccel_dq * sq + jac.daccel_dv * sv;
    k[i].daction = sq.transpose() * grad.dq + sv.transpose() * grad.dv;
  }
  for (Index i = 0; i < s; ++i) {
    const double b = tab.weights(i);
    if (b != 0.0) {
      y.state.q += dt * b * k[i].dq;
      y.state.v += dt * b * k[i].dv;
      y.state.action += dt * b * k[i].ds;
      y.sensitivity += dt * b * k[i].dsens;
      y.action_gradient += dt * b * k[i].daction;
    }
  }
}

}  // namespace

ExtendedState rk_flow(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                      double t, int substeps) {
  check_flow_args(tableau, spec, w, substeps);
  ExtendedState y{w.q, w.v, 0.0};
  if (t == 0.0) {
    return y;
  }
  const double dt = t / substeps;
  for (int i = 0; i < substeps; ++i) {
    rk_step(tableau, spec, y, dt);
  }
  return y;
}

JetState rk_flow_jet(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                     double t, int substeps) {
  check_flow_args(tableau, spec, w, substeps);
  const Index n = spec.n;
  JetState y{{w.q, w.v, 0.0}, Mat::Identity(2 * n, 2 * n), Vec::Zero(2 * n)};
  if (t == 0.0) {
    return y;
  }
  const double dt = t / substeps;
  for (int i = 0; i < substeps; ++i) {
    rk_step_jet(tableau, spec, y, dt);
  }
  return y;
}

namespace {

// Solves rk_flow(w', -t) = w for w' and returns the jet of the reverse flow at w'.
JetState adjoint_preimage(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                          double t, int substeps, double tol, int max_iter, State& preimage) {
  const Index n = spec.n;
  Vec target(2 * n);
  target << w.q, w.v;
  const double scale = std::max(1.0, target.lpNorm<Eigen::Infinity>());

  // Seed with the forward flow, which agrees with the adjoint to the method's order.
  const ExtendedState seed = rk_flow(tableau, spec, w, t, substeps);
  Vec x(2 * n);
  x << seed.q, seed.v;
  double last = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    preimage = {x.head(n), x.tail(n)};
    JetState back = rk_flow_jet(tableau, spec, preimage, -t, substeps);
    Vec r(2 * n);
    r << back.state.q - w.q, back.state.v - w.v;
    last = r.lpNorm<Eigen::Infinity>();
    if (last <= tol * scale) {
      return back;
    }
    if (it == max_iter) {
      break;
    }
    const Vec dx = back.sensitivity.partialPivLu().solve(r);
    x -= dx;
    if (dx.lpNorm<Eigen::Infinity>() <= tol * scale) {
      preimage = {x.head(n), x.tail(n)};
      return rk_flow_jet(tableau, spec, preimage, -t, substeps);
    }
  }
  throw NonConvergence("adjoint flow: Newton iteration did not converge", max_iter, last);
}

}  // namespace

ExtendedState adjoint_flow(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                           double t, int substeps, double tol, int max_iter) {
  return adjoint_flow_jet(tableau, spec, w, t, substeps, tol, max_iter).state;
}

JetState adjoint_flow_jet(const ButcherTableau& tableau, const ProblemSpec& spec, const State& w,
                          double t, int substeps, double tol, int max_iter) {
  check_flow_args(tableau, spec, w, substeps);
  const Index n = spec.n;
  if (t == 0.0) {
    return {{w.q, w.v, 0.0}, Mat::Identity(2 * n, 2 * n), Vec::Zero(2 * n)};
  }
  State preimage;
  const JetState back = adjoint_preimage(tableau, spec, w, t, substeps, tol, max_iter, preimage);
  // w' = Phi^{-1}(w) with Phi = R_{-t}:  Dw' = (DPhi(w'))^{-1},  S' = -S_{-t}(w').
  const Mat inv = back.sensitivity.partialPivLu().inverse();
  JetState out;
  out.state = {preimage.q, preimage.v, -back.state.action};
  out.sensitivity = inv;
  out.action_gradient = -(inv.transpose() * back.action_gradient);
  return out;
}

ExtendedState Layer::flow(const ProblemSpec& spec, const State& w, double t) const {
  if (adjoint) {
    return adjoint_flow(tableau, spec, w, t, substeps, adjoint_tol, adjoint_max_iter);
  }
  return rk_flow(tableau, spec, w, t, substeps);
}

JetState Layer::flow_jet(const ProblemSpec& spec, const State& w, double t) const {
  if (adjoint) {
    return adjoint_flow_jet(tableau, spec, w, t, substeps, adjoint_tol, adjoint_max_iter);
  }
  return rk_flow_jet(tableau, spec, w, t, substeps);
}

}  // namespace rkvi
