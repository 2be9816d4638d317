#include "doctest.h"

#include <unsupported/Eigen/MatrixFunctions>

#include "support.hpp"

using namespace rkvi;
using rkvi::test::vec;

namespace {

const ProblemSpec& circle() { return find_problem("circle").spec; }
const ProblemSpec& pendulum() { return find_problem("sphere-pendulum").spec; }
const ButcherTableau& rk4() {
  static const ButcherTableau t = ButcherTableau::by_name("rk4");
  return t;
}

Vec extended(const ExtendedState& e) {
  Vec x(2 * e.q.size() + 1);
  x << e.q, e.v, e.action;
  return x;
}

// m = I, V = 1/2 q^T K q, g = q3 (linear): the field is linear in (q, v).
ProblemSpec linear_field() {
  Mat k(3, 3);
  k << 2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0;
  ProblemSpec s;
  s.n = 3;
  s.d = 1;
  s.mass = [](const Vec&) { return Mat(Mat::Identity(3, 3)); };
  s.one_form = [](const Vec&) { return Vec(Vec::Zero(3)); };
  s.potential = [k](const Vec& q) { return 0.5 * q.dot(k * q); };
  s.d_potential = [k](const Vec& q) { return Vec(k * q); };
  s.d2_potential = [k](const Vec&) { return k; };
  s.constraint = [](const Vec& q) { return vec({q(2)}); };
  s.d_constraint = [](const Vec&) { return Mat(Mat::Identity(3, 3).bottomRows(1)); };
  return with_fd_derivatives(s);
}

}  // namespace

TEST_CASE("tableaux") {
  for (const auto& name : ButcherTableau::names()) {
    const auto t = ButcherTableau::by_name(name);
    CHECK(t.is_explicit());
    CHECK(std::abs(t.weights.sum() - 1.0) <= 1e-15);
    for (Index i = 0; i < t.stage_count(); ++i) {
      CHECK(std::abs(t.stages.row(i).sum() - t.nodes(i)) <= 1e-15);
    }
  }
  CHECK(ButcherTableau::by_name("rk4").order == 4);
  CHECK_THROWS_AS(ButcherTableau::by_name("dopri"), ConfigError);
}

TEST_CASE("zero time is the identity") {
  const State w{vec({0.6, 0.0, -0.8}), vec({0.0, 0.8, 0.0})};
  const auto e = rk_flow(rk4(), pendulum(), w, 0.0);
  CHECK(test::inf_norm(Vec(e.q - w.q)) == 0.0);
  CHECK(test::inf_norm(Vec(e.v - w.v)) == 0.0);
  CHECK(e.action == 0.0);
  const auto j = rk_flow_jet(rk4(), pendulum(), w, 0.0);
  CHECK(test::inf_norm(Mat(j.sensitivity - Mat::Identity(6, 6))) == 0.0);
  CHECK(test::inf_norm(j.action_gradient) == 0.0);
  const auto a = adjoint_flow(rk4(), pendulum(), w, 0.0);
  CHECK(test::inf_norm(Vec(a.q - w.q)) == 0.0);
}

TEST_CASE("one explicit Euler step on the circle") {
  const auto e = rk_flow(ButcherTableau::by_name("euler"), circle(), {vec({1, 0}), vec({0, 1})}, 0.1);
  CHECK(test::inf_norm(Vec(e.q - vec({1.0, 0.1}))) <= 1e-15);
  CHECK(test::inf_norm(Vec(e.v - vec({-0.1, 1.0}))) <= 1e-15);
  CHECK(e.action == doctest::Approx(0.05).epsilon(1e-14));
}

TEST_CASE("rk4 self-convergence is fifth order over one step") {
  const State w = find_problem("sphere-pendulum").default_state;
  const double t = 0.1;
  const Vec fine = extended(rk_flow(rk4(), pendulum(), w, t, 200));
  // One step of size t and t/2 against a fine reference over [0, t].
  const double e1 = test::inf_norm(Vec(extended(rk_flow(rk4(), pendulum(), w, t)) - fine));
  const double e2 = test::inf_norm(Vec(extended(rk_flow(rk4(), pendulum(), w, t / 2)) -
                                       extended(rk_flow(rk4(), pendulum(), w, t / 2, 100))));
  const double ratio = e1 / e2;
  CHECK(ratio > std::pow(2.0, 4.6));
  CHECK(ratio < std::pow(2.0, 5.4));
}

TEST_CASE("flow jet matches differences of the flow") {
  auto check = [](const ProblemSpec& s, const State& w, double t, int substeps,
                  const ButcherTableau& tab) {
    const auto j = rk_flow_jet(tab, s, w, t, substeps);
    const Mat fd = test::fd_jacobian(
        [&](const Vec& x) { return extended(rk_flow(tab, s, test::unstack(x), t, substeps)); },
        test::stack(w), 1e-4);
    const Index n = s.n;
    CHECK(relative_error(j.sensitivity, fd.topRows(2 * n)) <= 1e-6);
    CHECK(relative_error(j.action_gradient, Vec(fd.row(2 * n).transpose())) <= 1e-6);
    const auto e = rk_flow(tab, s, w, t, substeps);
    CHECK(test::inf_norm(Vec(j.state.q - e.q)) <= 1e-15);
    CHECK(std::abs(j.state.action - e.action) <= 1e-15);
  };
  check(circle(), {vec({1, 0}), vec({0, 1})}, 0.1, 1, rk4());
  for (const auto& p : catalog()) {
    INFO(p.name);
    for (const auto& name : ButcherTableau::names()) {
      check(p.spec, p.default_state, -0.07, 2, ButcherTableau::by_name(name));
    }
  }
  std::mt19937 rng(17);
  const auto rp = test::random_problem(rng, 4, 2);
  check(rp.spec, rp.state, 0.05, 1, rk4());
}

TEST_CASE("jets compose") {
  const State w = find_problem("magnetic-sphere").default_state;
  const ProblemSpec& s = find_problem("magnetic-sphere").spec;
  const auto a = rk_flow_jet(rk4(), s, w, 0.05);
  const auto b = rk_flow_jet(rk4(), s, a.state.state(), 0.05);
  const auto ab = rk_flow_jet(rk4(), s, w, 0.1, 2);
  CHECK(test::inf_norm(Mat(ab.sensitivity - b.sensitivity * a.sensitivity)) <= 1e-12);
  const Vec grad = a.action_gradient + a.sensitivity.transpose() * b.action_gradient;
  CHECK(test::inf_norm(Vec(ab.action_gradient - grad)) <= 1e-12);
}

TEST_CASE("linear field: sensitivity is the stability polynomial of the field matrix") {
  const ProblemSpec s = linear_field();
  const State w{vec({0.3, -0.1, 0.0}), vec({0.2, 0.4, 0.0})};
  // Field matrix F with d(q, v)/dt = F (q, v) on the constraint plane.
  const auto f = el_field(s, w.q, w.v);
  const auto fj = el_field_jacobian(s, w.q, w.v, f);
  Mat field = Mat::Zero(6, 6);
  field.block(0, 3, 3, 3) = Mat::Identity(3, 3);
  field.block(3, 0, 3, 3) = fj.daccel_dq;
  field.block(3, 3, 3, 3) = fj.daccel_dv;
  const double t = 0.2;
  const Mat z = t * field;
  const Mat z2 = z * z;
  const Mat stability = Mat::Identity(6, 6) + z + z2 / 2.0 + z2 * z / 6.0 + z2 * z2 / 24.0;
  const auto j = rk_flow_jet(rk4(), s, w, t);
  CHECK(test::inf_norm(Mat(j.sensitivity - stability)) <= 1e-12);
  // And it approximates the exact exponential to fifth order.
  CHECK(test::inf_norm(Mat(j.sensitivity - z.exp())) <= 1e-4);
}

TEST_CASE("adjoint of explicit Euler satisfies its defining relation") {
  const auto euler = ButcherTableau::by_name("euler");
  const State w{vec({0.6, 0.8}), vec({-0.8, 0.6})};
  for (double t : {0.1, -0.05}) {
    const auto a = adjoint_flow(euler, circle(), w, t);
    const auto back = rk_flow(euler, circle(), a.state(), -t);
    CHECK(test::inf_norm(Vec(back.q - w.q)) <= 1e-12);
    CHECK(test::inf_norm(Vec(back.v - w.v)) <= 1e-12);
    CHECK(std::abs(a.action + back.action) <= 1e-12);
  }
}

TEST_CASE("adjoint and method share the leading error term for even order") {
  // The adjoint's principal error term is (-1)^p times the method's, so the gap
  // is O(h^(p+1)) for odd p and O(h^(p+2)) for even p.
  const State w = find_problem("sphere-pendulum").default_state;
  auto rate = [&](const ButcherTableau& t) {
    auto gap = [&](double h) {
      return test::inf_norm(
          Vec(extended(adjoint_flow(t, pendulum(), w, h)) - extended(rk_flow(t, pendulum(), w, h))));
    };
    return std::log2(gap(0.1) / gap(0.05));
  };
  const double r4 = rate(rk4());
  CHECK(r4 > 5.6);
  CHECK(r4 < 6.4);
  const double r1 = rate(ButcherTableau::by_name("euler"));
  CHECK(r1 > 1.6);
  CHECK(r1 < 2.4);
}

TEST_CASE("adjoint jet matches differences of the adjoint flow") {
  const auto mid = ButcherTableau::by_name("midpoint");
  for (const auto& p : catalog()) {
    INFO(p.name);
    const auto j = adjoint_flow_jet(mid, p.spec, p.default_state, 0.05);
    const Mat fd = test::fd_jacobian(
        [&](const Vec& x) { return extended(adjoint_flow(mid, p.spec, test::unstack(x), 0.05)); },
        test::stack(p.default_state), 1e-4);
    CHECK(relative_error(j.sensitivity, fd.topRows(2 * p.spec.n)) <= 1e-6);
    CHECK(relative_error(j.action_gradient, Vec(fd.bottomRows(1).transpose())) <= 1e-6);
  }
}

TEST_CASE("layer dispatches to the adjoint") {
  Layer layer;
  layer.tableau = ButcherTableau::by_name("heun");
  layer.adjoint = true;
  const State w = find_problem("circle").default_state;
  const auto a = layer.flow(circle(), w, 0.1);
  const auto b = adjoint_flow(layer.tableau, circle(), w, 0.1);
  CHECK(test::inf_norm(Vec(a.q - b.q)) == 0.0);
}

TEST_CASE("energy of a fine flow is conserved") {
  const State w = find_problem("sphere-pendulum").default_state;
  const double e0 = energy(pendulum(), w);
  double previous = 1.0;
  for (int substeps : {10, 20, 40}) {
    const auto e = rk_flow(rk4(), pendulum(), w, 1.0, substeps);
    const double drift = std::abs(energy(pendulum(), e.state()) - e0);
    CHECK(drift < previous);
    previous = drift;
  }
  CHECK(previous <= 1e-6);
}
