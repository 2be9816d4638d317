#include "rkvi/problems.hpp"

#include <cmath>

namespace rkvi {
namespace {

Vec vec(std::initializer_list<double> values) {
  Vec out(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) {
    out(i++) = x;
  }
  return out;
}

std::vector<Mat> zero_mats(Index count, Index rows, Index cols) {
  return std::vector<Mat>(static_cast<std::size_t>(count), Mat::Zero(rows, cols));
}

void set_identity_mass(ProblemSpec& s) {
  const Index n = s.n;
  s.mass = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  s.d_mass = [n](const Vec&) { return zero_mats(n, n, n); };
  s.d2_mass = [n](const Vec&) {
    return std::vector<std::vector<Mat>>(static_cast<std::size_t>(n), zero_mats(n, n, n));
  };
}

void set_zero_one_form(ProblemSpec& s) {
  const Index n = s.n;
  s.one_form = [n](const Vec&) { return Vec(Vec::Zero(n)); };
  s.d_one_form = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
  s.d2_one_form = [n](const Vec&) { return zero_mats(n, n, n); };
}

// V(q) = sum of q[i] over the given indices.
void set_linear_potential(ProblemSpec& s, std::vector<Index> indices) {
  const Index n = s.n;
  s.potential = [indices](const Vec& q) {
    double v = 0.0;
    for (Index i : indices) {
      v += q(i);
    }
    return v;
  };
  s.d_potential = [n, indices](const Vec&) {
    Vec g = Vec::Zero(n);
    for (Index i : indices) {
      g(i) = 1.0;
    }
    return g;
  };
  s.d2_potential = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
}

// g(q) = |q|^2 - 1.
void set_unit_sphere(ProblemSpec& s) {
  s.d = 1;
  s.constraint = [](const Vec& q) { return vec({q.squaredNorm() - 1.0}); };
  s.d_constraint = [](const Vec& q) { return Mat(2.0 * q.transpose()); };
  s.d2_constraint_contract = [](const Vec&, const Vec& u) { return Mat(2.0 * u.transpose()); };
  s.d3_constraint_contract = [n = s.n](const Vec&, const Vec&, const Vec&) {
    return Mat(Mat::Zero(1, n));
  };
}

ProblemSpec circle() {
  ProblemSpec s;
  s.n = 2;
  set_identity_mass(s);
  set_zero_one_form(s);
  s.potential = [](const Vec&) { return 0.0; };
  s.d_potential = [](const Vec&) { return Vec(Vec::Zero(2)); };
  s.d2_potential = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  set_unit_sphere(s);
  return s;
}

ProblemSpec sphere_pendulum() {
  ProblemSpec s;
  s.n = 3;
  set_identity_mass(s);
  set_zero_one_form(s);
  set_linear_potential(s, {2});
  set_unit_sphere(s);
  return s;
}

ProblemSpec magnetic_sphere(double kappa) {
  ProblemSpec s = sphere_pendulum();
  s.one_form = [kappa](const Vec& q) { return vec({-kappa * q(1), kappa * q(0), 0.0}); };
  s.d_one_form = [kappa](const Vec&) {
    Mat d = Mat::Zero(3, 3);
    d(0, 1) = -kappa;
    d(1, 0) = kappa;
    return d;
  };
  return s;
}

// Two unit links: |q1|^2 - 1 and |q2 - q1|^2 - 1.
ProblemSpec double_sphere_pendulum() {
  ProblemSpec s;
  s.n = 6;
  s.d = 2;
  set_identity_mass(s);
  set_zero_one_form(s);
  set_linear_potential(s, {2, 5});
  s.constraint = [](const Vec& q) {
    return vec({q.head(3).squaredNorm() - 1.0, (q.tail(3) - q.head(3)).squaredNorm() - 1.0});
  };
  s.d_constraint = [](const Vec& q) {
    const Vec r = q.tail(3) - q.head(3);
    Mat g = Mat::Zero(2, 6);
    g.block(0, 0, 1, 3) = 2.0 * q.head(3).transpose();
    g.block(1, 0, 1, 3) = -2.0 * r.transpose();
    g.block(1, 3, 1, 3) = 2.0 * r.transpose();
    return g;
  };
  s.d2_constraint_contract = [](const Vec&, const Vec& u) {
    const Vec du = u.tail(3) - u.head(3);
    Mat h = Mat::Zero(2, 6);
    h.block(0, 0, 1, 3) = 2.0 * u.head(3).transpose();
    h.block(1, 0, 1, 3) = -2.0 * du.transpose();
    h.block(1, 3, 1, 3) = 2.0 * du.transpose();
    return h;
  };
  s.d3_constraint_contract = [](const Vec&, const Vec&, const Vec&) {
    return Mat(Mat::Zero(2, 6));
  };
  return s;
}

// m(q) = (1 + q1^2 / 2) I on the unit circle.
ProblemSpec curved_mass_circle() {
  ProblemSpec s = circle();
  s.mass = [](const Vec& q) { return Mat((1.0 + 0.5 * q(0) * q(0)) * Mat::Identity(2, 2)); };
  s.d_mass = [](const Vec& q) {
    return std::vector<Mat>{q(0) * Mat::Identity(2, 2), Mat::Zero(2, 2)};
  };
  s.d2_mass = [](const Vec&) {
    std::vector<std::vector<Mat>> d2(2, zero_mats(2, 2, 2));
    d2[0][0] = Mat::Identity(2, 2);
    return d2;
  };
  return s;
}

// g(q) = q1^4 + q2^2 - 1, V = q2.
ProblemSpec quartic_curve() {
  ProblemSpec s;
  s.n = 2;
  s.d = 1;
  set_identity_mass(s);
  set_zero_one_form(s);
  set_linear_potential(s, {1});
  s.constraint = [](const Vec& q) { return vec({std::pow(q(0), 4) + q(1) * q(1) - 1.0}); };
  s.d_constraint = [](const Vec& q) {
    Mat g(1, 2);
    g << 4.0 * std::pow(q(0), 3), 2.0 * q(1);
    return g;
  };
  s.d2_constraint_contract = [](const Vec& q, const Vec& u) {
    Mat h(1, 2);
    h << 12.0 * q(0) * q(0) * u(0), 2.0 * u(1);
    return h;
  };
  s.d3_constraint_contract = [](const Vec& q, const Vec& u, const Vec& w) {
    Mat t = Mat::Zero(1, 2);
    t(0, 0) = 24.0 * q(0) * u(0) * w(0);
    return t;
  };
  return s;
}

Mat rotation_generator(Index n, Index offset_count, Index i, Index j) {
  // Simultaneous rotation in the (i, j) plane of every 3-block.
  Mat xi = Mat::Zero(n, n);
  for (Index b = 0; b < offset_count; ++b) {
    xi(3 * b + i, 3 * b + j) = -1.0;
    xi(3 * b + j, 3 * b + i) = 1.0;
  }
  return xi;
}

Mat planar_rotation() {
  Mat xi(2, 2);
  xi << 0.0, -1.0, 1.0, 0.0;
  return xi;
}

std::vector<NamedProblem> build_catalog() {
  std::vector<NamedProblem> out;
  const State pendulum_state{vec({0.6, 0.0, -0.8}), vec({0.0, 0.8, 0.0})};
  const State pendulum_rest{vec({0.0, 0.0, -1.0}), Vec::Zero(3)};
  const Generator z_rotation{"z-rotation", rotation_generator(3, 1, 0, 1), true};
  const Generator x_rotation{"x-rotation", rotation_generator(3, 1, 1, 2), false};

  out.push_back({"circle",
                 "free particle on the unit circle",
                 circle(),
                 {vec({1.0, 0.0}), vec({0.0, 1.0})},
                 State{vec({1.0, 0.0}), Vec::Zero(2)},
                 {{{"rotation", planar_rotation(), true}}}});
  out.push_back({"sphere-pendulum",
                 "unit spherical pendulum, V = q3",
                 sphere_pendulum(),
                 pendulum_state,
                 pendulum_rest,
                 {{z_rotation, x_rotation}}});
  out.push_back({"double-sphere-pendulum",
                 "two unit links in 3D, V = q1_3 + q2_3",
                 double_sphere_pendulum(),
                 {vec({0.6, 0.0, -0.8, 0.6, 0.6, -1.6}), vec({0.0, 0.5, 0.0, 0.3, 0.5, 0.0})},
                 State{vec({0.0, 0.0, -1.0, 0.0, 0.0, -2.0}), Vec::Zero(6)},
                 {{{"z-rotation", rotation_generator(6, 2, 0, 1), true}}}});
  out.push_back({"magnetic-sphere",
                 "spherical pendulum with one-form a = 0.5 (-q2, q1, 0)",
                 magnetic_sphere(0.5),
                 pendulum_state,
                 pendulum_rest,
                 {{z_rotation}}});
  out.push_back({"curved-mass-circle",
                 "unit circle with mass (1 + q1^2 / 2) I",
                 curved_mass_circle(),
                 {vec({0.6, 0.8}), vec({-0.8, 0.6})},
                 State{vec({1.0, 0.0}), Vec::Zero(2)},
                 {}});
  out.push_back({"quartic-curve",
                 "particle on q1^4 + q2^2 = 1, V = q2",
                 quartic_curve(),
                 {vec({1.0, 0.0}), vec({0.0, 1.0})},
                 State{vec({0.0, -1.0}), Vec::Zero(2)},
                 {}});
  return out;
}

}  // namespace

const std::vector<NamedProblem>& catalog() {
  static const std::vector<NamedProblem> problems = build_catalog();
  return problems;
}

const NamedProblem& find_problem(const std::string& name) {
  for (const auto& p : catalog()) {
    if (p.name == name) {
      return p;
    }
  }
  std::string known;
  for (const auto& p : catalog()) {
    known += (known.empty() ? "" : ", ") + p.name;
  }
  throw ConfigError("problem", "unknown problem '" + name + "' (known: " + known + ")");
}

std::vector<std::string> problem_names() {
  std::vector<std::string> names;
  for (const auto& p : catalog()) {
    names.push_back(p.name);
  }
  return names;
}

State reference_solution(const ProblemSpec& spec, const State& w0, double t_final, double fine_h) {
  if (t_final == 0.0) {
    return w0;
  }
  if (!(fine_h > 0.0)) {
    throw ConfigError("fine-h", "must be positive");
  }
  const int steps = static_cast<int>(std::ceil(std::abs(t_final) / fine_h - 1e-9));
  const ExtendedState r =
      rk_flow(ButcherTableau::by_name("rk4"), spec, w0, t_final, std::max(steps, 1));
  const Vec q = project(spec, r.q, r.q).q;
  return {q, tangential_projection(spec, q, r.v)};
}

}  // namespace rkvi
