#include "rkvi/del_solver.hpp"

#include <array>
#include <cmath>

namespace rkvi {

ApproximateVariant parse_variant(const std::string& name) {
  if (name == "as-printed") {
    return ApproximateVariant::kAsPrinted;
  }
  if (name == "alpha-corrected") {
    return ApproximateVariant::kAlphaCorrected;
  }
  throw ConfigError("variant", "expected 'as-printed' or 'alpha-corrected', got '" + name + "'");
}

std::string to_string(ApproximateVariant variant) {
  return variant == ApproximateVariant::kAsPrinted ? "as-printed" : "alpha-corrected";
}

FreezePoint parse_freeze_point(const std::string& name) {
  if (name == "q1") {
    return FreezePoint::kQ1;
  }
  if (name == "q-bar") {
    return FreezePoint::kQBar;
  }
  throw ConfigError("freeze-point", "expected 'q1' or 'q-bar', got '" + name + "'");
}

void StepConfig::validate() const {
  if (h == 0.0 || !std::isfinite(h)) {
    throw ConfigError("h", "time step must be nonzero and finite");
  }
  bias.validate();
  ButcherTableau::by_name(tableau);
  if (substeps < 1) {
    throw ConfigError("substeps", "must be at least 1");
  }
  if (!(tol_fixed_point > 0.0)) {
    throw ConfigError("tol", "fixed-point tolerance must be positive");
  }
  if (!(tol_constraint > 0.0) || !(tol_projection > 0.0)) {
    throw ConfigError("tol", "constraint tolerances must be positive");
  }
  if (max_iter < 1) {
    throw ConfigError("max-iter", "must be at least 1");
  }
}

LayerPair StepConfig::layers() const {
  const ButcherTableau tab = ButcherTableau::by_name(tableau);
  if (adjoint_backward) {
    return LayerPair::with_adjoint_backward(tab, substeps);
  }
  Layer layer;
  layer.tableau = tab;
  layer.substeps = substeps;
  return LayerPair::single(layer);
}

// ---------------------------------------------------------------------------
// Block layouts

namespace {

template <class T>
struct Field {
  const char* name;
  Vec T::*member;
  bool constraint_sized;
};

using V = Stage4Variables;
using R = Stage4Residual;

const std::array<Field<V>, 17> kVariableFields = {{
    {"q2", &V::q2, false},
    {"v2", &V::v2, false},
    {"q1_minus", &V::q1_minus, false},
    {"q_bar", &V::q_bar, false},
    {"q2_plus", &V::q2_plus, false},
    {"theta_plus", &V::theta_plus, true},
    {"lambda_minus", &V::lambda_minus, false},
    {"lambda_plus", &V::lambda_plus, false},
    {"mu", &V::mu, false},
    {"lambda_hat_minus", &V::lambda_hat_minus, false},
    {"lambda_hat_plus", &V::lambda_hat_plus, false},
    {"mu_hat_1", &V::mu_hat_1, false},
    {"mu_hat_2", &V::mu_hat_2, false},
    {"nu1_minus", &V::nu1_minus, true},
    {"nu2_minus", &V::nu2_minus, true},
    {"nu1_plus", &V::nu1_plus, true},
    {"nu2_plus", &V::nu2_plus, true},
}};

// Multipliers only; the primal unknowns are the first six variable fields.
constexpr std::size_t kFirstMultiplierField = 6;

const std::array<Field<R>, 17> kResidualFields = {{
    {"q1-minus", &R::s1, false},   {"q-bar", &R::s2, false},   {"w1-q-stationarity", &R::s3a, false},
    {"lambda-minus-tangent", &R::s3b, true},  {"lambda-hat-minus", &R::s3c, false}, {"w1-v-stationarity", &R::s4a, false},
    {"mu-tangent", &R::s4b, true},  {"mu-hat-1", &R::s4c, false}, {"w2-q-stationarity", &R::s5a, false},
    {"lambda-plus-tangent", &R::s5b, true},  {"lambda-hat-plus", &R::s5c, false}, {"w2-v-stationarity", &R::s6a, false},
    {"velocity-constraint", &R::s6b, true},  {"mu-hat-2", &R::s6c, false}, {"connection", &R::s7a, false},
    {"position-constraint", &R::s7b, true},  {"q2-plus", &R::s8, false},
}};

template <class T, std::size_t K>
T zeros_of(const std::array<Field<T>, K>& fields, Index n, Index d) {
  T out;
  for (const auto& f : fields) {
    out.*(f.member) = Vec::Zero(f.constraint_sized ? d : n);
  }
  return out;
}

template <class T, std::size_t K>
Vec flatten_of(const std::array<Field<T>, K>& fields, const T& value) {
  Index total = 0;
  for (const auto& f : fields) {
    total += (value.*(f.member)).size();
  }
  Vec out(total);
  Index offset = 0;
  for (const auto& f : fields) {
    const Vec& block = value.*(f.member);
    out.segment(offset, block.size()) = block;
    offset += block.size();
  }
  return out;
}

template <class T, std::size_t K>
T unflatten_of(const std::array<Field<T>, K>& fields, const Vec& x, Index n, Index d) {
  if (x.size() != 12 * n + 5 * d) {
    throw DimensionMismatch("step vector: expected length " + std::to_string(12 * n + 5 * d) +
                            ", got " + std::to_string(x.size()));
  }
  T out;
  Index offset = 0;
  for (const auto& f : fields) {
    const Index len = f.constraint_sized ? d : n;
    out.*(f.member) = x.segment(offset, len);
    offset += len;
  }
  return out;
}

}  // namespace

Stage4Variables Stage4Variables::zeros(Index n, Index d) { return zeros_of(kVariableFields, n, d); }
Vec Stage4Variables::flatten() const { return flatten_of(kVariableFields, *this); }
Stage4Variables Stage4Variables::unflatten(const Vec& x, Index n, Index d) {
  return unflatten_of(kVariableFields, x, n, d);
}

Stage4Residual Stage4Residual::zeros(Index n, Index d) { return zeros_of(kResidualFields, n, d); }
Vec Stage4Residual::flatten() const { return flatten_of(kResidualFields, *this); }
Stage4Residual Stage4Residual::unflatten(const Vec& x, Index n, Index d) {
  return unflatten_of(kResidualFields, x, n, d);
}

double Stage4Residual::max_norm() const {
  double m = 0.0;
  for (const auto& f : kResidualFields) {
    const Vec& b = this->*(f.member);
    if (b.size() > 0) {
      m = std::max(m, b.lpNorm<Eigen::Infinity>());
    }
  }
  return m;
}

std::vector<std::pair<std::string, double>> Stage4Residual::block_norms() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& f : kResidualFields) {
    const Vec& b = this->*(f.member);
    out.emplace_back(f.name, b.size() > 0 ? b.lpNorm<Eigen::Infinity>() : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full residual

namespace {

// Everything in the residual that depends on one state only.
struct Frame {
  State w;
  BoundaryData bd;
  Projection minus;  // P of the backward hat map
  Projection plus;   // P of the forward hat map
  saddle::SaddleFactorization dp_minus;
  saddle::SaddleFactorization dp_plus;
  Mat g;  // Dg(q)
  Mat c;  // v^T D^2 g(q)
};

Frame make_frame(const ProblemSpec& spec, const StepConfig& cfg, const LayerPair& layers,
                 const State& w, const Vec& seed_minus, const Vec& seed_plus) {
  BoundaryData bd = boundary_data(layers, spec, w, cfg.h, cfg.bias);
  Projection pm = project(spec, bd.hat_minus, seed_minus, cfg.tol_projection);
  Projection pp = project(spec, bd.hat_plus, seed_plus, cfg.tol_projection);
  auto fm = dproject_factor(spec, pm.q, pm.theta);
  auto fp = dproject_factor(spec, pp.q, pp.theta);
  return Frame{w,
               std::move(bd),
               std::move(pm),
               std::move(pp),
               std::move(fm),
               std::move(fp),
               spec.d_constraint(w.q),
               spec.d2_constraint_contract(w.q, w.v)};
}

Vec apply_dp(const saddle::SaddleFactorization& f, const Vec& lambda) {
  return f.solve(lambda, Vec::Zero(f.d())).x;
}

Stage4Residual evaluate(const ProblemSpec& spec, const Frame& f1, const Frame& f2,
                        const Stage4Variables& x) {
  const BoundaryData& b1 = f1.bd;
  const BoundaryData& b2 = f2.bd;
  Stage4Residual r;
  r.s1 = x.q1_minus - f1.minus.q;
  r.s2 = x.q_bar - f1.plus.q;

  r.s3a = b1.dq_hat_minus().transpose() * x.lambda_hat_minus + f1.g.transpose() * x.nu1_minus +
          b1.dq_hat_plus().transpose() * x.mu_hat_1 + f1.c.transpose() * x.nu2_minus -
          b1.dq_lh();
  r.s3b = spec.d_constraint(x.q1_minus) * x.lambda_minus;
  r.s3c = x.lambda_hat_minus - apply_dp(f1.dp_minus, x.lambda_minus);

  r.s4a = b1.dv_hat_plus().transpose() * x.mu_hat_1 + f1.g.transpose() * x.nu2_minus +
          b1.dv_hat_minus().transpose() * x.lambda_hat_minus - b1.dv_lh();
  r.s4b = spec.d_constraint(x.q_bar) * x.mu;
  r.s4c = x.mu_hat_1 - apply_dp(f1.dp_plus, x.mu);

  r.s5a = b2.dq_hat_plus().transpose() * x.lambda_hat_plus + f2.g.transpose() * x.nu1_plus -
          b2.dq_hat_minus().transpose() * x.mu_hat_2 + f2.c.transpose() * x.nu2_plus -
          b2.dq_lh();
  r.s5b = spec.d_constraint(x.q2_plus) * x.lambda_plus;
  r.s5c = x.lambda_hat_plus - apply_dp(f2.dp_plus, x.lambda_plus);

  r.s6a = b2.dv_lh() - f2.g.transpose() * x.nu2_plus -
          b2.dv_hat_plus().transpose() * x.lambda_hat_plus +
          b2.dv_hat_minus().transpose() * x.mu_hat_2;
  r.s6b = f2.g * x.v2;
  r.s6c = x.mu_hat_2 - apply_dp(f2.dp_minus, x.mu);

  r.s7a = b2.hat_minus - iota(spec, x.q_bar, x.theta_plus);
  r.s7b = spec.constraint(x.q2);
  r.s8 = x.q2_plus - f2.plus.q;
  return r;
}

void check_variables(const ProblemSpec& spec, const Stage4Variables& x) {
  for (const auto& f : kVariableFields) {
    require_size(x.*(f.member), f.constraint_sized ? spec.d : spec.n, f.name);
  }
}

}  // namespace

struct Stage4System::Impl {
  ProblemSpec spec;
  StepConfig config;
  LayerPair layers;
  State w1;
  Frame f1;

  Frame frame2(const Stage4Variables& x) const {
    return make_frame(spec, config, layers, x.w2(), x.q_bar, x.q2_plus);
  }
};

Stage4System::Stage4System(const ProblemSpec& spec, const StepConfig& config, const State& w1) {
  config.validate();
  require_size(w1.q, spec.n, "w1.q");
  require_size(w1.v, spec.n, "w1.v");
  const LayerPair layers = config.layers();
  Frame f1 = make_frame(spec, config, layers, w1, w1.q, w1.q);
  impl_.reset(new Impl{spec, config, layers, w1, std::move(f1)});
}

Stage4System::~Stage4System() = default;
Stage4System::Stage4System(Stage4System&&) noexcept = default;

const ProblemSpec& Stage4System::spec() const { return impl_->spec; }
const StepConfig& Stage4System::config() const { return impl_->config; }
const State& Stage4System::w1() const { return impl_->w1; }
const BoundaryData& Stage4System::w1_boundary() const { return impl_->f1.bd; }
const Projection& Stage4System::q_bar_projection() const { return impl_->f1.plus; }

Stage4Residual Stage4System::residual(const Stage4Variables& vars) const {
  check_variables(impl_->spec, vars);
  return evaluate(impl_->spec, impl_->f1, impl_->frame2(vars), vars);
}

Stage4Variables Stage4System::fit_multipliers(const Stage4Variables& vars) const {
  const ProblemSpec& spec = impl_->spec;
  check_variables(spec, vars);
  const Frame f2 = impl_->frame2(vars);

  // The residual is affine in the multipliers once the primal unknowns are fixed.
  Stage4Variables x = vars;
  for (std::size_t k = kFirstMultiplierField; k < kVariableFields.size(); ++k) {
    const auto& f = kVariableFields[k];
    x.*(f.member) = Vec::Zero(f.constraint_sized ? spec.d : spec.n);
  }
  const Vec r0 = evaluate(spec, impl_->f1, f2, x).flatten();
  std::vector<std::pair<Vec Stage4Variables::*, Index>> slots;
  for (std::size_t k = kFirstMultiplierField; k < kVariableFields.size(); ++k) {
    const auto& f = kVariableFields[k];
    for (Index i = 0; i < (f.constraint_sized ? spec.d : spec.n); ++i) {
      slots.emplace_back(f.member, i);
    }
  }
  Mat jac(r0.size(), static_cast<Index>(slots.size()));
  for (std::size_t c = 0; c < slots.size(); ++c) {
    (x.*(slots[c].first))(slots[c].second) = 1.0;
    jac.col(static_cast<Index>(c)) = evaluate(spec, impl_->f1, f2, x).flatten() - r0;
    (x.*(slots[c].first))(slots[c].second) = 0.0;
  }
  const Vec m = jac.completeOrthogonalDecomposition().solve(-r0);
  for (std::size_t c = 0; c < slots.size(); ++c) {
    (x.*(slots[c].first))(slots[c].second) = m(static_cast<Index>(c));
  }
  return x;
}

Stage4Variables Stage4System::initialize() const {
  const ProblemSpec& spec = impl_->spec;
  const StepConfig& cfg = impl_->config;
  const State& w1 = impl_->w1;
  const ExtendedState fwd = impl_->layers.for_time(cfg.h).flow(spec, w1, cfg.h);

  Stage4Variables x = Stage4Variables::zeros(spec.n, spec.d);
  x.q2 = project(spec, fwd.q, w1.q, cfg.tol_projection).q;
  x.v2 = tangential_projection(spec, x.q2, fwd.v);
  x.q1_minus = impl_->f1.minus.q;
  x.q_bar = impl_->f1.plus.q;
  const BoundaryValues b2 = boundary_values(impl_->layers, spec, x.w2(), cfg.h, cfg.bias);
  x.q2_plus = project(spec, b2.hat_plus, x.q2, cfg.tol_projection).q;
  x.theta_plus = fiber_coordinate(spec, x.q_bar, b2.hat_minus);
  return fit_multipliers(x);
}

Stage4Residual residual(const ProblemSpec& spec, const StepConfig& config, const State& w1,
                        const Stage4Variables& vars) {
  return Stage4System(spec, config, w1).residual(vars);
}

Stage4Variables initialize(const ProblemSpec& spec, const StepConfig& config, const State& w1) {
  return Stage4System(spec, config, w1).initialize();
}

// ---------------------------------------------------------------------------
// Approximate system

namespace {

Vec freeze_configuration(const ProblemSpec& spec, const StepConfig& config, const State& w1) {
  if (config.freeze_point == FreezePoint::kQ1) {
    return w1.q;
  }
  const BoundaryValues b = boundary_values(config.layers(), spec, w1, config.h, config.bias);
  return project(spec, b.hat_plus, w1.q, config.tol_projection).q;
}

saddle::SaddleSystem identity_system(const Mat& g0) {
  return {Mat::Identity(g0.cols(), g0.cols()), g0, saddle::Layout::kPositiveCoupling};
}

saddle::SaddleSystem mass_system(const Mat& m0, const Mat& g0) {
  return {m0, g0, saddle::Layout::kNegativeCoupling};
}

}  // namespace

ApproximateSystem::ApproximateSystem(const ProblemSpec& spec, const StepConfig& config,
                                     const State& w1)
    : ApproximateSystem(spec, config, w1, freeze_configuration(spec, config, w1)) {}

ApproximateSystem::ApproximateSystem(const ProblemSpec& spec, const StepConfig& config,
                                     const State& w1, const Vec& freeze_q)
    : n_(spec.n),
      d_(spec.d),
      h_(config.h),
      bias_(config.bias),
      variant_(config.variant),
      g0_(spec.d_constraint(freeze_q)),
      m0_(spec.mass(freeze_q)),
      c1_(spec.d2_constraint_contract(w1.q, w1.v)),
      a0_(spec.one_form(freeze_q)),
      identity_fact_(identity_system(g0_)),
      mass_fact_(mass_system(m0_, g0_)) {}

Vec ApproximateSystem::dp0(const Vec& lambda) const {
  return identity_fact_.solve(lambda, Vec::Zero(d_)).x;
}

Stage4Residual ApproximateSystem::apply(const Stage4Variables& x) const {
  const double am = bias_.minus;
  const double ap = bias_.plus;
  const double av = variant_ == ApproximateVariant::kAsPrinted ? ap : am;
  const Mat gt = g0_.transpose();
  Stage4Residual r;
  r.s1 = x.q1_minus;
  r.s2 = x.q_bar;
  r.s3a = x.lambda_minus + x.mu + gt * x.nu1_minus + c1_.transpose() * x.nu2_minus;
  r.s3b = g0_ * x.lambda_minus;
  r.s3c = x.lambda_hat_minus - dp0(x.lambda_minus);
  r.s4a = h_ * am * x.lambda_minus + h_ * ap * x.mu + gt * x.nu2_minus;
  r.s4b = g0_ * x.mu;
  r.s4c = x.mu_hat_1 - dp0(x.mu);
  r.s5a = x.lambda_plus - x.mu + gt * x.nu1_plus + c1_.transpose() * x.nu2_minus;
  r.s5b = g0_ * x.lambda_plus;
  r.s5c = x.lambda_hat_plus - dp0(x.lambda_plus);
  r.s6a = h_ * m0_ * x.v2 - gt * x.nu2_plus - h_ * ap * x.lambda_plus + h_ * am * x.mu;
  r.s6b = g0_ * x.v2;
  r.s6c = x.mu_hat_2 - dp0(x.mu);
  r.s7a = x.q2 - x.q_bar - gt * x.theta_plus + h_ * av * x.v2;
  r.s7b = g0_ * (x.q2 - x.q_bar);
  r.s8 = x.q2_plus;
  return r;
}

Stage4Variables ApproximateSystem::solve(const Stage4Residual& r) const {
  const double am = bias_.minus;
  const double ap = bias_.plus;
  const double av = variant_ == ApproximateVariant::kAsPrinted ? ap : am;
  const Mat ct = c1_.transpose();
  Stage4Variables x;
  x.q1_minus = r.s1;
  x.q_bar = r.s2;
  x.q2_plus = r.s8;

  // alpha- s3b + alpha+ s4b with s4a: X = alpha- lambda- + alpha+ mu.
  const saddle::Solution sx = identity_fact_.solve(Vec(r.s4a / h_), Vec(am * r.s3b + ap * r.s4b));
  x.nu2_minus = h_ * sx.y;
  // s3a, s3b: Y = lambda- + mu.
  const saddle::Solution sy = identity_fact_.solve(Vec(r.s3a - ct * x.nu2_minus),
                                                   Vec(r.s3b + r.s4b));
  x.nu1_minus = sy.y;
  x.mu = sx.x - am * sy.x;
  x.lambda_minus = sy.x - x.mu;
  // s5a with s5b - s4b: Z = lambda+ - mu.
  const saddle::Solution sz = identity_fact_.solve(Vec(r.s5a - ct * x.nu2_minus),
                                                   Vec(r.s5b - r.s4b));
  x.nu1_plus = sz.y;
  x.lambda_plus = sz.x + x.mu;
  // s6a, s6b on the mass matrix, scaled by 1/h.
  const Vec rhs6 = r.s6a + h_ * ap * x.lambda_plus - h_ * am * x.mu;
  const saddle::Solution sv = mass_fact_.solve(Vec(rhs6 / h_), Vec(-r.s6b));
  x.v2 = sv.x;
  x.nu2_plus = h_ * sv.y;
  // s7a, s7b: delta = q2 - q_bar.
  const saddle::Solution sq = identity_fact_.solve(Vec(r.s7a - h_ * av * x.v2), r.s7b);
  x.q2 = x.q_bar + sq.x;
  x.theta_plus = -sq.y;
  // Hatted multipliers.
  x.lambda_hat_minus = r.s3c + dp0(x.lambda_minus);
  x.mu_hat_1 = r.s4c + dp0(x.mu);
  x.lambda_hat_plus = r.s5c + dp0(x.lambda_plus);
  x.mu_hat_2 = r.s6c + dp0(x.mu);
  return x;
}

Stage4Residual approximate_apply(const ProblemSpec& spec, const StepConfig& config,
                                 const Stage4Variables& vars, const State& w1) {
  return ApproximateSystem(spec, config, w1).apply(vars);
}

Stage4Variables approximate_solve(const ProblemSpec& spec, const StepConfig& config,
                                  const Stage4Residual& rhs, const State& w1) {
  return ApproximateSystem(spec, config, w1).solve(rhs);
}

// ---------------------------------------------------------------------------
// Fixed-point iteration

namespace {

Stage4Residual subtract(const Stage4Residual& a, const Stage4Residual& b, Index n, Index d) {
  return Stage4Residual::unflatten(a.flatten() - b.flatten(), n, d);
}

std::vector<Vec> constraint_forces(const ProblemSpec& spec, const State& w1,
                                   const Stage4Variables& x) {
  const Mat g1t = spec.d_constraint(w1.q).transpose();
  const Mat g2t = spec.d_constraint(x.q2).transpose();
  return {g1t * x.nu1_minus, g1t * x.nu2_minus, g2t * x.nu1_plus, g2t * x.nu2_plus};
}

double force_change(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(1.0, b[i].lpNorm<Eigen::Infinity>());
    m = std::max(m, (a[i] - b[i]).lpNorm<Eigen::Infinity>() / scale);
  }
  return m;
}

}  // namespace

StepResult step(const ProblemSpec& spec, const StepConfig& config, const State& w1) {
  const std::size_t fact_start = saddle::factorization_count();
  const Stage4System system(spec, config, w1);
  const ApproximateSystem approx(spec, config, w1);
  const Index n = spec.n;
  const Index d = spec.d;

  StepDiagnostics diag;
  Stage4Variables x = system.initialize();
  Stage4Residual r = approx.apply(x);
  std::vector<Vec> forces = constraint_forces(spec, w1, x);
  bool converged = false;
  int growth = 0;
  double last_norm = 0.0;
  for (int it = 0;; ++it) {
    const Stage4Residual f = system.residual(x);
    const double norm = f.max_norm();
    diag.residual_norms.push_back(norm);
    if (converged) {
      diag.final_residual = f.block_norms();
      diag.final_residual_norm = norm;
      break;
    }
    if (it > 0 && norm > last_norm) {
      if (++growth >= 3) {
        throw NonConvergence("step: residual grew for 3 consecutive iterations", it, norm);
      }
    } else {
      growth = 0;
    }
    last_norm = norm;
    if (!std::isfinite(norm)) {
      throw NonConvergence("step: residual is not finite", it, norm);
    }
    if (it == config.max_iter) {
      throw NonConvergence("step: fixed-point iteration did not converge", it, norm);
    }
    r = subtract(r, f, n, d);
    Stage4Variables next = approx.solve(r);
    const double update = std::max((next.q2 - x.q2).lpNorm<Eigen::Infinity>(),
                                   (next.v2 - x.v2).lpNorm<Eigen::Infinity>());
    std::vector<Vec> next_forces = constraint_forces(spec, w1, next);
    const double force_update = force_change(next_forces, forces);
    diag.update_norms.push_back(update);
    x = std::move(next);
    forces = std::move(next_forces);
    diag.iterations = it + 1;
    converged = update <= config.tol_fixed_point && force_update <= config.tol_fixed_point;
  }

  diag.constraint_violation = spec.constraint(x.q2).lpNorm<Eigen::Infinity>();
  diag.velocity_violation = (spec.d_constraint(x.q2) * x.v2).lpNorm<Eigen::Infinity>();
  if (diag.constraint_violation > config.tol_constraint ||
      diag.velocity_violation > config.tol_constraint) {
    throw NonConvergence("step: converged state violates the constraint tolerance",
                         diag.iterations,
                         std::max(diag.constraint_violation, diag.velocity_violation));
  }
  diag.constraint_forces = std::move(forces);
  diag.factorizations = saddle::factorization_count() - fact_start;
  State w2 = x.w2();
  diag.variables = std::move(x);
  return {std::move(w2), std::move(diag)};
}

Trajectory simulate(const ProblemSpec& spec, const StepConfig& config, const State& w0,
                    int n_steps, bool keep_diagnostics) {
  if (n_steps < 0) {
    throw ConfigError("steps", "must be non-negative");
  }
  config.validate();
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.states.push_back(w0);
  for (int i = 0; i < n_steps; ++i) {
    try {
      StepResult res = step(spec, config, traj.states.back());
      if (!keep_diagnostics) {
        StepDiagnostics slim;
        slim.iterations = res.diagnostics.iterations;
        slim.final_residual_norm = res.diagnostics.final_residual_norm;
        slim.constraint_violation = res.diagnostics.constraint_violation;
        slim.velocity_violation = res.diagnostics.velocity_violation;
        res.diagnostics = std::move(slim);
      }
      traj.states.push_back(std::move(res.w2));
      traj.diagnostics.push_back(std::move(res.diagnostics));
    } catch (const NonConvergence& e) {
      traj.error = "step " + std::to_string(i + 1) + ": " + e.what();
      break;
    } catch (const SingularSystem& e) {
      traj.error = "step " + std::to_string(i + 1) + ": " + e.what();
      break;
    }
  }
  return traj;
}

}  // namespace rkvi
