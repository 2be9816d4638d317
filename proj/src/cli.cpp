#include "rkvi/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace rkvi::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  return value;
}

long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") {
    return true;
  }
  if (t == "false" || t == "0" || t == "no" || t == "off") {
    return false;
  }
  throw ConfigError(key, "expected a boolean, got '" + text + "'");
}

// Accepts "0.1, 0.05", "[0.1, 0.05]" or whitespace separation.
std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  if (!t.empty() && t.front() == '[' && t.back() == ']') {
    t = t.substr(1, t.size() - 2);
  }
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream in(t);
  std::vector<double> out;
  std::string item;
  while (in >> item) {
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) {
    throw ConfigError(key, "expected a non-empty list of numbers");
  }
  return out;
}

std::string format_number(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

double state_distance(const State& a, const State& b) {
  return std::max(inf_norm(a.q - b.q), inf_norm(a.v - b.v));
}

std::vector<std::size_t> symmetry_indices(const NamedProblem& problem) {
  std::vector<std::size_t> out;
  const auto& gens = problem.symmetries.generators;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    if (gens[i].symmetry) {
      out.push_back(i);
    }
  }
  return out;
}

nlohmann::json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

void RunConfig::validate() const {
  find_problem(problem);
  try {
    ButcherTableau::by_name(tableau);
  } catch (const Error& e) {
    throw ConfigError("tableau", e.what());
  }
  Bias::make(alpha_minus, alpha_plus);
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ConfigError("h", "step size must be positive and finite");
  }
  if (steps && *steps < 0) {
    throw ConfigError("steps", "must be non-negative");
  }
  if (t_final && (!(*t_final >= 0.0) || !std::isfinite(*t_final))) {
    throw ConfigError("T", "must be non-negative and finite");
  }
  if (!(tol > 0.0)) {
    throw ConfigError("tol", "must be positive");
  }
  if (max_iter < 1) {
    throw ConfigError("max-iter", "must be at least 1");
  }
  parse_variant(variant);
  parse_freeze_point(freeze_point);
  if (substeps < 1) {
    throw ConfigError("substeps", "must be at least 1");
  }
  if (h_list.empty()) {
    throw ConfigError("h-list", "must not be empty");
  }
  for (double hv : h_list) {
    if (!(hv > 0.0) || !std::isfinite(hv)) {
      throw ConfigError("h-list", "every step size must be positive and finite");
    }
  }
  if (!(fd_step > 0.0)) {
    throw ConfigError("fd-step", "must be positive");
  }
  if (!(fine_h > 0.0)) {
    throw ConfigError("fine-h", "must be positive");
  }
  if (threads < 0) {
    throw ConfigError("threads", "must be non-negative");
  }
}

StepConfig RunConfig::step_config() const {
  StepConfig c;
  c.h = h;
  c.bias = Bias::make(alpha_minus, alpha_plus);
  c.tableau = tableau;
  c.adjoint_backward = adjoint_minus;
  c.substeps = substeps;
  c.tol_fixed_point = tol;
  c.max_iter = max_iter;
  c.freeze_point = parse_freeze_point(freeze_point);
  c.variant = parse_variant(variant);
  c.validate();
  return c;
}

int RunConfig::resolved_steps() const {
  if (steps) {
    return *steps;
  }
  if (t_final) {
    return static_cast<int>(std::lround(*t_final / h));
  }
  return 100;
}

double RunConfig::resolved_t_final() const {
  if (t_final) {
    return *t_final;
  }
  if (steps) {
    return *steps * h;
  }
  return 1.0;
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys{
      "problem", "tableau", "alpha-minus", "alpha-plus", "h",       "steps",
      "T",       "tol",     "max-iter",    "variant",    "freeze-point",
      "adjoint-minus",      "substeps",    "out",        "h-list",  "fd-step",
      "fine-h",  "seed",    "threads"};
  return keys;
}

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '_', '-');
  const std::string value = unquote(trim(raw_value));
  if (key == "problem") {
    c.problem = value;
  } else if (key == "tableau") {
    c.tableau = value;
  } else if (key == "alpha-minus") {
    c.alpha_minus = parse_double(key, value);
  } else if (key == "alpha-plus") {
    c.alpha_plus = parse_double(key, value);
  } else if (key == "h") {
    c.h = parse_double(key, value);
  } else if (key == "steps") {
    c.steps = static_cast<int>(parse_integer(key, value));
  } else if (key == "T" || key == "t") {
    c.t_final = parse_double("T", value);
  } else if (key == "tol") {
    c.tol = parse_double(key, value);
  } else if (key == "max-iter") {
    c.max_iter = static_cast<int>(parse_integer(key, value));
  } else if (key == "variant") {
    c.variant = value;
  } else if (key == "freeze-point") {
    c.freeze_point = value;
  } else if (key == "adjoint-minus") {
    c.adjoint_minus = parse_bool(key, value);
  } else if (key == "substeps") {
    c.substeps = static_cast<int>(parse_integer(key, value));
  } else if (key == "out") {
    c.out = value;
  } else if (key == "h-list") {
    c.h_list = parse_list(key, value);
  } else if (key == "fd-step") {
    c.fd_step = parse_double(key, value);
  } else if (key == "fine-h") {
    c.fine_h = parse_double(key, value);
  } else if (key == "seed") {
    c.seed = static_cast<unsigned>(parse_integer(key, value));
  } else if (key == "threads") {
    c.threads = static_cast<int>(parse_integer(key, value));
  } else {
    throw ConfigError(key, "unknown setting");
  }
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // '#' inside a quoted value is kept.
    bool quoted = false;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        quoted = ch != quote;
      } else if (ch == '"' || ch == '\'') {
        quoted = true;
        quote = ch;
      } else if (ch == '#') {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config", "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config", "line " + std::to_string(line_no) + ": empty key");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config", "cannot read '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  for (const auto& [key, value] : parse_config_text(buffer.str())) {
    apply_setting(config, key, value);
  }
}

double fitted_slope(const std::vector<double>& h, const std::vector<double>& error) {
  if (h.size() != error.size() || h.size() < 2) {
    throw DimensionMismatch("fitted_slope needs at least two (h, error) pairs");
  }
  const auto n = static_cast<double>(h.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]);
    const double y = std::log(error[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

int cmd_step(const RunConfig& config, std::ostream& out) {
  config.validate();
  const NamedProblem& problem = find_problem(config.problem);
  const StepConfig sc = config.step_config();
  const State& w1 = problem.default_state;
  const StepResult r = step(problem.spec, sc, w1);
  const StepDiagnostics& d = r.diagnostics;

  nlohmann::ordered_json record;
  record["problem"] = config.problem;
  record["tableau"] = config.tableau;
  record["alpha_minus"] = config.alpha_minus;
  record["alpha_plus"] = config.alpha_plus;
  record["h"] = config.h;
  record["variant"] = config.variant;
  record["q1"] = to_json(w1.q);
  record["v1"] = to_json(w1.v);
  record["q2"] = to_json(r.w2.q);
  record["v2"] = to_json(r.w2.v);
  record["iterations"] = d.iterations;
  record["update_norms"] = d.update_norms;
  record["residual"] = d.final_residual_norm;
  nlohmann::ordered_json blocks = nlohmann::ordered_json::object();
  for (const auto& [name, value] : d.final_residual) {
    blocks[name] = value;
  }
  record["residual_blocks"] = blocks;
  record["constraint_violation"] = d.constraint_violation;
  record["velocity_violation"] = d.velocity_violation;
  record["energy_change"] = energy(problem.spec, r.w2) - energy(problem.spec, w1);
  record["factorizations"] = d.factorizations;
  out << record.dump(2) << '\n';
  return kOk;
}

int cmd_simulate(const RunConfig& config, std::ostream& out) {
  config.validate();
  const NamedProblem& problem = find_problem(config.problem);
  const StepConfig sc = config.step_config();
  const int n_steps = config.resolved_steps();
  const Trajectory traj = simulate(problem.spec, sc, problem.default_state, n_steps, false);
  const Index n = problem.spec.n;
  const auto& gens = problem.symmetries.generators;

  out << "step,t";
  for (Index i = 0; i < n; ++i) {
    out << ",q" << i;
  }
  for (Index i = 0; i < n; ++i) {
    out << ",v" << i;
  }
  out << ",energy,g_norm";
  for (const auto& g : gens) {
    out << ",J_" << g.name;
  }
  out << ",iterations,residual\n";

  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const State& w = traj.states[k];
    out << k << ',' << format_number(static_cast<double>(k) * config.h);
    for (Index i = 0; i < n; ++i) {
      out << ',' << format_number(w.q(i));
    }
    for (Index i = 0; i < n; ++i) {
      out << ',' << format_number(w.v(i));
    }
    out << ',' << format_number(energy(problem.spec, w)) << ','
        << format_number(inf_norm(problem.spec.constraint(w.q)));
    for (std::size_t g = 0; g < gens.size(); ++g) {
      double j = std::nan("");
      try {
        j = discrete_momentum(problem.spec, sc, w, problem.symmetries, g);
      } catch (const GeneratorNotTangent&) {
      }
      out << ',' << format_number(j);
    }
    if (k == 0) {
      out << ",0,0\n";
    } else {
      const StepDiagnostics& d = traj.diagnostics[k - 1];
      out << ',' << d.iterations << ',' << format_number(d.final_residual_norm) << '\n';
    }
  }
  if (!traj.complete()) {
    throw NonConvergence("simulation stopped after " + std::to_string(traj.states.size() - 1) +
                             " steps: " + *traj.error,
                         0, std::nan(""));
  }
  return kOk;
}

int cmd_converge(const RunConfig& config, std::ostream& out) {
  config.validate();
  const NamedProblem& problem = find_problem(config.problem);
  const StepConfig base = config.step_config();
  const double t_final = config.resolved_t_final();
  const State reference =
      reference_solution(problem.spec, problem.default_state, t_final, config.fine_h);

  auto run_one = [&](double h) {
    StepConfig sc = base;
    sc.h = h;
    const int n_steps = static_cast<int>(std::lround(t_final / h));
    const Trajectory traj = simulate(problem.spec, sc, problem.default_state, n_steps, false);
    if (!traj.complete()) {
      throw NonConvergence("h = " + format_number(h) + ": " + *traj.error, 0, std::nan(""));
    }
    return state_distance(traj.states.back(), reference);
  };

  std::vector<double> errors(config.h_list.size());
  const std::size_t batch =
      config.threads > 0 ? static_cast<std::size_t>(config.threads) : config.h_list.size();
  for (std::size_t start = 0; start < config.h_list.size(); start += batch) {
    std::vector<std::future<double>> jobs;
    const std::size_t stop = std::min(config.h_list.size(), start + batch);
    for (std::size_t i = start; i < stop; ++i) {
      jobs.push_back(std::async(std::launch::async, run_one, config.h_list[i]));
    }
    for (std::size_t i = start; i < stop; ++i) {
      errors[i] = jobs[i - start].get();
    }
  }

  out << "h,error\n";
  for (std::size_t i = 0; i < errors.size(); ++i) {
    out << format_number(config.h_list[i]) << ',' << format_number(errors[i]) << '\n';
  }
  if (errors.size() >= 2) {
    out << "slope," << format_number(fitted_slope(config.h_list, errors)) << '\n';
  }
  return kOk;
}

int cmd_diagnose(const RunConfig& config, std::ostream& out) {
  config.validate();
  const NamedProblem& problem = find_problem(config.problem);
  const ProblemSpec& spec = problem.spec;
  const StepConfig sc = config.step_config();
  const State& w1 = problem.default_state;

  struct Row {
    std::string check;
    double measured;
    double threshold;
  };
  std::vector<Row> rows;

  rows.push_back({"symplecticity_defect",
                  symplecticity_defect(spec, sc, w1, config.fd_step), 1e-5});

  const StepResult r = step(spec, sc, w1);
  rows.push_back({"del_residual_check", del_residual_check(spec, sc, w1, r.w2).value(), 1e-8});

  const int n_steps = config.resolved_steps();
  const std::vector<std::size_t> gens = symmetry_indices(problem);
  if (!gens.empty()) {
    const Trajectory traj = simulate(spec, sc, w1, n_steps, false);
    if (!traj.complete()) {
      throw NonConvergence("momentum run: " + *traj.error, 0, std::nan(""));
    }
    for (std::size_t g : gens) {
      const double j0 = discrete_momentum(spec, sc, w1, problem.symmetries, g);
      double drift = 0.0;
      for (const State& w : traj.states) {
        drift = std::max(drift, std::abs(discrete_momentum(spec, sc, w, problem.symmetries, g) - j0));
      }
      rows.push_back({"momentum_drift_" + problem.symmetries.generators[g].name, drift,
                      1e3 * config.tol});
    }
  }

  // Self-adjoint construction: midpoint forward, its adjoint backward, centred bias.
  StepConfig rev = sc;
  rev.tableau = "midpoint";
  rev.adjoint_backward = true;
  rev.bias = Bias::make(-0.5, 0.5);
  const State forward = step(spec, rev, w1).w2;
  rev.h = -sc.h;
  const State back = step(spec, rev, forward).w2;
  rows.push_back({"time_reversal", state_distance(back, w1), 1e-9});

  bool all_pass = true;
  out << "check,measured,threshold,status\n";
  for (const Row& row : rows) {
    const bool pass = row.measured <= row.threshold;
    all_pass = all_pass && pass;
    out << row.check << ',' << format_number(row.measured) << ',' << format_number(row.threshold)
        << ',' << (pass ? "PASS" : "FAIL") << '\n';
  }
  return all_pass ? kOk : kCheckFailed;
}

int run(const std::string& command, const RunConfig& config, std::ostream& fallback,
        std::ostream& err) {
  try {
    std::ofstream file;
    std::ostream* out = &fallback;
    if (!config.out.empty()) {
      file.open(config.out);
      if (!file) {
        throw ConfigError("out", "cannot write '" + config.out + "'");
      }
      out = &file;
    }
    if (command == "step") {
      return cmd_step(config, *out);
    }
    if (command == "simulate") {
      return cmd_simulate(config, *out);
    }
    if (command == "converge") {
      return cmd_converge(config, *out);
    }
    if (command == "diagnose") {
      return cmd_diagnose(config, *out);
    }
    throw ConfigError("command", "unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    err << "configuration error [" << e.key() << "]: " << e.what() << '\n';
    return kConfigError;
  } catch (const NonConvergence& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace rkvi::cli
