#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rkvi/problems.hpp"

namespace rkvi::cli {

struct RunConfig {
  std::string problem = "sphere-pendulum";
  std::string tableau = "rk4";
  double alpha_minus = -0.5;
  double alpha_plus = 0.5;
  double h = 0.01;
  std::optional<int> steps;
  std::optional<double> t_final;
  double tol = 1e-12;
  int max_iter = 50;
  std::string variant = "alpha-corrected";
  std::string freeze_point = "q1";
  bool adjoint_minus = false;
  int substeps = 1;
  std::string out;  ///< empty: standard output
  std::vector<double> h_list{0.1, 0.05, 0.025, 0.0125};
  double fd_step = 1e-5;
  double fine_h = 1e-4;
  unsigned seed = 0;
  int threads = 0;  ///< 0: one per h value

  /// Throws ConfigError naming the offending key.
  void validate() const;
  StepConfig step_config() const;
  /// steps if given, otherwise round(T / h), otherwise 100.
  int resolved_steps() const;
  /// T if given, otherwise steps * h, otherwise 1.
  double resolved_t_final() const;
};

/// Keys accepted in config files and as --key flags.
const std::vector<std::string>& setting_keys();

/// Sets one key from its text form. Throws ConfigError(key, ...) on unknown
/// keys and unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Flat "key = value" lines; '#' starts a comment; values may be quoted.
std::map<std::string, std::string> parse_config_text(const std::string& text);
void apply_config_file(RunConfig& config, const std::string& path);

/// Exit codes: 0 success or all checks pass, 1 a diagnostic threshold failed,
/// 2 invalid configuration, 3 numerical failure (non-convergence, singular system).
enum ExitCode { kOk = 0, kCheckFailed = 1, kConfigError = 2, kNumericalFailure = 3 };

int cmd_step(const RunConfig& config, std::ostream& out);
int cmd_simulate(const RunConfig& config, std::ostream& out);
int cmd_converge(const RunConfig& config, std::ostream& out);
int cmd_diagnose(const RunConfig& config, std::ostream& out);

/// Dispatches to a command, writing to config.out or `fallback`, and maps
/// exceptions to exit codes with a message on `err`.
int run(const std::string& command, const RunConfig& config, std::ostream& fallback,
        std::ostream& err);

/// Least-squares slope of log(error) against log(h).
double fitted_slope(const std::vector<double>& h, const std::vector<double>& error);

}  // namespace rkvi::cli
