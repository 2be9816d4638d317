#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "rkvi/cli.hpp"

namespace {

const std::map<std::string, std::string>& help_text() {
  static const std::map<std::string, std::string> text{
      {"problem", "catalog problem name"},
      {"tableau", "euler, midpoint, heun or rk4"},
      {"alpha-minus", "backward bias fraction in [-1, 0]"},
      {"alpha-plus", "forward bias fraction in [0, 1], alpha-plus - alpha-minus = 1"},
      {"h", "step size (> 0)"},
      {"steps", "number of steps"},
      {"T", "final time (used when --steps is absent)"},
      {"tol", "fixed-point tolerance"},
      {"max-iter", "fixed-point iteration limit"},
      {"variant", "approximate system: as-printed or alpha-corrected"},
      {"freeze-point", "configuration of the frozen approximate: q1 or q-bar"},
      {"adjoint-minus", "use the adjoint tableau for negative times (true/false)"},
      {"substeps", "standard-layer substeps per boundary segment"},
      {"out", "output file (default: standard output)"},
      {"h-list", "comma separated step sizes for converge"},
      {"fd-step", "finite-difference step for diagnose"},
      {"fine-h", "reference solution step for converge"},
      {"seed", "seed for randomized probes"},
      {"threads", "parallel runs in converge (0: one per h)"},
  };
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational integrators built from explicit Runge-Kutta methods"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value file; flags override it");

  std::map<std::string, std::string> flags;
  for (const std::string& key : rkvi::cli::setting_keys()) {
    app.add_option("--" + key, flags[key], help_text().at(key));
  }

  const std::map<std::string, std::string> commands{
      {"step", "one step from the problem's default state, printed as JSON"},
      {"simulate", "CSV trajectory"},
      {"converge", "global error against a fine reference over the h list, with fitted slope"},
      {"diagnose", "geometric checks against thresholds"},
  };
  for (const auto& [name, description] : commands) {
    app.add_subcommand(name, description);
  }

  CLI11_PARSE(app, argc, argv);

  rkvi::cli::RunConfig config;
  try {
    if (!config_path.empty()) {
      rkvi::cli::apply_config_file(config, config_path);
    }
    for (const std::string& key : rkvi::cli::setting_keys()) {
      if (app.count("--" + key) > 0) {
        rkvi::cli::apply_setting(config, key, flags[key]);
      }
    }
  } catch (const rkvi::ConfigError& e) {
    std::cerr << "configuration error [" << e.key() << "]: " << e.what() << '\n';
    return rkvi::cli::kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return rkvi::cli::run(command, config, std::cout, std::cerr);
}
