// qpulse command-line driver.
//
// Exit status: 0 success, 1 numeric or verification failure, 2 usage error
// or invalid scenario.

#include "qpulse/run.hpp"
#include "qpulse/scenario.hpp"
#include "qpulse/verify.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_numeric = 1;
constexpr int exit_usage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses "a,b,N".
std::tuple<double, double, std::size_t> parse_range(const std::string& text, const char* flag) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  if (parts.size() != 3) throw UsageError(std::string(flag) + " expects three comma-separated values: start,stop,count");
  try {
    std::size_t used = 0;
    const long long n = std::stoll(parts[2], &used);
    if (used != parts[2].size() || n < 1) throw std::invalid_argument("count");
    return {std::stod(parts[0]), std::stod(parts[1]), static_cast<std::size_t>(n)};
  } catch (const std::logic_error&) {
    throw UsageError(std::string(flag) + ": cannot parse '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qpulse: quantized light-pulse propagation in dispersive, absorbing Kerr media"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qpulse::tool_version);

  std::string scenario_path, medium_path, out_dir = "qpulse-out", eval_range, dx_range, format;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  unsigned threads = 0;
  bool quick = false;

  auto* medium = app.add_subcommand("medium", "Tabulate permittivity and wavenumber");
  medium->add_option("--eval", eval_range, "omega0,omega1,N (rad/s, rad/s, samples)")->required();
  auto* med_scn = medium->add_option("--scenario", scenario_path, "Scenario file (its medium block is used)");
  auto* med_file = medium->add_option("--medium", medium_path, "Medium description file");
  med_scn->excludes(med_file);
  med_file->excludes(med_scn);

  auto* linear = app.add_subcommand("linear", "Solve the linear Langevin equations per frequency slice");
  linear->add_option("--scenario", scenario_path, "Scenario file with a 'linear' block")->required();
  linear->add_option("--out", out_dir, "Output directory");
  linear->add_option("--seed", seed, "Override the scenario seed");

  auto* kernel = app.add_subcommand("kernel", "Print the nonlocal Kerr kernel in full and leading modes");
  kernel->add_option("--scenario", scenario_path, "Scenario file")->required();
  kernel->add_option("--dx-range", dx_range, "dx0,dx1,N in m (default +-10/(delta_omega k1r), 41 points)");

  auto* prop = app.add_subcommand("propagate", "Run the stochastic envelope ensemble");
  prop->add_option("--scenario", scenario_path, "Scenario file")->required();
  prop->add_option("--out", out_dir, "Output directory");
  prop->add_option("--seed", seed, "Override the scenario seed");
  prop->add_option("--trajectories", trajectories, "Override the ensemble size");
  prop->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");
  prop->add_option("--format", format, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));

  auto* verify = app.add_subcommand("verify", "Run the analytic-oracle regression suite");
  verify->add_flag("--quick", quick, "Smaller ensemble for the fluctuation-dissipation check");
  verify->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return exit_usage;
  }

  try {
    if (*medium) {
      if (scenario_path.empty() && medium_path.empty()) throw UsageError("medium: one of --scenario or --medium is required");
      const auto [w0, w1, n] = parse_range(eval_range, "--eval");
      const qpulse::MediumModel m = !medium_path.empty()
                                        ? qpulse::parse_medium(qpulse::read_json_file(medium_path))
                                        : qpulse::load_scenario(scenario_path).medium;
      qpulse::medium_table(std::cout, m, w0, w1, n);
      return exit_ok;
    }

    if (*linear) {
      auto s = qpulse::load_scenario(scenario_path);
      qpulse::apply_overrides(s, {seed, std::nullopt, std::nullopt});
      qpulse::write_linear(s, qpulse::run_linear(s), out_dir);
      std::cerr << "wrote " << s.linear->omegas.size() << " frequency slices to " << out_dir << "\n";
      return exit_ok;
    }

    if (*kernel) {
      const auto s = qpulse::load_scenario(scenario_path);
      double dx0, dx1;
      std::size_t n = 41;
      if (dx_range.empty()) {
        const double reach = 10.0 / (s.expansion.delta_omega * s.expansion.k_coeff(1).real());
        dx0 = -reach;
        dx1 = reach;
      } else {
        std::tie(dx0, dx1, n) = parse_range(dx_range, "--dx-range");
      }
      qpulse::kernel_table(std::cout, s, dx0, dx1, n);
      return exit_ok;
    }

    if (*prop) {
      auto s = qpulse::load_scenario(scenario_path);
      qpulse::apply_overrides(s, {seed, trajectories, format.empty() ? std::nullopt : std::optional(format)});
      const auto result = qpulse::propagate(s, threads);
      const auto manifest = qpulse::write_propagation(s, result, out_dir);
      std::cerr << "propagated " << s.trajectories << " trajectories, " << result.steps << " steps of "
                << result.h_x << " m; output in " << out_dir << "\n";
      if (!manifest["leakage"]["ok"].get<bool>())
        std::cerr << "warning: spectral leakage beyond delta_omega/2 reached " << manifest["leakage"]["max"].get<double>()
                  << " (limit " << qpulse::propagation_leakage_limit << "); the narrow-band envelope is degrading\n";
      return exit_ok;
    }

    if (*verify) {
      bool all = true;
      for (const auto& r : qpulse::run_verification({quick, threads})) {
        std::cout << qpulse::format_check(r) << std::endl;
        all = all && r.pass;
      }
      std::cout << (all ? "all checks passed" : "verification FAILED") << std::endl;
      return all ? exit_ok : exit_numeric;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const qpulse::ScenarioError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numeric;
  }
  return exit_usage;
}
