#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "kgpair/config.hpp"
#include "kgpair/experiments.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericError = 2;

int default_threads() {
  if (const char* env = std::getenv("KGPAIR_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid KGPAIR_THREADS='" << env << "'\n";
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Klein-Gordon pair creation in strong static fields"};
  app.set_version_flag("--version", kgpair::code_version());
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = 0;
  bool quiet = false;

  const char* commands[][2] = {
      {"sweep", "Spectrum over a list of potential strengths"},
      {"evolve", "Created-particle number N(t) for a static field"},
      {"critical", "Bisection for a critical potential strength"},
      {"backreact", "Pair creation with energy-balance back reaction"},
      {"density", "Bound-state and created-particle densities"},
      {"validate", "Check a config file without running it"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Config file")->required();
    if (std::string(name) != "validate") {
      sub->add_option("--out", out_dir, "Output directory (overrides the config)");
      sub->add_option("--threads", threads, "Worker threads (default: KGPAIR_THREADS or all cores)")
          ->check(CLI::PositiveNumber);
    }
    sub->add_flag("--quiet", quiet, "Suppress progress and warnings");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  kgpair::set_quiet(quiet);

  std::string text;
  const kgpair::ParseResult parsed = kgpair::load_config(config_path, &text);
  for (const auto& d : parsed.diagnostics) {
    std::cerr << kgpair::format_diagnostic(config_path, d) << '\n';
  }
  if (!parsed.ok()) return kConfigError;
  const kgpair::ExperimentConfig& cfg = *parsed.config;

  if (command == "validate") {
    if (!quiet) std::cout << config_path << ": ok\n";
    return kOk;
  }
  if (command != kgpair::to_string(cfg.kind)) {
    std::cerr << config_path << ": config is of kind '" << kgpair::to_string(cfg.kind)
              << "', not '" << command << "'\n";
    return kConfigError;
  }

  kgpair::RunOptions options;
  options.threads = threads > 0 ? threads : default_threads();
  const std::string target = out_dir.empty() ? cfg.output : out_dir;
  try {
    const kgpair::RunOutput out = kgpair::run_experiment(cfg, text, options);
    kgpair::write_outputs(out, target);
    if (!quiet) {
      for (const auto& line : out.summary) std::cout << line << '\n';
      std::cout << "wrote " << out.files.size() << " files to " << target << '\n';
    }
  } catch (const kgpair::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const kgpair::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kNumericError;
  }
  return kOk;
}
