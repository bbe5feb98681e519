#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgpair/core.hpp"
#include "kgpair/fields.hpp"
#include "kgpair/hamiltonian.hpp"
#include "kgpair/spectral.hpp"

namespace kgpair {

enum class RunKind { Sweep, Evolve, Critical, BackReact, Density };

std::string_view to_string(RunKind k);

// Values as written in the file: lengths in Compton lengths, energies in
// m c^2, times in hbar/(m c^2), momenta in m c, A0 in m c / q.
struct ExperimentConfig {
  RunKind kind = RunKind::Evolve;
  std::string comment;
  FieldFamily family = FieldFamily::BoxOnly;
  DerivativeScheme scheme = DerivativeScheme::Spectral;
  PhysicalConstants constants;
  int points = 512;
  double length = 64.0;

  double box_width = 0.0;
  double box_edge = 0.0;
  double step_edge = 0.0;
  double magnetic_edge = 0.0;
  double A0 = 0.0;
  std::optional<double> p_y;
  std::optional<double> p_z;

  std::optional<double> V0;
  std::vector<double> V0_list;

  Transition transition = Transition::Coalescence;
  std::optional<double> from;
  std::optional<double> to;
  double resolution = 1e-4;

  std::optional<double> t_max;  // unset with t_max_auto for the default run length
  bool t_max_auto = false;
  int samples = 2000;
  std::optional<double> dt;
  int record_every = 1;
  bool backreaction = true;
  std::vector<double> density_times;

  double im_eps = 1e-8;
  double pair_eps = 1e-8;
  double biorth_eps = 1e-10;
  double loc_threshold = 0.75;

  std::string output = "output";
  bool convergence = true;

  Grid grid() const { return grid_with(points); }
  Grid grid_with(int n) const;
  FamilySpec family_spec() const;
  Tolerances tolerances() const;
  SpectrumProblem problem() const { return problem_with(points); }
  SpectrumProblem problem_with(int n) const;
  double energy(double scaled) const { return scaled * constants.rest_energy(); }
  double time(double scaled) const { return scaled * constants.time_unit(); }
};

struct Diagnostic {
  int line = 0;  // 0 when the problem is not tied to one line
  std::string message;
};

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return config.has_value() && diagnostics.empty(); }
};

// `key = value` lines; `#` starts a comment.
ParseResult parse_config(std::string_view text);
ParseResult load_config(const std::filesystem::path& path, std::string* text = nullptr);

std::string format_diagnostic(const std::string& source, const Diagnostic& d);

}  // namespace kgpair
