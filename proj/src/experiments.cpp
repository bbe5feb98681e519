#include "kgpair/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "kgpair/backreaction.hpp"
#include "kgpair/dynamics.hpp"
#include "kgpair/spectral.hpp"

#ifndef KGPAIR_VERSION
#define KGPAIR_VERSION "unknown"
#endif

namespace kgpair {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string tag(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Convergence {
  bool computed = false;
  double V0 = 0.0;
  int coarse_points = 0;
  size_t fine_states = 0;
  size_t coarse_states = 0;
  double max_shift = 0.0;
};

std::vector<Complex> localized_energies(const LabeledSpectrum& s) {
  std::vector<Complex> out;
  for (Eigen::Index i = 0; i < s.spectrum.size(); ++i) {
    const StateKind k = s.kind[static_cast<size_t>(i)];
    if (k == StateKind::Bound || k == StateKind::BoundPair) out.push_back(s.spectrum.energies[i]);
  }
  return out;
}

// Shift of the bound-state energies when the grid is coarsened to N/2 points
// at the same box length.
Convergence grid_convergence(const ExperimentConfig& cfg, double V0,
                             const LabeledSpectrum* fine_spectrum) {
  Convergence c;
  const int coarse = cfg.points / 2;
  if (!cfg.convergence || coarse < 8 || coarse % 2 != 0) return c;
  c.computed = true;
  c.V0 = V0;
  c.coarse_points = coarse;
  const double mc2 = cfg.constants.rest_energy();
  LabeledSpectrum fine_owned;
  if (!fine_spectrum) {
    fine_owned = cfg.problem().solve(V0 * mc2);
    fine_spectrum = &fine_owned;
  }
  const auto fine = localized_energies(*fine_spectrum);
  const auto rough = localized_energies(cfg.problem_with(coarse).solve(V0 * mc2));
  c.fine_states = fine.size();
  c.coarse_states = rough.size();
  for (const Complex& e : fine) {
    double best = std::numeric_limits<double>::infinity();
    for (const Complex& r : rough) best = std::min(best, std::abs(e - r));
    c.max_shift = std::max(c.max_shift, best / mc2);
  }
  return c;
}

std::string manifest(const ExperimentConfig& cfg, std::string_view text, const Convergence& conv,
                     const std::vector<OutputFile>& files,
                     const std::vector<std::pair<std::string, std::string>>& extra) {
  const Grid g = cfg.grid();
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  std::ostringstream m;
  m << "config_hash = fnv1a64:" << hash << '\n';
  m << "code_version = " << code_version() << '\n';
  m << "kind = " << to_string(cfg.kind) << '\n';
  if (!cfg.comment.empty()) m << "comment = " << cfg.comment << '\n';
  m << "family = " << (cfg.family == FieldFamily::BoxOnly ? "box" : "step_with_b") << '\n';
  m << "scheme = " << (cfg.scheme == DerivativeScheme::Spectral ? "spectral" : "fd3") << '\n';
  m << "units = lengths in hbar/(m c), energies in m c^2, times in hbar/(m c^2)\n";
  m << "grid.points = " << g.size() << '\n';
  m << "grid.length = " << num(cfg.length) << '\n';
  m << "grid.spacing = " << num(cfg.length / g.size()) << '\n';
  const double pmax = M_PI * cfg.constants.hbar / g.spacing();
  m << "grid.max_kinetic_momentum = " << num(pmax / cfg.constants.momentum_unit()) << '\n';
  if (conv.computed) {
    m << "convergence.V0 = " << num(conv.V0) << '\n';
    m << "convergence.coarse_points = " << conv.coarse_points << '\n';
    m << "convergence.bound_states = " << conv.fine_states << '\n';
    m << "convergence.bound_states_coarse = " << conv.coarse_states << '\n';
    m << "convergence.max_bound_energy_shift = " << num(conv.max_shift) << '\n';
  } else {
    m << "convergence = not computed\n";
  }
  for (const auto& [k, v] : extra) m << k << " = " << v << '\n';
  m << "files =";
  for (const auto& f : files) m << ' ' << f.name;
  m << '\n';
  return m.str();
}

std::string state_table(const LabeledSpectrum& s, double mc2) {
  std::ostringstream out;
  out << "index,Re_E,Im_E,kind,species,localization,eta_norm,partner\n";
  for (Eigen::Index i = 0; i < s.spectrum.size(); ++i) {
    const size_t u = static_cast<size_t>(i);
    if (s.kind[u] == StateKind::Continuum) continue;
    out << i << ',' << num(s.spectrum.energies[i].real() / mc2) << ','
        << num(s.spectrum.energies[i].imag() / mc2) << ',' << to_string(s.kind[u]) << ','
        << to_string(s.species[u]) << ',' << num(s.localization[i]) << ','
        << num(s.eta_norm[i]) << ',' << s.spectrum.partner[u] << '\n';
  }
  return out.str();
}

std::string density_csv(const Grid& g, const Eigen::VectorXd& rho, double lc) {
  std::ostringstream out;
  out << "x,Re_rho\n";
  for (int i = 0; i < g.size(); ++i) out << num(g.position(i) / lc) << ',' << num(rho[i] * lc) << '\n';
  return out.str();
}

double max_imag(const LabeledSpectrum& s) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < s.spectrum.size(); ++i) {
    if (s.spectrum.complex_energy[static_cast<size_t>(i)]) {
      m = std::max(m, std::abs(s.spectrum.energies[i].imag()));
    }
  }
  return m;
}

RunOutput run_sweep(const ExperimentConfig& cfg, std::string_view text, const RunOptions& opt) {
  const double mc2 = cfg.constants.rest_energy();
  std::vector<double> V0s;
  for (double v : cfg.V0_list) V0s.push_back(v * mc2);
  const auto points = sweep(cfg.problem(), V0s, opt.threads);

  std::ostringstream csv;
  csv << "V0,state_index,Re_E,Im_E,bound_flag,regime\n";
  std::string sequence;
  Regime last = Regime::Unclassifiable;
  for (size_t p = 0; p < points.size(); ++p) {
    const auto& pt = points[p];
    const std::string regime(to_string(pt.regime));
    if (p == 0 || pt.regime != last) sequence += (p == 0 ? "" : " -> ") + regime;
    last = pt.regime;
    if (pt.states.empty()) {
      csv << num(cfg.V0_list[p]) << ",-1,nan,nan,0," << regime << '\n';
    }
    for (const auto& s : pt.states) {
      const bool bound = s.kind == StateKind::Bound || s.kind == StateKind::BoundPair;
      csv << num(cfg.V0_list[p]) << ',' << s.curve << ',' << num(s.energy.real() / mc2) << ','
          << num(s.energy.imag() / mc2) << ',' << (bound ? 1 : 0) << ',' << regime << '\n';
    }
  }
  RunOutput out;
  out.files.push_back({"sweep.csv", csv.str()});
  out.summary.push_back("regimes: " + sequence);
  const double mid = cfg.V0_list[cfg.V0_list.size() / 2];
  const Convergence conv = grid_convergence(cfg, mid, nullptr);
  out.files.push_back({"manifest.txt", manifest(cfg, text, conv, out.files, {{"regimes", sequence}})});
  return out;
}

RunOutput run_evolve(const ExperimentConfig& cfg, std::string_view text) {
  const PhysicalConstants& k = cfg.constants;
  const double mc2 = k.rest_energy();
  const double tu = k.time_unit();
  const double lc = k.compton_length();
  const SpectrumProblem problem = cfg.problem();
  const LabeledSpectrum ls = problem.solve(*cfg.V0 * mc2);
  const Regime regime = regime_classify(ls, cfg.family, problem.tolerances);
  const FreeModeBasis basis =
      build_free_basis(problem.grid, k, problem.family.transverse, cfg.scheme);

  EvolutionOptions eo;
  eo.t_max = cfg.t_max_auto ? default_run_length(ls.spectrum, k) : *cfg.t_max * tu;
  eo.samples = cfg.samples;
  for (double t : cfg.density_times) eo.density_times.push_back(t * tu);
  EvolutionRecord rec = evolve_static(ls.spectrum, basis, eo);

  const double rate_spectrum = 2.0 * max_imag(ls) / k.hbar;
  std::optional<GrowthFit> fit;
  try {
    fit = fit_growth_rate(rec);
    rec.growth_rate = fit->rate;
  } catch (const Error&) {
  }
  const bool growing = rate_spectrum > 0.0 && fit.has_value();
  rec.frequency = oscillation_frequency(rec, growing ? std::optional<double>(fit->rate) : std::nullopt);

  const auto running = running_growth_rate(rec, std::max(10, cfg.samples / 20));
  std::ostringstream csv;
  csv << "t,N,Gamma_fit_running\n";
  for (size_t i = 0; i < rec.times.size(); ++i) {
    csv << num(rec.times[i] / tu) << ',' << num(rec.number[i]) << ',' << num(running[i] * tu) << '\n';
  }

  std::ostringstream summary;
  summary << "quantity,value\n";
  summary << "V0," << num(*cfg.V0) << '\n';
  summary << "regime," << to_string(regime) << '\n';
  summary << "t_max," << num(eo.t_max / tu) << '\n';
  summary << "growth_rate_spectrum," << num(rate_spectrum * tu) << '\n';
  if (fit) {
    summary << "growth_rate_fit," << num(fit->rate * tu) << '\n';
    summary << "growth_rate_fit_stderr," << num(fit->standard_error * tu) << '\n';
    summary << "fit_window_begin," << num(fit->window.begin / tu) << '\n';
    summary << "fit_window_end," << num(fit->window.end / tu) << '\n';
    if (rate_spectrum > 0.0) {
      summary << "growth_rate_relative_deviation,"
              << num(std::abs(fit->rate - rate_spectrum) / rate_spectrum) << '\n';
    }
  }
  summary << "oscillation_hbar_omega," << (rec.frequency ? num(*rec.frequency * tu) : "none")
          << '\n';
  double nmax = 0.0;
  for (double v : rec.number) nmax = std::max(nmax, v);
  summary << "max_N," << num(nmax) << '\n';

  RunOutput out;
  out.files.push_back({"evolution.csv", csv.str()});
  out.files.push_back({"spectrum.csv", state_table(ls, mc2)});
  out.files.push_back({"summary.csv", summary.str()});
  for (const auto& d : rec.densities) {
    out.files.push_back({"density_t" + tag(d.t / tu) + ".csv", density_csv(problem.grid, d.rho, lc)});
  }
  out.summary.push_back("regime " + std::string(to_string(regime)));
  if (fit) {
    out.summary.push_back("fitted growth rate " + num(fit->rate * tu) + " mc^2/hbar (spectrum " +
                          num(rate_spectrum * tu) + ")");
  }
  const Convergence conv = grid_convergence(cfg, *cfg.V0, &ls);
  out.files.push_back({"manifest.txt", manifest(cfg, text, conv, out.files,
                                                {{"regime", std::string(to_string(regime))}})});
  return out;
}

RunOutput run_density(const ExperimentConfig& cfg, std::string_view text) {
  const PhysicalConstants& k = cfg.constants;
  const double mc2 = k.rest_energy();
  const double lc = k.compton_length();
  const SpectrumProblem problem = cfg.problem();
  const LabeledSpectrum ls = problem.solve(*cfg.V0 * mc2);
  const Regime regime = regime_classify(ls, cfg.family, problem.tolerances);
  const Grid& g = problem.grid;

  RunOutput out;
  out.files.push_back({"spectrum.csv", state_table(ls, mc2)});
  for (Eigen::Index i = 0; i < ls.spectrum.size(); ++i) {
    const StateKind kind = ls.kind[static_cast<size_t>(i)];
    if (kind != StateKind::Bound && kind != StateKind::BoundPair) continue;
    const Eigen::VectorXcd rho = biorthogonal_density(ls, i, g);
    std::ostringstream csv;
    csv << "x,Re_rho,Im_rho\n";
    for (int x = 0; x < g.size(); ++x) {
      csv << num(g.position(x) / lc) << ',' << num(rho[x].real() * lc) << ','
          << num(rho[x].imag() * lc) << '\n';
    }
    out.files.push_back({"bound_density_" + std::to_string(i) + ".csv", csv.str()});
  }
  if (!cfg.density_times.empty()) {
    const FreeModeBasis basis = build_free_basis(g, k, problem.family.transverse, cfg.scheme);
    const StaticEvolution ev(ls.spectrum, basis);
    for (double t : cfg.density_times) {
      out.files.push_back({"density_t" + tag(t) + ".csv",
                           density_csv(g, ev.density(t * k.time_unit()), lc)});
    }
  }
  out.summary.push_back("regime " + std::string(to_string(regime)) + ", " +
                        std::to_string(out.files.size() - 1) + " density files");
  const Convergence conv = grid_convergence(cfg, *cfg.V0, &ls);
  out.files.push_back({"manifest.txt", manifest(cfg, text, conv, out.files,
                                                {{"regime", std::string(to_string(regime))}})});
  return out;
}

RunOutput run_critical(const ExperimentConfig& cfg, std::string_view text) {
  const PhysicalConstants& k = cfg.constants;
  const double mc2 = k.rest_energy();
  const SpectrumProblem problem = cfg.problem();
  const CriticalPoint cp = find_critical(problem, *cfg.from * mc2, *cfg.to * mc2, cfg.transition,
                                         cfg.resolution * mc2);
  std::string analytic;
  if (cfg.transition == Transition::Overlap) {
    const double qA0 = k.charge * problem.family.A0;
    analytic = num(overlap_threshold(problem.family.transverse, qA0, k) / mc2);
  }
  std::ostringstream csv;
  csv << "transition,V0_star,bracket_low,bracket_high,evaluations,analytic_V0\n";
  csv << to_string(cfg.transition) << ',' << num(cp.V0 / mc2) << ',' << num(cp.lower / mc2) << ','
      << num(cp.upper / mc2) << ',' << cp.evaluations << ',' << analytic << '\n';
  RunOutput out;
  out.files.push_back({"critical.csv", csv.str()});
  out.summary.push_back(std::string(to_string(cfg.transition)) + " at V0 = " + num(cp.V0 / mc2) +
                        " mc^2");
  const Convergence conv = grid_convergence(cfg, *cfg.to, nullptr);
  out.files.push_back({"manifest.txt", manifest(cfg, text, conv, out.files, {})});
  return out;
}

RunOutput run_backreact(const ExperimentConfig& cfg, std::string_view text) {
  const PhysicalConstants& k = cfg.constants;
  const double mc2 = k.rest_energy();
  const double tu = k.time_unit();
  const SpectrumProblem problem = cfg.problem();
  BackReactionProblem br{problem.grid,
                         SmoothBox{*cfg.V0 * mc2, problem.family.box_width, problem.family.box_edge},
                         k, cfg.scheme, problem.family.transverse};
  BackReactionOptions bo;
  bo.dt = *cfg.dt * tu;
  bo.t_max = *cfg.t_max * tu;
  bo.record_every = cfg.record_every;
  bo.enabled = cfg.backreaction;
  EvolutionRecord rec = run_backreaction(br, bo);

  std::ostringstream csv;
  csv << "t,N,V0,E_in,E_ex\n";
  for (size_t i = 0; i < rec.times.size(); ++i) {
    csv << num(rec.times[i] / tu) << ',' << num(rec.number[i]) << ',' << num(rec.V0[i] / mc2)
        << ',' << num(rec.E_in[i] / mc2) << ',' << num(rec.E_ex[i] / mc2) << '\n';
  }
  double mean = 0.0;
  for (double v : rec.V0) mean += v;
  mean /= static_cast<double>(rec.V0.size());
  int crossings = 0;
  for (size_t i = 1; i < rec.V0.size(); ++i) {
    if ((rec.V0[i] - mean) * (rec.V0[i - 1] - mean) < 0.0) ++crossings;
  }
  std::ostringstream summary;
  summary << "quantity,value\n";
  summary << "backreaction," << (cfg.backreaction ? "on" : "off") << '\n';
  summary << "E_0," << num(rec.E_ex.front() / mc2) << '\n';
  summary << "V0_mean," << num(mean / mc2) << '\n';
  summary << "V0_mean_crossings," << crossings << '\n';
  try {
    const GrowthFit fit = fit_growth_rate(rec, FitWindow{0.5 * rec.times.back(), rec.times.back()});
    summary << "late_growth_rate_fit," << num(fit.rate * tu) << '\n';
  } catch (const Error&) {
    summary << "late_growth_rate_fit,none\n";
  }
  RunOutput out;
  out.files.push_back({"backreaction.csv", csv.str()});
  out.files.push_back({"summary.csv", summary.str()});
  out.summary.push_back("V0 crosses its mean " + std::to_string(crossings) + " times");
  const Convergence conv = grid_convergence(cfg, *cfg.V0, nullptr);
  out.files.push_back({"manifest.txt", manifest(cfg, text, conv, out.files, {})});
  return out;
}

}  // namespace

std::string code_version() { return KGPAIR_VERSION; }

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunOutput run_experiment(const ExperimentConfig& cfg, std::string_view config_text,
                         const RunOptions& options) {
  switch (cfg.kind) {
    case RunKind::Sweep: return run_sweep(cfg, config_text, options);
    case RunKind::Evolve: return run_evolve(cfg, config_text);
    case RunKind::Density: return run_density(cfg, config_text);
    case RunKind::Critical: return run_critical(cfg, config_text);
    case RunKind::BackReact: return run_backreact(cfg, config_text);
  }
  throw ConfigError("unknown run kind");
}

void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& f : out.files) {
    std::ofstream os(dir / f.name, std::ios::binary);
    os << f.contents;
    if (!os) throw Error("failed to write " + (dir / f.name).string());
  }
}

}  // namespace kgpair
