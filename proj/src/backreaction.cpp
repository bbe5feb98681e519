#include "kgpair/backreaction.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace kgpair {

namespace {

constexpr int kAlternationLimit = 8;

}  // namespace

double field_energy(const Eigen::VectorXd& field, const Grid& grid) {
  return field.squaredNorm() * grid.spacing() / (8.0 * M_PI);
}

double initial_field_energy(const FieldConfig& cfg, const Grid& grid, const PhysicalConstants& k) {
  validate(cfg);
  const double c2 = k.c * k.c;
  auto density = [&](double x) {
    const double e = eval_electric_field(cfg.scalar, x, k);
    const double b = eval_magnetic_field(cfg.vector, x);
    return e * e + c2 * b * b;
  };
  const double a = -0.5 * grid.length();
  const double b = 0.5 * grid.length();
  long n = grid.size();
  double h = (b - a) / static_cast<double>(n);
  double sum = 0.5 * (density(a) + density(b));
  for (long i = 1; i < n; ++i) sum += density(a + static_cast<double>(i) * h);
  double integral = sum * h;
  for (int level = 0; level < 22; ++level) {
    for (long i = 0; i < n; ++i) sum += density(a + (static_cast<double>(i) + 0.5) * h);
    n *= 2;
    h *= 0.5;
    const double refined = sum * h;
    const bool done = std::abs(refined - integral) <= 1e-14 * std::abs(refined);
    integral = refined;
    if (done) break;
  }
  return integral / (8.0 * M_PI);
}

InducedField induced_field(const Eigen::VectorXd& density, const Grid& grid,
                           const PhysicalConstants& k) {
  const int n = grid.size();
  if (density.size() != n) throw ConfigError("induced_field: density does not match the grid");
  InducedField out;
  out.peak = std::max(0.0, density.maxCoeff());
  out.most_negative = std::min(0.0, density.minCoeff());
  const Eigen::VectorXd rho = density.cwiseMax(0.0);
  const double dx = grid.spacing();
  const double total = rho.sum() * dx;
  out.charge = k.charge * total;
  out.field.resize(n);
  double running = 0.0;
  for (int i = 0; i < n; ++i) {
    out.field[i] = 4.0 * M_PI * k.charge * (running + 0.5 * rho[i] * dx - 0.5 * total);
    running += rho[i] * dx;
  }
  return out;
}

EvolutionRecord run_backreaction(const BackReactionProblem& problem,
                                 const BackReactionOptions& options) {
  if (!(options.dt > 0.0) || !(options.t_max > 0.0) || options.record_every < 1) {
    throw ConfigError("run_backreaction: need dt > 0, t_max > 0, record_every >= 1");
  }
  const PhysicalConstants& k = problem.constants;
  const Grid& grid = problem.grid;
  FieldConfig initial;
  initial.scalar = problem.box;
  initial.transverse = problem.transverse;
  validate(initial);

  const Eigen::VectorXd shape =
      sample_scalar(SmoothBox{1.0, problem.box.width, problem.box.edge}, grid);
  ScaledPotentialPropagator prop(grid, k, problem.transverse, problem.scheme, shape, options.dt);
  const FreeModeBasis basis = build_free_basis(grid, k, problem.transverse, problem.scheme);
  const double e0 = initial_field_energy(initial, grid, k);
  const double v_init = problem.box.V0;
  const double mc2 = k.rest_energy();

  EvolutionRecord r;
  Eigen::MatrixXcd modes = basis.negative;
  double v = v_init;
  auto record = [&](double t, double n, double e_in, double e_ex) {
    r.times.push_back(t);
    r.number.push_back(n);
    r.log_number.push_back(n > 0.0 ? std::log(n) : -std::numeric_limits<double>::infinity());
    r.V0.push_back(v);
    r.E_in.push_back(e_in);
    r.E_ex.push_back(e_ex);
  };
  record(0.0, particle_number(basis, modes), 0.0, e0);

  const long steps = std::lround(options.t_max / options.dt);
  double last_e_in = 0.0;
  double last_delta = 0.0;
  int alternations = 0;
  int clamped_steps = 0;
  double worst_dip = 0.0;
  for (long s = 1; s <= steps; ++s) {
    prop.step(modes, v);
    const Eigen::MatrixXcd amps = creation_amplitudes(basis, modes);
    const double n = amps.squaredNorm();
    if (!std::isfinite(n)) {
      throw NumericError("back reaction: particle number became non-finite at step " +
                         std::to_string(s));
    }
    double e_in = 0.0;
    double e_ex = e0;
    if (options.enabled) {
      const InducedField f = induced_field(density_from_amplitudes(basis, amps), grid, k);
      if (f.most_negative < -1e-6 * f.peak) {
        ++clamped_steps;
        worst_dip = std::min(worst_dip, f.most_negative / f.peak);
      }
      e_in = 2.0 * mc2 * n + field_energy(f.field, grid);
      e_ex = std::max(e0 - e_in, 0.0);
      v = v_init * std::sqrt(e_ex / e0);

      const double delta = e_in - last_e_in;
      const bool flips = delta * last_delta < 0.0 && std::abs(delta) > 1e-4 * e0;
      alternations = flips ? alternations + 1 : 0;
      if (alternations >= kAlternationLimit) {
        throw NumericError(
            "back reaction: E_in alternates from step to step (step " + std::to_string(s) +
            "); the time step is too large for the feedback loop, reduce dt");
      }
      last_delta = delta;
      last_e_in = e_in;
    }
    if (s % options.record_every == 0 || s == steps) {
      record(static_cast<double>(s) * options.dt, n, e_in, e_ex);
    }
  }
  if (clamped_steps > 0) {
    std::ostringstream msg;
    msg << "particle density went negative in " << clamped_steps << " of " << steps
        << " steps (down to " << worst_dip << " of its maximum); clamped to zero";
    warn(msg.str());
  }
  return r;
}

}  // namespace kgpair
