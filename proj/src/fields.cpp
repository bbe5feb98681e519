#include "kgpair/fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace kgpair {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double sech2(double u) {
  const double s = 1.0 / std::cosh(u);
  return s * s;
}

void require_positive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw ConfigError(std::string(what) + " must be positive");
  }
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
}

double table_value(const TabulatedPotential& t, double x) {
  const auto& xs = t.x;
  if (x <= xs.front()) return t.value.front();
  if (x >= xs.back()) return t.value.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const size_t j = static_cast<size_t>(it - xs.begin());
  const double f = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return (1.0 - f) * t.value[j - 1] + f * t.value[j];
}

double table_slope(const TabulatedPotential& t, double x) {
  const auto& xs = t.x;
  const size_t n = xs.size();
  auto segment = [&](size_t j) {
    return (t.value[j + 1] - t.value[j]) / (xs[j + 1] - xs[j]);
  };
  if (x < xs.front() || x > xs.back()) return 0.0;
  const auto node = std::lower_bound(xs.begin(), xs.end(), x);
  const size_t j = static_cast<size_t>(node - xs.begin());
  if (*node == x) {
    if (j == 0) return 0.5 * segment(0);
    if (j == n - 1) return 0.5 * segment(n - 2);
    return 0.5 * (segment(j - 1) + segment(j));
  }
  return segment(j - 1);
}

template <class F>
Eigen::VectorXd sample_with_seam(const Grid& grid, F&& f) {
  Eigen::VectorXd v(grid.size());
  for (int i = 1; i < grid.size(); ++i) v[i] = f(grid.position(i));
  const double half = 0.5 * grid.length();
  v[0] = 0.5 * (f(-half) + f(half));
  return v;
}

}  // namespace

void validate(const ScalarPotentialSpec& spec) {
  std::visit(overloaded{
                 [](const ZeroField&) {},
                 [](const SmoothBox& b) {
                   require_finite(b.V0, "V0");
                   require_positive(b.width, "box width l");
                   require_positive(b.edge, "box edge w");
                 },
                 [](const SmoothStep& s) {
                   require_finite(s.V0, "V0");
                   require_positive(s.edge, "step edge w_E");
                 },
                 [](const TabulatedPotential& t) {
                   if (t.x.size() < 2 || t.x.size() != t.value.size()) {
                     throw ConfigError("tabulated potential needs >= 2 (x, value) rows");
                   }
                   for (size_t i = 0; i < t.x.size(); ++i) {
                     require_finite(t.x[i], "tabulated x");
                     require_finite(t.value[i], "tabulated value");
                     if (i > 0 && t.x[i] <= t.x[i - 1]) {
                       throw ConfigError("tabulated x must be strictly increasing");
                     }
                   }
                 },
             },
             spec);
}

void validate(const VectorPotentialSpec& spec) {
  if (const auto* s = std::get_if<SmoothStepY>(&spec)) {
    require_finite(s->A0, "A0");
    require_positive(s->edge, "magnetic edge w_B");
  }
}

void validate(const FieldConfig& cfg) {
  validate(cfg.scalar);
  validate(cfg.vector);
  require_finite(cfg.transverse.p_y, "p_y");
  require_finite(cfg.transverse.p_z, "p_z");
}

double eval_scalar(const ScalarPotentialSpec& spec, double x) {
  return std::visit(
      overloaded{
          [](const ZeroField&) { return 0.0; },
          [x](const SmoothBox& b) {
            return 0.5 * b.V0 *
                   (std::tanh((x + 0.5 * b.width) / b.edge) -
                    std::tanh((x - 0.5 * b.width) / b.edge));
          },
          [x](const SmoothStep& s) { return 0.5 * s.V0 * (std::tanh(x / s.edge) + 1.0); },
          [x](const TabulatedPotential& t) { return table_value(t, x); },
      },
      spec);
}

double eval_vector_y(const VectorPotentialSpec& spec, double x) {
  if (const auto* s = std::get_if<SmoothStepY>(&spec)) {
    return 0.5 * s->A0 * (std::tanh(x / s->edge) + 1.0);
  }
  return 0.0;
}

double eval_electric_field(const ScalarPotentialSpec& spec, double x,
                           const PhysicalConstants& k) {
  const double dV = std::visit(
      overloaded{
          [](const ZeroField&) { return 0.0; },
          [x](const SmoothBox& b) {
            return 0.5 * b.V0 / b.edge *
                   (sech2((x + 0.5 * b.width) / b.edge) -
                    sech2((x - 0.5 * b.width) / b.edge));
          },
          [x](const SmoothStep& s) { return 0.5 * s.V0 / s.edge * sech2(x / s.edge); },
          [x](const TabulatedPotential& t) { return table_slope(t, x); },
      },
      spec);
  return -dV / k.charge;
}

double eval_magnetic_field(const VectorPotentialSpec& spec, double x) {
  if (const auto* s = std::get_if<SmoothStepY>(&spec)) {
    return 0.5 * s->A0 / s->edge * sech2(x / s->edge);
  }
  return 0.0;
}

Asymptotes scalar_asymptotes(const ScalarPotentialSpec& spec) {
  return std::visit(overloaded{
                        [](const ZeroField&) { return Asymptotes{}; },
                        [](const SmoothBox&) { return Asymptotes{}; },
                        [](const SmoothStep& s) { return Asymptotes{0.0, s.V0}; },
                        [](const TabulatedPotential& t) {
                          return Asymptotes{t.value.front(), t.value.back()};
                        },
                    },
                    spec);
}

Asymptotes vector_asymptotes(const VectorPotentialSpec& spec) {
  if (const auto* s = std::get_if<SmoothStepY>(&spec)) return {0.0, s->A0};
  return {};
}

Eigen::VectorXd sample_scalar(const ScalarPotentialSpec& spec, const Grid& grid) {
  return sample_with_seam(grid, [&](double x) { return eval_scalar(spec, x); });
}

Eigen::VectorXd sample_transverse_kinetic(const FieldConfig& cfg, const Grid& grid,
                                          const PhysicalConstants& k) {
  const double py = cfg.transverse.p_y;
  const double pz2 = cfg.transverse.p_z * cfg.transverse.p_z;
  return sample_with_seam(grid, [&](double x) {
    const double kin = py - k.charge * eval_vector_y(cfg.vector, x);
    return kin * kin + pz2;
  });
}

TabulatedPotential read_tabulated(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tabulated potential " + path.string());
  TabulatedPotential t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x = 0.0;
    double v = 0.0;
    if (!(ss >> x)) continue;
    std::string rest;
    if (!(ss >> v) || (ss >> rest)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected two numbers");
    }
    t.x.push_back(x);
    t.value.push_back(v);
  }
  validate(ScalarPotentialSpec{t});
  return t;
}

void write_tabulated(const TabulatedPotential& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# x value\n";
  for (size_t i = 0; i < table.x.size(); ++i) {
    out << table.x[i] << ' ' << table.value[i] << '\n';
  }
}

TabulatedPotential tabulate(const ScalarPotentialSpec& spec, const Grid& grid) {
  TabulatedPotential t;
  for (int i = 0; i < grid.size(); ++i) {
    t.x.push_back(grid.position(i));
    t.value.push_back(eval_scalar(spec, grid.position(i)));
  }
  return t;
}

FamilySpec FamilySpec::box(double width, double edge) {
  FamilySpec f;
  f.family = FieldFamily::BoxOnly;
  f.box_width = width;
  f.box_edge = edge;
  return f;
}

FamilySpec FamilySpec::step_with_b(double step_edge, double magnetic_edge, double A0,
                                   const PhysicalConstants& k) {
  FamilySpec f;
  f.family = FieldFamily::StepWithB;
  f.step_edge = step_edge;
  f.magnetic_edge = magnetic_edge;
  f.A0 = A0;
  f.transverse.p_y = 0.5 * k.charge * A0;
  return f;
}

FieldConfig FamilySpec::at(double V0) const {
  FieldConfig cfg;
  if (family == FieldFamily::BoxOnly) {
    cfg.scalar = SmoothBox{V0, box_width, box_edge};
  } else {
    cfg.scalar = SmoothStep{V0, step_edge};
    cfg.vector = SmoothStepY{A0, magnetic_edge};
  }
  cfg.transverse = transverse;
  return cfg;
}

}  // namespace kgpair
