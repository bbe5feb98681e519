#pragma once

#include <filesystem>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "kgpair/core.hpp"

namespace kgpair {

struct ZeroField {};

// q phi(x) = V0/2 (tanh((x + l/2)/w) - tanh((x - l/2)/w))
struct SmoothBox {
  double V0 = 0.0;
  double width = 0.0;  // l
  double edge = 0.0;   // w
};

// q phi(x) = V0/2 (tanh(x/w_E) + 1)
struct SmoothStep {
  double V0 = 0.0;
  double edge = 0.0;  // w_E
};

// Piecewise-linear q phi(x) through (x, value) nodes, constant outside.
struct TabulatedPotential {
  std::vector<double> x;
  std::vector<double> value;
};

using ScalarPotentialSpec =
    std::variant<ZeroField, SmoothBox, SmoothStep, TabulatedPotential>;

// A_y(x) = A0/2 (tanh(x/w_B) + 1)
struct SmoothStepY {
  double A0 = 0.0;
  double edge = 0.0;  // w_B
};

using VectorPotentialSpec = std::variant<ZeroField, SmoothStepY>;

struct TransverseMomenta {
  double p_y = 0.0;
  double p_z = 0.0;
};

struct FieldConfig {
  ScalarPotentialSpec scalar = ZeroField{};
  VectorPotentialSpec vector = ZeroField{};
  TransverseMomenta transverse;
};

void validate(const ScalarPotentialSpec& spec);
void validate(const VectorPotentialSpec& spec);
void validate(const FieldConfig& cfg);

// q phi(x)
double eval_scalar(const ScalarPotentialSpec& spec, double x);
double eval_vector_y(const VectorPotentialSpec& spec, double x);

// E = -d phi/dx. Tabulated profiles use the slope of the linear interpolant
// (central average of adjacent slopes at the nodes).
double eval_electric_field(const ScalarPotentialSpec& spec, double x,
                           const PhysicalConstants& k);

// B_z = dA_y/dx
double eval_magnetic_field(const VectorPotentialSpec& spec, double x);

// Limits of q phi and A_y for x -> -inf and x -> +inf.
struct Asymptotes {
  double left = 0.0;
  double right = 0.0;
};
Asymptotes scalar_asymptotes(const ScalarPotentialSpec& spec);
Asymptotes vector_asymptotes(const VectorPotentialSpec& spec);

// Grid sampling. The seam point x_0 = -L/2 takes the mean of the profile's
// values at both ends of the box, so non-periodic steps keep the x -> -x
// structure of the lattice.
Eigen::VectorXd sample_scalar(const ScalarPotentialSpec& spec, const Grid& grid);

// (p_y - q A_y(x))^2 + p_z^2 on the grid, with the same seam rule.
Eigen::VectorXd sample_transverse_kinetic(const FieldConfig& cfg, const Grid& grid,
                                          const PhysicalConstants& k);

TabulatedPotential read_tabulated(const std::filesystem::path& path);
void write_tabulated(const TabulatedPotential& table, const std::filesystem::path& path);
TabulatedPotential tabulate(const ScalarPotentialSpec& spec, const Grid& grid);

// The two one-parameter families studied here.
enum class FieldFamily { BoxOnly, StepWithB };

struct FamilySpec {
  FieldFamily family = FieldFamily::BoxOnly;
  double box_width = 0.0;      // l
  double box_edge = 0.0;       // w
  double step_edge = 0.0;      // w_E
  double magnetic_edge = 0.0;  // w_B
  double A0 = 0.0;
  TransverseMomenta transverse;

  static FamilySpec box(double width, double edge);
  // p_y = q A0 / 2 and p_z = 0 cancel the kinematic momentum in the middle.
  static FamilySpec step_with_b(double step_edge, double magnetic_edge, double A0,
                                const PhysicalConstants& k);

  FieldConfig at(double V0) const;
};

}  // namespace kgpair
