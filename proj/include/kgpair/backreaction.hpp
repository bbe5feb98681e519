#pragma once

#include <Eigen/Core>

#include "kgpair/core.hpp"
#include "kgpair/dynamics.hpp"
#include "kgpair/fields.hpp"
#include "kgpair/hamiltonian.hpp"

namespace kgpair {

// Energies use Gaussian units (energy density (E^2 + B^2) / 8 pi) per unit
// transverse area.

// (1/8 pi) sum E^2 dx
double field_energy(const Eigen::VectorXd& field, const Grid& grid);

// (1/8 pi) integral over the box of E^2 + c^2 B^2 for the external fields,
// by trapezoidal quadrature refined until it stops changing.
double initial_field_energy(const FieldConfig& cfg, const Grid& grid, const PhysicalConstants& k);

struct InducedField {
  Eigen::VectorXd field;
  double charge = 0.0;        // q * integral of the clamped density
  double most_negative = 0.0;  // min(rho, 0) before clamping
  double peak = 0.0;           // max(rho, 0)
};

// Solves dE/dx = 4 pi q rho with E(-L/2) = -E(L/2). Negative density is
// clamped to zero.
InducedField induced_field(const Eigen::VectorXd& density, const Grid& grid,
                           const PhysicalConstants& k);

struct BackReactionProblem {
  Grid grid;
  SmoothBox box;  // box.V0 is the initial strength
  PhysicalConstants constants;
  DerivativeScheme scheme = DerivativeScheme::Spectral;
  TransverseMomenta transverse;
};

struct BackReactionOptions {
  double dt = 0.0;
  double t_max = 0.0;
  int record_every = 1;
  bool enabled = true;
};

// Steps all negative modes with the current V0, then updates
// E_in = 2 m c^2 N + field energy of the induced field, E_ex = max(E_0 - E_in, 0)
// and V0 = V0(0) sqrt(E_ex / E_0). Disabled runs keep E_in = 0. Warns once
// when the density had to be clamped by more than 1e-6 of its maximum.
EvolutionRecord run_backreaction(const BackReactionProblem& problem,
                                 const BackReactionOptions& options);

}  // namespace kgpair
