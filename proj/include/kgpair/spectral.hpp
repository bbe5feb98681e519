#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kgpair/core.hpp"
#include "kgpair/fields.hpp"
#include "kgpair/hamiltonian.hpp"

namespace kgpair {

class NonDiagonalizableError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct BiorthogonalSpectrum {
  Eigen::VectorXcd energies;  // sorted by (Re E, Im E)
  Eigen::MatrixXcd right;     // psi_i in column i
  Eigen::MatrixXcd left;      // phi_i in row i, left * right = I
  std::vector<Eigen::Index> partner;  // conjugate partner, -1 if real or unpaired
  std::vector<bool> complex_energy;   // |Im E| > im_eps
  double biorthogonality_residual = 0.0;  // max |L R - I|
  double condition = 0.0;                 // ||R||_1 ||L||_1

  Eigen::Index size() const { return energies.size(); }
  // Every complex eigenvalue has a partner within pair_eps of its conjugate.
  bool conjugate_closed() const;
};

// Right eigenvectors from LAPACK, left ones as the inverse of R. Throws
// NonDiagonalizableError when R is numerically singular.
BiorthogonalSpectrum eigensolve(const Eigen::MatrixXcd& h, const Tolerances& tol);
BiorthogonalSpectrum eigensolve(const FVHamiltonian& h, const Tolerances& tol);

// max_i ||H eta phi_i^dagger - conj(E_i) eta phi_i^dagger|| / ||H||
double left_eigen_residual(const Eigen::MatrixXcd& h, const BiorthogonalSpectrum& s);

enum class StateKind { Bound, BoundPair, Continuum, Resonance };
enum class Species { Particle, Antiparticle, Unassignable };

// Real energies strictly between lower and upper belong to neither continuum.
struct ContinuumEdges {
  double lower = 0.0;
  double upper = 0.0;
  bool overlapping() const { return lower >= upper; }
};

ContinuumEdges continuum_edges(const FieldConfig& cfg, const PhysicalConstants& k);

// Potential step at which the two continua of the step + vector potential
// start to intersect.
double overlap_threshold(const TransverseMomenta& t, double qA0, const PhysicalConstants& k);

// Fraction of sum |psi|^2 within the central half |x| <= L/4 of the box.
double localization(const Eigen::Ref<const Eigen::VectorXcd>& psi, const Grid& grid);

struct LabeledSpectrum {
  BiorthogonalSpectrum spectrum;
  std::vector<StateKind> kind;
  std::vector<Species> species;
  Eigen::VectorXd localization;
  Eigen::VectorXd eta_norm;  // psi^dagger eta psi / psi^dagger psi
  ContinuumEdges edges;
  // Resonances present, or negative-norm continuum states above the lowest
  // positive-norm continuum state.
  bool continuum_overlap = false;

  std::vector<Eigen::Index> states_of(StateKind k) const;
  int bound_pair_count() const;
};

LabeledSpectrum classify_states(BiorthogonalSpectrum spectrum, const Grid& grid,
                                const FieldConfig& cfg, const PhysicalConstants& k,
                                const Tolerances& tol);

enum class Regime { Free, I, II, III, IV, V, Boundary, Unclassifiable };

std::string_view to_string(Regime r);
std::string_view to_string(StateKind k);
std::string_view to_string(Species s);

Regime regime_classify(const LabeledSpectrum& s, FieldFamily family, const Tolerances& tol);

// Everything needed to turn a potential strength V0 into a labeled spectrum.
struct SpectrumProblem {
  Grid grid;
  FamilySpec family;
  PhysicalConstants constants;
  DerivativeScheme scheme = DerivativeScheme::Spectral;
  Tolerances tolerances;

  FVHamiltonian hamiltonian(double V0) const;
  LabeledSpectrum solve(double V0) const;
};

struct SweepState {
  int curve = -1;
  Complex energy;
  StateKind kind = StateKind::Bound;
  Species species = Species::Unassignable;
};

struct SweepPoint {
  double V0 = 0.0;
  Regime regime = Regime::Free;
  std::vector<SweepState> states;
};

// One spectrum per V0 (computed on `threads` workers); bound states, bound
// pairs and resonances are linked into curves across neighbouring V0.
std::vector<SweepPoint> sweep(const SpectrumProblem& problem, const std::vector<double>& V0s,
                              int threads = 1);

enum class Transition { Emergence, Coalescence, Anticoalescence, Overlap };

std::string_view to_string(Transition t);

struct CriticalPoint {
  double V0 = 0.0;
  double lower = 0.0;  // final bracket
  double upper = 0.0;
  int evaluations = 0;
};

// Bisection between `from` (before the transition) and `to` (after it)
// until the bracket is narrower than `resolution`.
CriticalPoint find_critical(const SpectrumProblem& problem, double from, double to,
                            Transition which, double resolution);

// rho(x) = phi_i(x) psi_i(x) summed over components, scaled to integrate to 1.
Eigen::VectorXcd biorthogonal_density(const LabeledSpectrum& s, Eigen::Index i,
                                      const Grid& grid);

}  // namespace kgpair
