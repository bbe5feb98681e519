#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "kgpair/core.hpp"
#include "kgpair/fields.hpp"
#include "kgpair/hamiltonian.hpp"
#include "kgpair/spectral.hpp"

namespace kgpair {

namespace detail {
class PeriodicFFT;
}

// Plane-wave eigenmodes of the field-free Hamiltonian. Column k of
// `positive` / `negative` is the mode with the k-th ascending lattice momentum;
// pseudo-norms are +1 / -1.
struct FreeModeBasis {
  Grid grid;
  PhysicalConstants constants;
  TransverseMomenta transverse;
  DerivativeScheme scheme = DerivativeScheme::Spectral;
  Eigen::VectorXd momenta;
  Eigen::VectorXd energies;  // E_p > 0
  Eigen::MatrixX2d spinors;  // (upper, lower) amplitude of the positive mode per momentum
  Eigen::MatrixXcd positive;
  Eigen::MatrixXcd negative;

  Eigen::Index size() const { return momenta.size(); }
};

FreeModeBasis build_free_basis(const Grid& grid, const PhysicalConstants& k,
                               const TransverseMomenta& transverse = {},
                               DerivativeScheme scheme = DerivativeScheme::Spectral);

// C = P+^dagger eta X dx, evaluated with FFTs. Row k belongs to the k-th positive mode.
Eigen::MatrixXcd creation_amplitudes(const FreeModeBasis& basis, const Eigen::MatrixXcd& evolved);

// N = ||P+^dagger eta P-(t) dx||_F^2
double particle_number(const FreeModeBasis& basis, const Eigen::MatrixXcd& evolved);

// rho(x) = sum over columns of v^dagger sigma_3 v with v = P+ C; integrates to N.
Eigen::VectorXd density_from_amplitudes(const FreeModeBasis& basis,
                                        const Eigen::MatrixXcd& amplitudes);
Eigen::VectorXd particle_density(const FreeModeBasis& basis, const Eigen::MatrixXcd& evolved);

// R exp(-i Lambda t / hbar) L applied to the columns of `states`.
Eigen::MatrixXcd propagate_static(const BiorthogonalSpectrum& s, const Eigen::MatrixXcd& states,
                                  double t, double hbar);

using HamiltonianProvider = std::function<Eigen::MatrixXcd(double)>;

// One implicit-midpoint step (I + i H dt/2hbar) X' = (I - i H dt/2hbar) X with
// H evaluated at t + dt/2.
Eigen::MatrixXcd step_time_dependent(const HamiltonianProvider& h, const Eigen::MatrixXcd& states,
                                     double t, double dt, double hbar);

// The same step for a fixed H, factored once.
class CrankNicolson {
 public:
  CrankNicolson(const Eigen::MatrixXcd& h, double dt, double hbar);
  Eigen::MatrixXcd step(const Eigen::MatrixXcd& states) const;

 private:
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

// Crank-Nicolson for H(v) = H_free + v diag(shape) (shape acting on both
// components), with H_free the translation-invariant field-free part.
// M_free is inverted in momentum space; the localized shape enters through a
// Woodbury correction on the points where it is non-negligible.
class ScaledPotentialPropagator {
 public:
  ScaledPotentialPropagator(const Grid& grid, const PhysicalConstants& k,
                            const TransverseMomenta& transverse, DerivativeScheme scheme,
                            const Eigen::VectorXd& shape, double dt);
  ~ScaledPotentialPropagator();

  void step(Eigen::MatrixXcd& states, double v);
  Eigen::MatrixXcd hamiltonian(double v) const;
  double dt() const { return dt_; }
  Eigen::Index support_size() const { return support_.size(); }

 private:
  void prepare(double v);

  Grid grid_;
  PhysicalConstants constants_;
  DerivativeScheme scheme_;
  TransverseMomenta transverse_;
  Eigen::VectorXd shape_;
  double dt_;
  std::vector<Eigen::Matrix2cd> inverse_blocks_;
  std::vector<Eigen::Index> support_;  // FV indices where the shape acts
  Eigen::VectorXd support_shape_;
  Eigen::MatrixXcd q_;  // M_free^{-1} P
  Eigen::MatrixXcd g_;  // P^T M_free^{-1} P
  Eigen::MatrixXcd w_;  // (I + i a v D G)^{-1} i a v D
  double prepared_v_;
  bool prepared_ = false;
  std::unique_ptr<detail::PeriodicFFT> fft_;
};

struct DensitySnapshot {
  double t = 0.0;
  Eigen::VectorXd rho;
};

struct EvolutionRecord {
  std::vector<double> times;
  std::vector<double> number;
  std::vector<double> log_number;
  std::vector<DensitySnapshot> densities;
  std::optional<double> growth_rate;
  std::optional<double> frequency;
  // Back-reaction runs only.
  std::vector<double> V0;
  std::vector<double> E_in;
  std::vector<double> E_ex;
  std::string provenance;
};

// N(t) for a static Hamiltonian from its eigensystem: with A = C(R),
// B = L P-, z_i = exp(-i E_i t / hbar), N(t) = z^dagger M z where
// M = (A^dagger A) o (B B^dagger)^T. The largest |z_i| is factored out.
class StaticEvolution {
 public:
  StaticEvolution(const BiorthogonalSpectrum& s, const FreeModeBasis& basis);

  double log_number(double t) const;
  double number(double t) const;
  Eigen::MatrixXcd negative_modes(double t) const;
  Eigen::MatrixXcd amplitudes(double t) const;
  Eigen::VectorXd density(double t) const;

 private:
  Eigen::VectorXcd phases(double t, double& log_scale) const;

  const BiorthogonalSpectrum* spectrum_;
  const FreeModeBasis* basis_;
  Eigen::MatrixXcd a_;
  Eigen::MatrixXcd b_;
  Eigen::MatrixXcd m_;
};

struct EvolutionOptions {
  double t_max = 0.0;
  int samples = 2000;  // intervals; samples + 1 time points including t = 0
  std::vector<double> density_times;
};

// t_max = min(12 / (2 max|Im E| / hbar), 2000 hbar/mc^2)
double default_run_length(const BiorthogonalSpectrum& s, const PhysicalConstants& k);

EvolutionRecord evolve_static(const BiorthogonalSpectrum& s, const FreeModeBasis& basis,
                              const EvolutionOptions& options);

struct FitWindow {
  double begin = 0.0;
  double end = 0.0;
};

struct GrowthFit {
  double rate = 0.0;
  double intercept = 0.0;
  double standard_error = 0.0;
  FitWindow window;
  int samples = 0;
};

// Last half of the run, starting no earlier than the first time N exceeds
// ten times its first local maximum.
FitWindow default_fit_window(const EvolutionRecord& r);

// Least-squares slope of ln N.
GrowthFit fit_growth_rate(const EvolutionRecord& r, std::optional<FitWindow> window = {});

// Slope of ln N over a trailing window (NaN where the window is incomplete).
std::vector<double> running_growth_rate(const EvolutionRecord& r, int window_samples);

// Angular frequency of the dominant Fourier peak of N(t) exp(-Gamma t) over the
// window; empty when no peak stands out from the spectrum.
std::optional<double> oscillation_frequency(const EvolutionRecord& r,
                                            std::optional<double> growth_rate = {},
                                            std::optional<FitWindow> window = {});

}  // namespace kgpair
