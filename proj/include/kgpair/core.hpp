#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace kgpair {

using Complex = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user input: malformed configs, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failures inside a numerical kernel (solver breakdown, instability).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Hartree atomic units by default.
struct PhysicalConstants {
  double hbar = 1.0;
  double mass = 1.0;
  double c = 137.036;
  double charge = -1.0;

  double compton_length() const { return hbar / (mass * c); }
  double rest_energy() const { return mass * c * c; }
  double time_unit() const { return hbar / rest_energy(); }
  double momentum_unit() const { return mass * c; }

  void validate() const;
};

struct Tolerances {
  double im_eps = 0.0;
  double pair_eps = 0.0;
  double biorth_eps = 1e-10;
  double loc_threshold = 0.75;

  static Tolerances defaults(const PhysicalConstants& k);
  void validate() const;
};

// Periodic lattice x_i = -L/2 + i L/N with the conjugate momenta
// p_n = 2 pi hbar n / L, n in [-N/2, N/2), always handled in ascending order.
class Grid {
 public:
  Grid(int points, double length);

  int size() const { return points_; }
  double length() const { return length_; }
  double spacing() const { return length_ / points_; }
  double position(int i) const { return -0.5 * length_ + i * spacing(); }
  const Eigen::VectorXd& positions() const { return x_; }

  int mode_number(int k) const { return k - points_ / 2; }
  Eigen::VectorXd momenta(double hbar) const;

  // Index of the point at -x_i.
  int mirror_index(int i) const { return (points_ - i) % points_; }

  // c_n = dx / sqrt(L) * sum_i psi_i exp(-i p_n x_i / hbar), ascending n.
  // The pair is unitary up to the dx weight: sum |c|^2 = dx * sum |psi|^2.
  Eigen::VectorXcd to_momentum(const Eigen::VectorXcd& psi) const;
  Eigen::VectorXcd to_position(const Eigen::VectorXcd& amplitudes) const;

  bool operator==(const Grid& other) const {
    return points_ == other.points_ && length_ == other.length_;
  }

 private:
  int points_;
  double length_;
  Eigen::VectorXd x_;
};

Grid make_grid(int points, double length);

// Shared diagnostic output; silenced by set_quiet(true).
void set_quiet(bool quiet);
bool quiet();
void warn(const std::string& message);

}  // namespace kgpair
