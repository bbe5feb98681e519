#include "kgpair/core.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>

#include "fourier.hpp"

namespace kgpair {

namespace {

std::atomic<bool> g_quiet{false};
std::mutex g_warn_mutex;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void PhysicalConstants::validate() const {
  if (!positive_finite(hbar)) throw ConfigError("hbar must be positive");
  if (!positive_finite(mass)) throw ConfigError("mass must be positive");
  if (!positive_finite(c)) throw ConfigError("c must be positive");
  if (!std::isfinite(charge) || charge == 0.0) {
    throw ConfigError("charge must be finite and nonzero");
  }
}

Tolerances Tolerances::defaults(const PhysicalConstants& k) {
  Tolerances t;
  t.im_eps = 1e-8 * k.rest_energy();
  t.pair_eps = 1e-8 * k.rest_energy();
  return t;
}

void Tolerances::validate() const {
  if (!positive_finite(im_eps) || !positive_finite(pair_eps) ||
      !positive_finite(biorth_eps) || !positive_finite(loc_threshold)) {
    throw ConfigError("tolerances must be strictly positive");
  }
  if (loc_threshold >= 1.0) throw ConfigError("loc_threshold must be below 1");
}

Grid::Grid(int points, double length) : points_(points), length_(length) {
  if (points < 8 || points % 2 != 0) {
    throw ConfigError("grid needs an even number of points >= 8, got " +
                      std::to_string(points));
  }
  if (!positive_finite(length)) throw ConfigError("grid length must be positive");
  x_.resize(points);
  for (int i = 0; i < points; ++i) x_[i] = position(i);
}

Eigen::VectorXd Grid::momenta(double hbar) const {
  Eigen::VectorXd p(points_);
  for (int k = 0; k < points_; ++k) {
    p[k] = 2.0 * M_PI * hbar * mode_number(k) / length_;
  }
  return p;
}

Eigen::VectorXcd Grid::to_momentum(const Eigen::VectorXcd& psi) const {
  if (psi.size() != points_) throw ConfigError("to_momentum: size mismatch");
  detail::PeriodicFFT fft(*this);
  Eigen::VectorXcd out(points_);
  fft.forward(psi.data(), 1, out.data(), 1);
  return out;
}

Eigen::VectorXcd Grid::to_position(const Eigen::VectorXcd& amplitudes) const {
  if (amplitudes.size() != points_) throw ConfigError("to_position: size mismatch");
  detail::PeriodicFFT fft(*this);
  Eigen::VectorXcd out(points_);
  fft.inverse(amplitudes.data(), 1, out.data(), 1);
  return out;
}

Grid make_grid(int points, double length) { return Grid(points, length); }

void set_quiet(bool q) { g_quiet = q; }

bool quiet() { return g_quiet; }

void warn(const std::string& message) {
  if (g_quiet) return;
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

}  // namespace kgpair
