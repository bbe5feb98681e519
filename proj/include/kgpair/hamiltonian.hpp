#pragma once

#include <filesystem>

#include <Eigen/Core>

#include "kgpair/core.hpp"
#include "kgpair/fields.hpp"

namespace kgpair {

enum class DerivativeScheme { Spectral, FiniteDifference3 };

// Two complex components per grid point, interleaved: entry 2*i + c holds
// component c at x_i. The metric eta is sigma_3 repeated along the diagonal.
using FVState = Eigen::VectorXcd;

inline Eigen::Index fv_index(Eigen::Index point, int component) {
  return 2 * point + component;
}

struct FVHamiltonian {
  Eigen::MatrixXcd matrix;
  Grid grid;
  FieldConfig fields;
  PhysicalConstants constants;
  DerivativeScheme scheme = DerivativeScheme::Spectral;

  Eigen::Index dimension() const { return matrix.rows(); }
};

// Matrix of -hbar^2 d^2/dx^2 on the periodic grid (real symmetric circulant).
Eigen::MatrixXd kinetic_operator(const Grid& grid, double hbar, DerivativeScheme scheme);

// Eigenvalue of kinetic_operator on the plane wave with momentum p.
double kinetic_symbol(double p, const Grid& grid, double hbar, DerivativeScheme scheme);

// H = (sigma_3 + i sigma_2)/(2m) K + q phi + sigma_3 m c^2 with
// K = -hbar^2 d^2/dx^2 + (p_y - q A_y)^2 + p_z^2.
FVHamiltonian assemble(const Grid& grid, const FieldConfig& fields,
                       const PhysicalConstants& k,
                       DerivativeScheme scheme = DerivativeScheme::Spectral);

Eigen::VectorXd eta_diagonal(Eigen::Index dimension);

// eta * m
template <typename Derived>
typename Derived::PlainObject apply_eta(const Eigen::MatrixBase<Derived>& m) {
  typename Derived::PlainObject out = m;
  for (Eigen::Index r = 1; r < out.rows(); r += 2) out.row(r) *= -1.0;
  return out;
}

// a^dagger eta b dx, column by column.
template <typename DerivedA, typename DerivedB>
Eigen::MatrixXcd pseudo_gram(const Eigen::MatrixBase<DerivedA>& a,
                             const Eigen::MatrixBase<DerivedB>& b, double dx) {
  return dx * (a.adjoint() * apply_eta(b));
}

// <a|b>_eta = sum_i a^dagger(x_i) sigma_3 b(x_i) dx
Complex pseudo_inner(const FVState& a, const FVState& b, const Grid& grid);

// ||eta H^dagger eta - H||_F / ||H||_F
double pseudo_hermiticity_residual(const Eigen::MatrixXcd& h);

// Little-endian: uint64 rows, uint64 cols, then row-major (re, im) doubles.
void write_matrix_dump(const Eigen::MatrixXcd& m, const std::filesystem::path& path);
Eigen::MatrixXcd read_matrix_dump(const std::filesystem::path& path);

}  // namespace kgpair
