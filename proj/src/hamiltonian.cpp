#include "kgpair/hamiltonian.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace kgpair {

namespace {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("truncated matrix dump");
  return to_little(v);
}

}  // namespace

Eigen::MatrixXd kinetic_operator(const Grid& grid, double hbar, DerivativeScheme scheme) {
  const int n = grid.size();
  const double dx = grid.spacing();
  Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
  if (scheme == DerivativeScheme::Spectral) {
    const Eigen::VectorXd p = grid.momenta(hbar);
    for (int d = 0; d <= n / 2; ++d) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += p[k] * p[k] * std::cos(p[k] * d * dx / hbar);
      col[d] = s / n;
    }
    for (int d = n / 2 + 1; d < n; ++d) col[d] = col[n - d];
  } else {
    const double a = hbar * hbar / (dx * dx);
    col[0] = 2.0 * a;
    col[1] = -a;
    col[n - 1] = -a;
  }
  Eigen::MatrixXd k(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) k(i, j) = col[(i - j + n) % n];
  }
  return k;
}

double kinetic_symbol(double p, const Grid& grid, double hbar, DerivativeScheme scheme) {
  if (scheme == DerivativeScheme::Spectral) return p * p;
  const double dx = grid.spacing();
  const double s = std::sin(0.5 * p * dx / hbar);
  return 4.0 * hbar * hbar / (dx * dx) * s * s;
}

FVHamiltonian assemble(const Grid& grid, const FieldConfig& fields,
                       const PhysicalConstants& k, DerivativeScheme scheme) {
  k.validate();
  validate(fields);
  const int n = grid.size();
  Eigen::MatrixXd kin = kinetic_operator(grid, k.hbar, scheme);
  kin.diagonal() += sample_transverse_kinetic(fields, grid, k);
  kin /= 2.0 * k.mass;
  const Eigen::VectorXd v = sample_scalar(fields.scalar, grid);
  const double mc2 = k.rest_energy();

  Eigen::MatrixXd h(2 * n, 2 * n);
  const auto upper = Eigen::seqN(0, n, 2);
  const auto lower = Eigen::seqN(1, n, 2);
  h(upper, upper) = kin;
  h(upper, lower) = kin;
  h(lower, upper) = -kin;
  h(lower, lower) = -kin;
  for (int i = 0; i < n; ++i) {
    h(2 * i, 2 * i) += v[i] + mc2;
    h(2 * i + 1, 2 * i + 1) += v[i] - mc2;
  }
  return FVHamiltonian{h.cast<Complex>(), grid, fields, k, scheme};
}

Eigen::VectorXd eta_diagonal(Eigen::Index dimension) {
  Eigen::VectorXd e(dimension);
  for (Eigen::Index i = 0; i < dimension; ++i) e[i] = (i % 2 == 0) ? 1.0 : -1.0;
  return e;
}

Complex pseudo_inner(const FVState& a, const FVState& b, const Grid& grid) {
  if (a.size() != 2 * grid.size() || b.size() != 2 * grid.size()) {
    throw ConfigError("pseudo_inner: state size does not match the grid");
  }
  Complex s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); i += 2) {
    s += std::conj(a[i]) * b[i] - std::conj(a[i + 1]) * b[i + 1];
  }
  return s * grid.spacing();
}

double pseudo_hermiticity_residual(const Eigen::MatrixXcd& h) {
  const Eigen::VectorXd e = eta_diagonal(h.rows());
  const Eigen::MatrixXcd t = e.asDiagonal() * h.adjoint() * e.asDiagonal();
  return (t - h).norm() / h.norm();
}

void write_matrix_dump(const Eigen::MatrixXcd& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put(out, m(r, c).real());
      put(out, m(r, c).imag());
    }
  }
}

Eigen::MatrixXcd read_matrix_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double re = get<double>(in);
      const double im = get<double>(in);
      m(r, c) = Complex(re, im);
    }
  }
  return m;
}

}  // namespace kgpair
