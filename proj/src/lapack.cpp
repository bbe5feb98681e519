#include "lapack.hpp"

#include <complex>
#include <string>

#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace kgpair::detail {

namespace {

EigenDecomposition real_eigen(const Eigen::MatrixXd& m) {
  const lapack_int n = static_cast<lapack_int>(m.rows());
  Eigen::MatrixXd a = m;
  Eigen::VectorXd wr(n), wi(n);
  Eigen::MatrixXd vr(n, n);
  double dummy = 0.0;
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'V', n, a.data(), n,
                                        wr.data(), wi.data(), &dummy, 1, vr.data(), n);
  if (info != 0) {
    throw NumericError("dgeev failed to converge (info " + std::to_string(info) + ")");
  }
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (lapack_int j = 0; j < n; ++j) {
    out.values[j] = Complex(wr[j], wi[j]);
    if (wi[j] == 0.0) {
      out.vectors.col(j) = vr.col(j).cast<Complex>();
    } else {
      // Columns j, j+1 hold the real and imaginary parts of the pair.
      out.values[j + 1] = Complex(wr[j + 1], wi[j + 1]);
      for (lapack_int i = 0; i < n; ++i) {
        out.vectors(i, j) = Complex(vr(i, j), vr(i, j + 1));
        out.vectors(i, j + 1) = Complex(vr(i, j), -vr(i, j + 1));
      }
      ++j;
    }
  }
  return out;
}

EigenDecomposition complex_eigen(const Eigen::MatrixXcd& m) {
  const lapack_int n = static_cast<lapack_int>(m.rows());
  Eigen::MatrixXcd a = m;
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  Complex dummy = 0.0;
  const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, a.data(), n,
                                        out.values.data(), &dummy, 1,
                                        out.vectors.data(), n);
  if (info != 0) {
    throw NumericError("zgeev failed to converge (info " + std::to_string(info) + ")");
  }
  return out;
}

}  // namespace

EigenDecomposition general_eigen(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ConfigError("eigensolve needs a nonempty square matrix");
  }
  if (!a.allFinite()) throw NumericError("eigensolve: matrix has non-finite entries");
  if (a.imag().cwiseAbs().maxCoeff() == 0.0) return real_eigen(a.real());
  return complex_eigen(a);
}

}  // namespace kgpair::detail
