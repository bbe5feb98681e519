#pragma once

#include <Eigen/Core>

#include "kgpair/core.hpp"

namespace kgpair::detail {

struct EigenDecomposition {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;  // right eigenvectors, unit 2-norm columns
};

// Nonsymmetric eigendecomposition through LAPACK ?geev. Real input takes the
// dgeev path, which returns conjugate pairs as exact conjugates.
EigenDecomposition general_eigen(const Eigen::MatrixXcd& a);

}  // namespace kgpair::detail
