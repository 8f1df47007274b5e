#pragma once

#include <Eigen/Core>

namespace cdsim {

/// Eigen-decomposition of a general complex matrix (LAPACK zgeev).
/// Right eigenvectors are unit-norm columns of `vectors` when requested.
struct EigenDecomposition {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
};

EigenDecomposition eigen_decompose(const Eigen::MatrixXcd& a, bool with_vectors);

}  // namespace cdsim
