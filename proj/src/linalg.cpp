#include "cdsim/linalg.hpp"

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

#include <string>

#include "cdsim/error.hpp"

namespace cdsim {

EigenDecomposition eigen_decompose(const Eigen::MatrixXcd& a, bool with_vectors) {
    if (a.rows() != a.cols()) throw LinearAlgebraError("eigen_decompose: matrix is not square");
    const auto n = static_cast<lapack_int>(a.rows());
    EigenDecomposition out;
    out.values.resize(n);
    if (n == 0) return out;
    if (!a.allFinite()) throw LinearAlgebraError("eigen_decompose: non-finite matrix entries");

    Eigen::MatrixXcd work = a;  // zgeev overwrites its input
    if (with_vectors) out.vectors.resize(n, n);
    auto* vr = with_vectors ? reinterpret_cast<lapack_complex_double*>(out.vectors.data()) : nullptr;
    const lapack_int info =
        LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', with_vectors ? 'V' : 'N', n,
                      reinterpret_cast<lapack_complex_double*>(work.data()), n,
                      reinterpret_cast<lapack_complex_double*>(out.values.data()), nullptr, 1, vr, n);
    if (info != 0)
        throw LinearAlgebraError("eigensolver failed (zgeev info = " + std::to_string(info) + ")");
    return out;
}

}  // namespace cdsim
