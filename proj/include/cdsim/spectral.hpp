#pragma once

#include <iosfwd>

#include "cdsim/coupling.hpp"

namespace cdsim {

/// Collective modes of a frozen configuration, sorted by decay rate (ascending).
struct ModeSpectrum {
    CVector eigenvalues;
    Eigen::VectorXd gamma;  // decay rate -2 Re(lambda)
    Eigen::VectorXd omega;  // frequency shift Im(lambda)
    Eigen::VectorXd ipr;    // per-atom inverse participation ratio; empty if not computed

    long size() const { return static_cast<long>(gamma.size()); }
};

/// Full eigen-decomposition of the evolution matrix. IPR of right eigenvector
/// psi: sum_i (sum_m |psi(i,m)|^2)^2 / (sum |psi|^2)^2, so a mode on a single
/// atom has IPR 1.
ModeSpectrum mode_spectrum(const EvolutionMatrix& matrix, bool with_ipr = true);

/// Fraction of modes with decay rate below gamma_cut (> 0).
double subradiant_fraction(const ModeSpectrum& spectrum, double gamma_cut);

/// Columns n,gamma_n,omega_n,ipr_n (ipr_n blank when not computed).
void write_spectrum_csv(std::ostream& out, const ModeSpectrum& spectrum);

}  // namespace cdsim
