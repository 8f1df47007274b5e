#pragma once

#include <Eigen/Core>
#include <complex>
#include <span>

#include "cdsim/config.hpp"
#include "cdsim/ensemble.hpp"

namespace cdsim {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;

/// Excited-state index for J=0 -> J=1 atoms: three Zeeman sublevels per atom,
/// flattened as 3*atom + (m+1).
struct SublevelIndex {
    long atom = 0;
    int m = 0;

    long flat() const { return 3 * atom + (m + 1); }
    static SublevelIndex from_flat(long k) { return {k / 3, static_cast<int>(k % 3) - 1}; }
};

/// Spherical basis vector e_m with the quantization axis along z:
/// e_0 = z, e_{+1} = -(x + i y)/sqrt2, e_{-1} = (x - i y)/sqrt2.
CVec3 spherical_unit_vector(int m);

/// Free-space dyadic kernel for separation r (k0 = 1):
/// (e^{ir}/r^3) { delta [1 - ir - r^2] - rhat rhat [3 - 3ir - r^2] }.
/// Throws CoincidentAtoms for r = 0.
CMat3 green_tensor(const Vec3& r);

/// Coupling V between sublevel m of one atom and m' of another atom displaced
/// by r: V = -(3/2) e_m^* . G(r) . e_m'. The factor 3/2 makes the single-atom
/// linewidth equal to one.
cplx pair_coupling(const Vec3& r, int m, int mp);

/// All nine (m, m') couplings at once, row/column order m = -1, 0, +1.
/// V(-r) = V(r), so the same block serves both atoms of the pair.
CMat3 pair_coupling_block(const Vec3& r);

/// Detuning of the transition to sublevel m: delta - (m - 1) * zeeman, so the
/// sigma+ transition (m = +1) sits at delta.
double detuning(int m, const PhysParams& params);

/// Polarization vector of the incident light (sigma+ along z).
CVec3 incident_polarization();

/// Rabi frequency at each sublevel: rabi * e^{i z} on m = +1, zero elsewhere.
CVector drive_vector(std::span<const Vec3> positions, const PhysParams& params);
/// Same, from z coordinates only.
void drive_vector_from_z(std::span<const double> z, double rabi, CVector& out);

/// Dense 3N x 3N generator of the amplitude equations:
/// A[e,e] = i delta_e - 1/2, A[e,e'] = (i/2) V_ee' for different atoms,
/// zero between sublevels of the same atom.
struct EvolutionMatrix {
    CMatrix a;
    Positions positions;
    double time = 0.0;

    long dim() const { return a.rows(); }
};

EvolutionMatrix assemble(std::span<const Vec3> positions, const PhysParams& params, double time = 0.0);
/// Reassemble into an existing matrix (no reallocation when the size matches).
void assemble_into(EvolutionMatrix& out, std::span<const Vec3> positions, const PhysParams& params, double time);

/// Smallest pairwise distance, infinity for fewer than two atoms.
double closest_pair_distance(std::span<const Vec3> positions);

}  // namespace cdsim
