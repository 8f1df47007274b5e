#pragma once

#include <Eigen/LU>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cdsim/config.hpp"
#include "cdsim/coupling.hpp"
#include "cdsim/ensemble.hpp"
#include "cdsim/linalg.hpp"

namespace cdsim {

/// Single-excitation amplitudes b_e at time t, indexed by SublevelIndex::flat().
struct ExcitationVector {
    CVector b;
    double t = 0.0;
};

struct IntegratorOptions {
    double rel_tol = 1e-6;
    double abs_tol = 1e-10;        // in units of max(|b0|, rabi)
    double kernel_refresh = 1e-3;  // max displacement between kernel and true positions is half this
    double near_field = 2.0;       // pairs closer than this are coupled at exact positions
    double max_step = std::numeric_limits<double>::infinity();
    double min_step = 1e-12;
};

IntegratorOptions integrator_options(const RunPlan& plan);

struct IntegratorStats {
    long steps = 0;
    long rejected = 0;
    long reassemblies = 0;
    long rhs_evaluations = 0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<CVector> states;
    IntegratorStats stats;
};

/// Called once per requested sample time with the interpolated state.
using SampleObserver = std::function<void(double t, const CVector& b)>;

/// Integrate db/dt = A(t) b - (i/2) Omega(t) with an embedded Dormand-Prince 5(4)
/// pair and its 4th-order continuous extension at the requested times.
///
/// A(t) is piecewise constant: the kernel is rebuilt every kernel_refresh/v_max,
/// from positions at the middle of each interval, so no atom ever sits further
/// than kernel_refresh/2 from where the kernel places it. Steps never straddle a
/// rebuild. Pairs closer than near_field at a rebuild are taken out of the
/// frozen kernel and re-evaluated at every stage, as is the drive phase e^{iz(t)}.
/// params.rabi = 0 switches the drive off.
///
/// Throws IntegrationError on step-size underflow (message carries the closest
/// pair distance) or on a non-finite state.
IntegratorStats integrate(const ExcitationVector& b0, const AtomKinematics& kinematics, const PhysParams& params,
                          std::span<const double> t_grid, const IntegratorOptions& options,
                          const SampleObserver& observer);

Trajectory integrate(const ExcitationVector& b0, const AtomKinematics& kinematics, const PhysParams& params,
                     std::span<const double> t_grid, const IntegratorOptions& options);

/// Stationary point of the amplitude equations for frozen atoms: A b = (i/2) Omega.
/// Throws LinearAlgebraError when the matrix is numerically singular.
ExcitationVector steady_state(const EvolutionMatrix& matrix, const CVector& drive);

/// Exact field-free evolution exp(A t) b0 for frozen atoms. Diagonalizes once;
/// falls back to scaling-and-squaring when the eigenvector basis is
/// ill-conditioned (condition number above 1e8).
class StaticPropagator {
public:
    explicit StaticPropagator(const EvolutionMatrix& matrix);

    ExcitationVector propagate(const ExcitationVector& b0, double t) const;
    /// One amplitude of exp(A t) b0 at each of `times` (all >= 0).
    std::vector<cplx> component(const CVector& b0, Eigen::Index index, std::span<const double> times) const;

    double eigenvector_condition() const { return condition_; }
    bool uses_eigenbasis() const { return use_eigenbasis_; }
    const CVector& eigenvalues() const { return decomposition_.values; }

    static constexpr double max_condition = 1e8;

private:
    CMatrix a_;
    EigenDecomposition decomposition_;
    Eigen::PartialPivLU<CMatrix> lu_;
    double condition_ = 1.0;
    bool use_eigenbasis_ = true;
};

ExcitationVector propagate_static(const EvolutionMatrix& matrix, const ExcitationVector& b0, double t);

}  // namespace cdsim
