#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cdsim/config.hpp"
#include "cdsim/coupling.hpp"
#include "cdsim/ensemble.hpp"

namespace cdsim {

/// Square detector in the plane z = box.hi.z + offset, centred on the beam axis,
/// sampled with an order x order midpoint rule.
struct DetectorSpec {
    double z = 0.0;
    double centre_x = 0.0;
    double centre_y = 0.0;
    double side = 1.0;
    int order = 32;

    std::vector<Vec3> points() const;
};

DetectorSpec detector_for(const Geometry& geometry, int order);

/// Orthonormal polarization triad used to resolve the detected intensity.
using PolarizationBasis = std::array<CVec3, 3>;
PolarizationBasis spherical_basis();

/// Far-field radiation pattern of sublevel m of an atom at atom_pos, projected
/// on polarization u: (e^{iR}/R) [u^*.e_m - (u^*.Rhat)(e_m.Rhat)].
cplx scattered_pattern(const Vec3& r_obs, const Vec3& atom_pos, int m, const CVec3& u);

/// Total field at r_obs (Rabi units): incident e_{+1} rabi e^{iz} plus the
/// far-field radiation of every excited sublevel, -(3/2) b_e times the
/// transverse dipole pattern. Throws if r_obs lies inside the box.
CVec3 field_at(const Vec3& r_obs, const CVector& b, std::span<const Vec3> positions, const PhysParams& params,
               const Box& box);

/// Detector-averaged total intensity normalized by the free-beam intensity.
/// Summing |u_k^*.E|^2 over an orthonormal triad gives |E|^2 for any triad.
double transmission(const CVector& b, std::span<const Vec3> positions, const PhysParams& params,
                    const Box& box, const DetectorSpec& detector,
                    const PolarizationBasis& basis = spherical_basis());

/// |b_s|^2.
double survival_probability(const CVector& b, SublevelIndex s);

/// Sampled scalar observable of one configuration.
struct Trace {
    std::vector<double> t;
    std::vector<double> value;
    long config_id = 0;
};

/// Trapezoidal mean over [t_start, t_end]; window edges between samples are
/// linearly interpolated. Throws if the trace does not cover the window.
double time_average(const Trace& trace, double t_start, double t_end);

/// Trace CSV: '#' header lines (parameter snapshot), then t_gamma,value,config_id.
void write_trace_csv(std::ostream& out, std::span<const Trace> traces, const std::string& header_comment);
std::vector<Trace> read_trace_csv(std::istream& in);

/// Shortest text that reproduces x to 12 significant digits.
std::string format_number(double x);

}  // namespace cdsim
