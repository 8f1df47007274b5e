#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <span>
#include <vector>

#include "cdsim/config.hpp"
#include "cdsim/rng.hpp"

namespace cdsim {

using Vec3 = Eigen::Vector3d;
using Positions = std::vector<Vec3>;

/// Axis-aligned box the atoms live in. The beam axis is the line
/// x = y = (centre of the transverse face), entering at z = lo.z().
struct Box {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Ones();

    Vec3 centre() const { return 0.5 * (lo + hi); }
    bool contains(const Vec3& p) const;
};

Box box_of(const Geometry& geometry);

/// Uniform i.i.d. positions in the box. With exclusion_radius > 0 each new atom
/// is redrawn until it keeps that distance from the atoms already placed.
Positions sample_positions(const Box& box, long n, RngStream& rng, double exclusion_radius = 0.0);
/// Same, appending to atoms already placed (which take part in the exclusion test).
void append_positions(const Box& box, long count, RngStream& rng, double exclusion_radius, Positions& into);

/// Each Cartesian component i.i.d. normal with mean 0 and standard deviation v0.
Positions sample_velocities(long n, double v0, RngStream& rng);

/// Ballistic motion inside a box with specular (elastic) walls.
class AtomKinematics {
public:
    AtomKinematics() = default;
    AtomKinematics(Box box, Positions positions, Positions velocities, double t = 0.0);

    long size() const { return static_cast<long>(positions_.size()); }
    const Box& box() const { return box_; }
    const Positions& positions() const { return positions_; }
    const Positions& velocities() const { return velocities_; }
    double time() const { return t_; }

    /// Largest atomic speed; conserved by advance().
    double max_speed() const;
    bool is_static() const { return max_speed() == 0.0; }

    /// Move every atom for dt, folding the straight-line path back into the box
    /// at each wall crossing. Any number of reflections within dt is exact.
    void advance(double dt);

    /// Positions at t >= time() without mutating.
    Positions positions_at(double t) const;
    void positions_at(double t, Positions& out) const;
    Vec3 position_at(long i, double t) const;
    /// z coordinates only, for the drive phase.
    void z_at(double t, std::span<double> out) const;

private:
    Box box_;
    Positions positions_;
    Positions velocities_;
    double t_ = 0.0;
};

/// Snapshot CSV with header atom,x,y,z,vx,vy,vz.
void write_snapshot(std::ostream& out, const AtomKinematics& kin);
/// Reads a snapshot written by write_snapshot; the box and time are supplied.
AtomKinematics read_snapshot(std::istream& in, const Box& box, double t = 0.0);

}  // namespace cdsim
