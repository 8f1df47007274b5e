#include "cdsim/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cdsim/error.hpp"

namespace cdsim {

namespace {

struct Folded {
    double x;
    double v;
};

// Reflect the unfolded coordinate lo + w back into [lo, hi]. The path crosses
// floor(w / L) walls; an odd count reverses the velocity.
Folded fold(double x0, double v, double dt, double lo, double hi) {
    const double length = hi - lo;
    const double w = (x0 - lo) + v * dt;
    if (w >= 0.0 && w <= length) return {lo + w, v};
    const double k = std::floor(w / length);
    const double r = w - k * length;
    const bool odd = std::fmod(std::abs(k), 2.0) == 1.0;
    const double x = odd ? hi - r : lo + r;
    return {std::clamp(x, lo, hi), odd ? -v : v};
}

}  // namespace

bool Box::contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

Box box_of(const Geometry& g) {
    if (g.shape == Shape::cube) return {Vec3::Zero(), Vec3(g.l, g.l, g.l)};
    return {Vec3::Zero(), Vec3(g.lt, g.lt, g.l)};
}

void append_positions(const Box& box, long count, RngStream& rng, double exclusion_radius, Positions& into) {
    into.reserve(into.size() + static_cast<std::size_t>(count));
    const double r2 = exclusion_radius * exclusion_radius;
    constexpr int max_attempts = 100000;
    for (long i = 0; i < count; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt == max_attempts)
                throw Error("cannot place atom " + std::to_string(into.size()) +
                            " with the requested exclusion radius");
            Vec3 p(rng.uniform(box.lo.x(), box.hi.x()), rng.uniform(box.lo.y(), box.hi.y()),
                   rng.uniform(box.lo.z(), box.hi.z()));
            const bool clear = r2 == 0.0 || std::none_of(into.begin(), into.end(), [&](const Vec3& q) {
                                   return (p - q).squaredNorm() < r2;
                               });
            if (clear) {
                into.push_back(p);
                break;
            }
        }
    }
}

Positions sample_positions(const Box& box, long n, RngStream& rng, double exclusion_radius) {
    Positions out;
    append_positions(box, n, rng, exclusion_radius, out);
    return out;
}

Positions sample_velocities(long n, double v0, RngStream& rng) {
    Positions out(static_cast<std::size_t>(n));
    for (auto& v : out) {
        const double a = rng.normal();
        const double b = rng.normal();
        const double c = rng.normal();
        v = v0 * Vec3(a, b, c);
    }
    return out;
}

AtomKinematics::AtomKinematics(Box box, Positions positions, Positions velocities, double t)
    : box_(box), positions_(std::move(positions)), velocities_(std::move(velocities)), t_(t) {
    if (positions_.size() != velocities_.size())
        throw Error("positions and velocities differ in length");
}

double AtomKinematics::max_speed() const {
    double vmax = 0.0;
    for (const auto& v : velocities_) vmax = std::max(vmax, v.norm());
    return vmax;
}

void AtomKinematics::advance(double dt) {
    if (dt < 0.0) throw Error("advance: negative time step");
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            const auto f = fold(positions_[i][a], velocities_[i][a], dt, box_.lo[a], box_.hi[a]);
            positions_[i][a] = f.x;
            velocities_[i][a] = f.v;
        }
    }
    t_ += dt;
}

Positions AtomKinematics::positions_at(double t) const {
    Positions out;
    positions_at(t, out);
    return out;
}

void AtomKinematics::positions_at(double t, Positions& out) const {
    const double dt = t - t_;
    if (dt < 0.0) throw Error("positions_at: time before current kinematics time");
    out.resize(positions_.size());
    for (std::size_t i = 0; i < positions_.size(); ++i)
        for (int a = 0; a < 3; ++a)
            out[i][a] = fold(positions_[i][a], velocities_[i][a], dt, box_.lo[a], box_.hi[a]).x;
}

Vec3 AtomKinematics::position_at(long i, double t) const {
    const double dt = t - t_;
    if (dt < 0.0) throw Error("position_at: time before current kinematics time");
    Vec3 out;
    for (int a = 0; a < 3; ++a) out[a] = fold(positions_[i][a], velocities_[i][a], dt, box_.lo[a], box_.hi[a]).x;
    return out;
}

void AtomKinematics::z_at(double t, std::span<double> out) const {
    const double dt = t - t_;
    if (dt < 0.0) throw Error("z_at: time before current kinematics time");
    for (std::size_t i = 0; i < positions_.size(); ++i)
        out[i] = fold(positions_[i].z(), velocities_[i].z(), dt, box_.lo.z(), box_.hi.z()).x;
}

void write_snapshot(std::ostream& out, const AtomKinematics& kin) {
    auto num = [&out](double x) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, x);
        out.write(buf, res.ptr - buf);
    };
    out << "atom,x,y,z,vx,vy,vz\n";
    for (long i = 0; i < kin.size(); ++i) {
        out << i;
        for (int a = 0; a < 3; ++a) { out << ','; num(kin.positions()[i][a]); }
        for (int a = 0; a < 3; ++a) { out << ','; num(kin.velocities()[i][a]); }
        out << '\n';
    }
}

AtomKinematics read_snapshot(std::istream& in, const Box& box, double t) {
    std::string line;
    if (!std::getline(in, line) || line != "atom,x,y,z,vx,vy,vz")
        throw IoError("snapshot: missing header atom,x,y,z,vx,vy,vz");
    Positions pos, vel;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        double v[7];
        for (int c = 0; c < 7; ++c) {
            if (!std::getline(row, cell, ','))
                throw IoError("snapshot: short row '" + line + "'");
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v[c]);
            if (res.ec != std::errc()) throw IoError("snapshot: bad number '" + cell + "'");
        }
        if (static_cast<std::size_t>(v[0]) != pos.size())
            throw IoError("snapshot: atoms out of order at row '" + line + "'");
        pos.emplace_back(v[1], v[2], v[3]);
        vel.emplace_back(v[4], v[5], v[6]);
    }
    return AtomKinematics(box, std::move(pos), std::move(vel), t);
}

}  // namespace cdsim
