#include "cdsim/coupling.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cdsim/error.hpp"

namespace cdsim {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double inv_sqrt2 = 0.70710678118654752440;

// Scalar coefficients of the kernel G = a*delta + c*rhat rhat.
struct KernelCoefficients {
    cplx a;
    cplx c;
};

KernelCoefficients kernel_coefficients(double r) {
    const double r2 = r * r;
    const cplx phase = cplx(std::cos(r), std::sin(r)) / (r2 * r);
    return {phase * cplx(1.0 - r2, -r), -phase * cplx(3.0 - r2, -3.0 * r)};
}

[[noreturn]] void coincident(const Vec3& where) {
    std::ostringstream os;
    os << "coincident atoms at (" << where.x() << ", " << where.y() << ", " << where.z() << ")";
    throw CoincidentAtoms(os.str());
}

}  // namespace

CVec3 spherical_unit_vector(int m) {
    switch (m) {
        case 0: return CVec3(0.0, 0.0, 1.0);
        case 1: return CVec3(-inv_sqrt2, cplx(0.0, -inv_sqrt2), 0.0);
        case -1: return CVec3(inv_sqrt2, cplx(0.0, -inv_sqrt2), 0.0);
        default: throw Error("sublevel index must be -1, 0 or +1");
    }
}

CMat3 green_tensor(const Vec3& r) {
    const double d = r.norm();
    if (d == 0.0) throw CoincidentAtoms("coincident atoms: zero separation");
    const auto [a, c] = kernel_coefficients(d);
    const Vec3 u = r / d;
    CMat3 g = c * (u * u.transpose()).cast<cplx>();
    g.diagonal().array() += a;
    return g;
}

cplx pair_coupling(const Vec3& r, int m, int mp) {
    const CVec3 em = spherical_unit_vector(m);
    const CVec3 emp = spherical_unit_vector(mp);
    return -1.5 * em.dot(green_tensor(r) * emp);  // dot() conjugates its left operand
}

CMat3 pair_coupling_block(const Vec3& r) {
    const double d = r.norm();
    if (d == 0.0) throw CoincidentAtoms("coincident atoms: zero separation");
    const auto [a, c] = kernel_coefficients(d);
    const double x = r.x() / d, y = r.y() / d, z = r.z() / d;
    // q_m = rhat . e_m for m = -1, 0, +1
    const cplx q[3] = {cplx(x, -y) * inv_sqrt2, cplx(z, 0.0), -cplx(x, y) * inv_sqrt2};
    CMat3 v;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v(i, j) = -1.5 * (c * std::conj(q[i]) * q[j] + (i == j ? a : cplx{}));
    return v;
}

double detuning(int m, const PhysParams& params) {
    return params.delta - static_cast<double>(m - 1) * params.zeeman;
}

CVec3 incident_polarization() { return spherical_unit_vector(1); }

CVector drive_vector(std::span<const Vec3> positions, const PhysParams& params) {
    std::vector<double> z(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) z[i] = positions[i].z();
    CVector out;
    drive_vector_from_z(z, params.rabi, out);
    return out;
}

void drive_vector_from_z(std::span<const double> z, double rabi, CVector& out) {
    const auto n = static_cast<Eigen::Index>(z.size());
    out.setZero(3 * n);
    if (rabi == 0.0) return;
    for (Eigen::Index i = 0; i < n; ++i) out[3 * i + 2] = rabi * cplx(std::cos(z[i]), std::sin(z[i]));
}

EvolutionMatrix assemble(std::span<const Vec3> positions, const PhysParams& params, double time) {
    EvolutionMatrix m;
    assemble_into(m, positions, params, time);
    return m;
}

void assemble_into(EvolutionMatrix& out, std::span<const Vec3> positions, const PhysParams& params, double time) {
    const auto n = static_cast<Eigen::Index>(positions.size());
    out.a.resize(3 * n, 3 * n);
    out.positions.assign(positions.begin(), positions.end());
    out.time = time;

    const cplx diag[3] = {I * detuning(-1, params) - 0.5, I * detuning(0, params) - 0.5,
                          I * detuning(1, params) - 0.5};
    auto& a = out.a;
    for (Eigen::Index j = 0; j < n; ++j) {
        a.block<3, 3>(3 * j, 3 * j).setZero();
        for (int s = 0; s < 3; ++s) a(3 * j + s, 3 * j + s) = diag[s];
        for (Eigen::Index i = 0; i < j; ++i) {
            const Vec3 r = positions[i] - positions[j];
            if (r.squaredNorm() == 0.0) coincident(positions[i]);
            const CMat3 block = (0.5 * I) * pair_coupling_block(r);
            a.block<3, 3>(3 * i, 3 * j) = block;
            a.block<3, 3>(3 * j, 3 * i) = block;
        }
    }
}

double closest_pair_distance(std::span<const Vec3> positions) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) best = std::min(best, (positions[i] - positions[j]).squaredNorm());
    return std::sqrt(best);
}

}  // namespace cdsim
