#include "cdsim/observables.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cdsim/error.hpp"

namespace cdsim {

namespace {

// Dipole vector p = sum_m b_m e_m of every atom.
std::vector<CVec3> dipole_vectors(const CVector& b) {
    const CVec3 em = spherical_unit_vector(-1), e0 = spherical_unit_vector(0), ep = spherical_unit_vector(1);
    std::vector<CVec3> p(static_cast<std::size_t>(b.size() / 3));
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto k = 3 * static_cast<Eigen::Index>(i);
        p[i] = b[k] * em + b[k + 1] * e0 + b[k + 2] * ep;
    }
    return p;
}

// Scattered field at r times e^{-i z}: -(3/2) sum_j (e^{iR}/R) [p_j - Rhat (Rhat.p_j)].
CVec3 scattered_field_phased(const Vec3& r, std::span<const Vec3> positions, const std::vector<CVec3>& p) {
    CVec3 acc = CVec3::Zero();
    for (std::size_t j = 0; j < positions.size(); ++j) {
        const Vec3 d = r - positions[j];
        const double dist = d.norm();
        if (dist == 0.0) throw Error("observation point coincides with an atom");
        const Vec3 u = d / dist;
        const cplx along = u.x() * p[j].x() + u.y() * p[j].y() + u.z() * p[j].z();
        const double phase = dist - r.z();
        const cplx g = cplx(std::cos(phase), std::sin(phase)) / dist;
        acc += g * (p[j] - along * u.cast<cplx>());
    }
    return -1.5 * acc;
}

void require_outside(const Vec3& r, const Box& box) {
    if (box.contains(r)) throw Error("observation point lies inside the atomic sample");
}

}  // namespace

std::vector<Vec3> DetectorSpec::points() const {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(order) * order);
    const double cell = side / order;
    for (int iy = 0; iy < order; ++iy)
        for (int ix = 0; ix < order; ++ix)
            pts.emplace_back(centre_x - 0.5 * side + (ix + 0.5) * cell, centre_y - 0.5 * side + (iy + 0.5) * cell, z);
    return pts;
}

DetectorSpec detector_for(const Geometry& g, int order) {
    const Box box = box_of(g);
    DetectorSpec d;
    d.z = box.hi.z() + g.detector_offset;
    d.centre_x = box.centre().x();
    d.centre_y = box.centre().y();
    d.side = g.ld;
    d.order = order;
    return d;
}

PolarizationBasis spherical_basis() {
    return {spherical_unit_vector(-1), spherical_unit_vector(0), spherical_unit_vector(1)};
}

cplx scattered_pattern(const Vec3& r_obs, const Vec3& atom_pos, int m, const CVec3& u) {
    const Vec3 d = r_obs - atom_pos;
    const double dist = d.norm();
    if (dist == 0.0) throw Error("scattered_pattern: observation point coincides with the atom");
    const CVec3 rhat = (d / dist).cast<cplx>();
    const CVec3 em = spherical_unit_vector(m);
    const cplx bracket = u.dot(em) - u.dot(rhat) * (em.transpose() * rhat)(0);
    return cplx(std::cos(dist), std::sin(dist)) / dist * bracket;
}

CVec3 field_at(const Vec3& r_obs, const CVector& b, std::span<const Vec3> positions, const PhysParams& params,
               const Box& box) {
    require_outside(r_obs, box);
    if (b.size() != 3 * static_cast<Eigen::Index>(positions.size()))
        throw Error("field_at: state size does not match the number of atoms");
    const CVec3 phased = params.rabi * incident_polarization() +
                         scattered_field_phased(r_obs, positions, dipole_vectors(b));
    return cplx(std::cos(r_obs.z()), std::sin(r_obs.z())) * phased;
}

double transmission(const CVector& b, std::span<const Vec3> positions, const PhysParams& params, const Box& box,
                    const DetectorSpec& detector, const PolarizationBasis& basis) {
    if (b.size() != 3 * static_cast<Eigen::Index>(positions.size()))
        throw Error("transmission: state size does not match the number of atoms");
    const auto points = detector.points();
    const auto p = dipole_vectors(b);
    const CVec3 incident = params.rabi * incident_polarization();
    cplx proj_in[3];
    for (int k = 0; k < 3; ++k) proj_in[k] = basis[k].dot(incident);

    // |E_in|^2 = rabi^2 is kept out of the sum so an empty sample gives exactly 1.
    double excess = 0.0;
    for (const auto& r : points) {
        require_outside(r, box);
        const CVec3 es = scattered_field_phased(r, positions, p);
        for (int k = 0; k < 3; ++k) {
            const cplx ps = basis[k].dot(es);
            excess += 2.0 * std::real(std::conj(proj_in[k]) * ps) + std::norm(ps);
        }
    }
    const double rabi2 = params.rabi * params.rabi;
    return 1.0 + excess / (static_cast<double>(points.size()) * rabi2);
}

double survival_probability(const CVector& b, SublevelIndex s) {
    const long k = s.flat();
    if (s.m < -1 || s.m > 1 || k < 0 || k >= b.size()) throw Error("survival_probability: index out of range");
    return std::norm(b[k]);
}

double time_average(const Trace& trace, double t_start, double t_end) {
    const auto& t = trace.t;
    const auto& v = trace.value;
    if (!(t_end > t_start)) throw Error("time_average: empty window");
    if (t.empty() || t.front() > t_start || t.back() < t_end)
        throw Error("time_average: trace does not cover the averaging window");

    auto at = [&](double x) {
        auto it = std::lower_bound(t.begin(), t.end(), x);
        const auto k = static_cast<std::size_t>(it - t.begin());
        if (t[k] == x) return v[k];
        const double w = (x - t[k - 1]) / (t[k] - t[k - 1]);
        return (1.0 - w) * v[k - 1] + w * v[k];
    };

    double integral = 0.0;
    double t_prev = t_start, v_prev = at(t_start);
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] <= t_start) continue;
        if (t[k] >= t_end) break;
        integral += 0.5 * (v_prev + v[k]) * (t[k] - t_prev);
        t_prev = t[k];
        v_prev = v[k];
    }
    integral += 0.5 * (v_prev + at(t_end)) * (t_end - t_prev);
    return integral / (t_end - t_start);
}

std::string format_number(double x) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, std::span<const Trace> traces, const std::string& header_comment) {
    std::istringstream lines(header_comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
    out << "t_gamma,value,config_id\n";
    for (const auto& tr : traces) {
        for (std::size_t k = 0; k < tr.t.size(); ++k)
            out << format_number(tr.t[k]) << ',' << format_number(tr.value[k]) << ',' << tr.config_id << '\n';
    }
}

std::vector<Trace> read_trace_csv(std::istream& in) {
    std::vector<Trace> traces;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "t_gamma,value,config_id") throw IoError("trace CSV: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
            throw IoError("trace CSV: malformed row '" + line + "'");
        double t = 0, v = 0;
        long id = 0;
        auto r1 = std::from_chars(a.data(), a.data() + a.size(), t);
        auto r2 = std::from_chars(b.data(), b.data() + b.size(), v);
        auto r3 = std::from_chars(c.data(), c.data() + c.size(), id);
        if (r1.ec != std::errc() || r2.ec != std::errc() || r3.ec != std::errc())
            throw IoError("trace CSV: bad number in row '" + line + "'");
        if (traces.empty() || traces.back().config_id != id) traces.push_back(Trace{{}, {}, id});
        traces.back().t.push_back(t);
        traces.back().value.push_back(v);
    }
    if (!header) throw IoError("trace CSV: missing header");
    return traces;
}

}  // namespace cdsim
