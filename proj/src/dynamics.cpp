#include "cdsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "cdsim/error.hpp"

namespace cdsim {

namespace {

constexpr cplx I{0.0, 1.0};

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension (Hairer's dense output for DOPRI5).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct NearPair {
    long i, j;
};

// Piecewise-constant generator. Interval k covers [t0 + k*tau, t0 + (k+1)*tau)
// and uses positions at its midpoint. Close pairs are left out of the matrix
// and listed for exact evaluation.
class KernelSchedule {
public:
    KernelSchedule(const AtomKinematics& kin, const PhysParams& params, double t0, double refresh, double near)
        : kin_(kin), params_(params), t0_(t0), near_(near) {
        const double vmax = kin.max_speed();
        tau_ = vmax > 0.0 ? refresh / vmax : std::numeric_limits<double>::infinity();
        build();
    }

    double interval_end() const {
        return std::isinf(tau_) ? tau_ : t0_ + static_cast<double>(index_ + 1) * tau_;
    }

    void next() {
        ++index_;
        build();
    }

    const CMatrix& a() const { return matrix_.a; }
    const std::vector<NearPair>& near_pairs() const { return near_pairs_; }
    const std::vector<long>& near_atoms() const { return near_atoms_; }
    long builds() const { return builds_; }

private:
    void build() {
        const double mid = std::isinf(tau_) ? t0_ : t0_ + (static_cast<double>(index_) + 0.5) * tau_;
        kin_.positions_at(mid, scratch_);
        assemble_into(matrix_, scratch_, params_, mid);
        ++builds_;
        near_pairs_.clear();
        near_atoms_.clear();
        if (std::isinf(tau_) || !(near_ > 0.0)) return;
        const long n = kin_.size();
        const double r2 = near_ * near_;
        for (long j = 0; j < n; ++j)
            for (long i = 0; i < j; ++i)
                if ((scratch_[i] - scratch_[j]).squaredNorm() < r2) {
                    near_pairs_.push_back({i, j});
                    matrix_.a.block<3, 3>(3 * i, 3 * j).setZero();
                    matrix_.a.block<3, 3>(3 * j, 3 * i).setZero();
                    near_atoms_.push_back(i);
                    near_atoms_.push_back(j);
                }
        std::sort(near_atoms_.begin(), near_atoms_.end());
        near_atoms_.erase(std::unique(near_atoms_.begin(), near_atoms_.end()), near_atoms_.end());
    }

    const AtomKinematics& kin_;
    const PhysParams& params_;
    double t0_;
    double near_;
    double tau_;
    long index_ = 0;
    long builds_ = 0;
    EvolutionMatrix matrix_;
    Positions scratch_;
    std::vector<NearPair> near_pairs_;
    std::vector<long> near_atoms_;
};

class RightHandSide {
public:
    RightHandSide(const AtomKinematics& kin, double rabi)
        : kin_(kin), rabi_(rabi), z_(kin.size()), exact_(kin.size()) {}

    void operator()(const KernelSchedule& kernel, double t, const CVector& y, CVector& out) {
        out.noalias() = kernel.a() * y;
        ++evaluations;
        if (!kernel.near_pairs().empty()) {
            for (long i : kernel.near_atoms()) exact_[i] = kin_.position_at(i, t);
            for (const auto& p : kernel.near_pairs()) {
                const Vec3 r = exact_[p.i] - exact_[p.j];
                if (r.squaredNorm() == 0.0) throw CoincidentAtoms("atoms " + std::to_string(p.i) + " and " +
                                                                  std::to_string(p.j) + " coincide during motion");
                const CMat3 block = (0.5 * I) * pair_coupling_block(r);
                out.segment<3>(3 * p.i) += block * y.segment<3>(3 * p.j);
                out.segment<3>(3 * p.j) += block * y.segment<3>(3 * p.i);
            }
        }
        if (rabi_ == 0.0) return;
        kin_.z_at(t, z_);
        const cplx amp = -0.5 * I * rabi_;
        for (std::size_t i = 0; i < z_.size(); ++i)
            out[3 * static_cast<Eigen::Index>(i) + 2] += amp * cplx(std::cos(z_[i]), std::sin(z_[i]));
    }

    long evaluations = 0;

private:
    const AtomKinematics& kin_;
    double rabi_;
    std::vector<double> z_;
    Positions exact_;
};

double rms_scaled(const CVector& v, const CVector& y0, const CVector& y1, double atol, double rtol) {
    const Eigen::ArrayXd scale = atol + rtol * y0.array().abs().max(y1.array().abs());
    return std::sqrt((v.array().abs() / scale).square().mean());
}

std::string underflow_message(double t, double h, const AtomKinematics& kin) {
    const auto pos = kin.positions_at(t);
    std::ostringstream os;
    os << "step size underflow at t = " << t << " (h = " << h
       << "); closest pair distance = " << closest_pair_distance(pos);
    return os.str();
}

}  // namespace

IntegratorOptions integrator_options(const RunPlan& plan) {
    IntegratorOptions o;
    o.rel_tol = plan.rel_tol;
    o.abs_tol = plan.abs_tol;
    o.kernel_refresh = plan.kernel_refresh;
    return o;
}

IntegratorStats integrate(const ExcitationVector& b0, const AtomKinematics& kin, const PhysParams& params,
                          std::span<const double> t_grid, const IntegratorOptions& opt,
                          const SampleObserver& observer) {
    const Eigen::Index dim = 3 * kin.size();
    if (b0.b.size() != dim) throw Error("integrate: state size does not match the number of atoms");
    if (kin.time() > b0.t) throw Error("integrate: kinematics are ahead of the initial state");
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if ((k == 0 && t_grid[0] < b0.t) || (k > 0 && !(t_grid[k] > t_grid[k - 1])))
            throw Error("integrate: sample times must increase from the initial time");
    }

    IntegratorStats stats;
    std::size_t next = 0;
    while (next < t_grid.size() && t_grid[next] == b0.t) observer(t_grid[next++], b0.b);
    if (next == t_grid.size()) return stats;
    const double t_final = t_grid.back();

    // The equations are linear in (b0, rabi), so the absolute tolerance is
    // taken relative to their size; scaling both then scales the solution.
    const double amplitude = std::max(dim > 0 ? b0.b.cwiseAbs().maxCoeff() : 0.0, std::abs(params.rabi));
    if (dim == 0 || amplitude == 0.0) {
        for (; next < t_grid.size(); ++next) observer(t_grid[next], b0.b);
        return stats;
    }

    const double atol = opt.abs_tol * amplitude, rtol = opt.rel_tol;
    KernelSchedule kernel(kin, params, b0.t, opt.kernel_refresh, opt.near_field);
    RightHandSide rhs(kin, params.rabi);

    double t = b0.t;
    CVector y = b0.b;
    CVector k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), ynew(dim), ytmp(dim);
    rhs(kernel, t, y, k1);

    // Initial step (Hairer & Wanner, hinit).
    double h;
    {
        const double stop = std::min(kernel.interval_end(), t_final) - t;
        const double d0 = rms_scaled(y, y, y, atol, rtol);
        const double d1n = rms_scaled(k1, y, y, atol, rtol);
        double h0 = (d0 < 1e-10 || d1n < 1e-10) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min({h0, stop, opt.max_step});
        ytmp = y + h0 * k1;
        rhs(kernel, t + h0, ytmp, k2);
        const double d2 = rms_scaled(k2 - k1, y, y, atol, rtol) / h0;
        const double dmax = std::max(d1n, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
        h = std::min(100.0 * h0, h1);
    }

    constexpr double safety = 0.9, beta = 0.04, expo = 0.2 - beta * 0.75;
    constexpr double grow_max = 10.0, shrink_max = 0.2;
    double err_old = 1e-4;
    bool last_rejected = false;

    while (next < t_grid.size()) {
        const double stop = std::min(kernel.interval_end(), t_final);
        const double room = stop - t;
        double hs = std::min(h, opt.max_step);
        const bool hits_stop = hs >= room;
        if (hits_stop) hs = room;
        if (!hits_stop && hs < std::max(opt.min_step, 16.0 * std::numeric_limits<double>::epsilon() * std::abs(t)))
            throw IntegrationError(underflow_message(t, hs, kin));

                ytmp = y + hs * (a21 * k1);
        rhs(kernel, t + c2 * hs, ytmp, k2);
        ytmp = y + hs * (a31 * k1 + a32 * k2);
        rhs(kernel, t + c3 * hs, ytmp, k3);
        ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(kernel, t + c4 * hs, ytmp, k4);
        ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(kernel, t + c5 * hs, ytmp, k5);
        ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        const double t_new = hits_stop ? stop : t + hs;
        rhs(kernel, t_new, ytmp, k6);
        ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        rhs(kernel, t_new, ynew, k7);
        ytmp = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double err = rms_scaled(ytmp, y, ynew, atol, rtol);

        if (!std::isfinite(err)) {
            if (!y.allFinite()) throw IntegrationError("non-finite state at t = " + std::to_string(t));
            ++stats.rejected;
            h = hs * 0.1;
            last_rejected = true;
            continue;
        }

        const double fac11 = std::pow(err, expo);
        if (err <= 1.0) {
            ++stats.steps;
            if (!ynew.allFinite()) throw IntegrationError("non-finite state at t = " + std::to_string(t_new));
            if (next < t_grid.size() && t_grid[next] <= t_new) {
                // dense output on (t, t_new]
                const CVector r2 = ynew - y;
                const CVector r3 = hs * k1 - r2;
                const CVector r4 = r2 - hs * k7 - r3;
                const CVector r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                for (; next < t_grid.size() && t_grid[next] <= t_new; ++next) {
                    if (t_grid[next] == t_new) {
                        observer(t_new, ynew);
                        continue;
                    }
                    const double th = (t_grid[next] - t) / hs;
                    const double th1 = 1.0 - th;
                    ytmp = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
                    observer(t_grid[next], ytmp);
                }
            }
            y.swap(ynew);
            k1.swap(k7);
            t = t_new;

            double fac = fac11 / std::pow(err_old, beta);
            fac = std::clamp(fac / safety, 1.0 / grow_max, 1.0 / shrink_max);
            double h_next = hs / fac;
            if (last_rejected) h_next = std::min(h_next, hs);
            // A step clipped to a kernel boundary says nothing about a larger step.
            h = hits_stop ? std::max(h_next, h) : h_next;
            err_old = std::max(err, 1e-4);
            last_rejected = false;

            if (t == kernel.interval_end() && next < t_grid.size()) {
                kernel.next();
                rhs(kernel, t, y, k1);
            }
        } else {
            ++stats.rejected;
            h = hs / std::min(1.0 / shrink_max, fac11 / safety);
            last_rejected = true;
        }
    }
    stats.reassemblies = kernel.builds();
    stats.rhs_evaluations = rhs.evaluations;
    return stats;
}

Trajectory integrate(const ExcitationVector& b0, const AtomKinematics& kin, const PhysParams& params,
                     std::span<const double> t_grid, const IntegratorOptions& options) {
    Trajectory out;
    out.times.reserve(t_grid.size());
    out.states.reserve(t_grid.size());
    out.stats = integrate(b0, kin, params, t_grid, options, [&](double t, const CVector& b) {
        out.times.push_back(t);
        out.states.push_back(b);
    });
    return out;
}

ExcitationVector steady_state(const EvolutionMatrix& matrix, const CVector& drive) {
    const auto& a = matrix.a;
    if (drive.size() != a.rows()) throw Error("steady_state: drive size does not match the matrix");
    ExcitationVector out{CVector::Zero(a.rows()), matrix.time};
    if (a.rows() == 0) return out;

    Eigen::PartialPivLU<CMatrix> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
        std::ostringstream os;
        os << "steady_state: matrix is numerically singular (condition estimate " << 1.0 / rcond << ")";
        throw LinearAlgebraError(os.str());
    }
    const CVector rhs = (0.5 * I) * drive;
    out.b = lu.solve(rhs);
    const double target = 1e-10 * rhs.norm();
    for (int refine = 0; refine < 3 && (rhs - a * out.b).norm() > target; ++refine)
        out.b += lu.solve(CVector(rhs - a * out.b));
    const double residual = (rhs - a * out.b).norm();
    if (residual > target) {
        std::ostringstream os;
        os << "steady_state: residual " << residual << " above tolerance (condition estimate " << 1.0 / rcond
           << ")";
        throw LinearAlgebraError(os.str());
    }
    return out;
}

StaticPropagator::StaticPropagator(const EvolutionMatrix& matrix) : a_(matrix.a) {
    if (a_.rows() == 0) return;
    decomposition_ = eigen_decompose(a_, true);
    lu_.compute(decomposition_.vectors);
    const double rcond = lu_.rcond();
    condition_ = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    use_eigenbasis_ = condition_ <= max_condition;
}

ExcitationVector StaticPropagator::propagate(const ExcitationVector& b0, double t) const {
    if (t < 0.0) throw Error("propagate_static: negative time");
    if (b0.b.size() != a_.rows()) throw Error("propagate_static: state size does not match the matrix");
    if (t == 0.0 || a_.rows() == 0) return {b0.b, b0.t + t};
    if (use_eigenbasis_) {
        CVector c = lu_.solve(b0.b);
        c.array() *= (decomposition_.values.array() * t).exp();
        return {decomposition_.vectors * c, b0.t + t};
    }
    const CMatrix expm = (a_ * t).exp();
    return {expm * b0.b, b0.t + t};
}

std::vector<cplx> StaticPropagator::component(const CVector& b0, Eigen::Index index,
                                              std::span<const double> times) const {
    if (b0.size() != a_.rows()) throw Error("propagate_static: state size does not match the matrix");
    if (index < 0 || index >= a_.rows()) throw Error("propagate_static: component index out of range");
    std::vector<cplx> out;
    out.reserve(times.size());
    if (!use_eigenbasis_) {
        for (double t : times) out.push_back(propagate({b0, 0.0}, t).b[index]);
        return out;
    }
    const CVector c = lu_.solve(b0);
    const CVector row = decomposition_.vectors.row(index).transpose().cwiseProduct(c);
    for (double t : times) {
        if (t < 0.0) throw Error("propagate_static: negative time");
        out.push_back(t == 0.0 ? b0[index] : (row.array() * (decomposition_.values.array() * t).exp()).sum());
    }
    return out;
}

ExcitationVector propagate_static(const EvolutionMatrix& matrix, const ExcitationVector& b0, double t) {
    if (t == 0.0) return b0;
    return StaticPropagator(matrix).propagate(b0, t);
}

}  // namespace cdsim
