// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,3,...] [--cache DIR] [--full] [--strict]
//
// A failure that is a limitation rather than a defect (priced but not run, or
// unattainable by the exact solution itself) still prints FAIL; it only sets the
// exit status under --strict.
//
// Ensemble traces of the expensive criteria are cached per configuration in
// DIR (default ./acceptance_cache), keyed by the complete run configuration,
// so an interrupted run resumes where it stopped.

#include <CLI11.hpp>

#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "cdsim/dynamics.hpp"
#include "cdsim/error.hpp"
#include "cdsim/linalg.hpp"
#include "cdsim/montecarlo.hpp"
#include "cdsim/results.hpp"
#include "cdsim/spectral.hpp"

using namespace cdsim;
using namespace std::complex_literals;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    bool limitation = false;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "FAILED ") + what;
    }
};

std::string num(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- trace cache

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

enum class Run { decay, transmission };

class TraceCache {
public:
    explicit TraceCache(fs::path dir) : dir_(std::move(dir)) {}

    // Per-configuration traces of an ensemble, computed or read back.
    std::vector<Trace> traces(const ValidatedConfig& cfg, Run run, const std::string& label) {
        const auto [key, dir] = locate(cfg, run);
        fs::create_directories(dir);
        std::ofstream(dir / "key.txt") << key;

        const long n = cfg.plan().n_configs;
        std::vector<Trace> out(static_cast<std::size_t>(n));
        long computed = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (long i = 0; i < n; ++i) {
            const fs::path file = dir / (std::to_string(i) + ".csv");
            if (load(file, key, i, out[static_cast<std::size_t>(i)])) continue;
            Trace tr = run == Run::decay ? decay_trace(cfg, i, true) : transmission_trace(cfg, i, true);
            store(file, key, tr);
            out[static_cast<std::size_t>(i)] = std::move(tr);
            ++computed;
            std::cerr << "\r  " << label << ": " << i + 1 << "/" << n << " (" << num(seconds_since(t0), 3) << " s)"
                      << std::flush;
        }
        if (computed > 0) std::cerr << '\n';
        return out;
    }

    // Leading configurations already on disk, without computing any.
    std::vector<Trace> cached_prefix(const ValidatedConfig& cfg, Run run) const {
        const auto [key, dir] = locate(cfg, run);
        std::vector<Trace> out;
        Trace tr;
        while (static_cast<long>(out.size()) < cfg.plan().n_configs &&
               load(dir / (std::to_string(out.size()) + ".csv"), key, static_cast<long>(out.size()), tr))
            out.push_back(std::move(tr));
        return out;
    }

private:
    std::pair<std::string, fs::path> locate(const ValidatedConfig& cfg, Run run) const {
        const auto& c = cfg.get();
        const std::string key = std::string(code_version) + "\n" + (run == Run::decay ? "decay" : "transmission") +
                                "\nsource_m = " + std::to_string(c.plan.source_m) +
                                "\nexclusion_radius = " + format_number(c.plan.exclusion_radius) + "\n" +
                                format_config(c);
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(key)));
        return {key, dir_ / hex};
    }

    static bool load(const fs::path& file, const std::string& key, long index, Trace& tr) {
        std::ifstream in(file);
        if (!in) return false;
        std::string header, line;
        while (in.peek() == '#' && std::getline(in, line)) header += line.substr(2) + "\n";
        if (header != key) return false;
        auto traces = read_trace_csv(in);
        if (traces.size() != 1 || traces[0].config_id != index) return false;
        tr = std::move(traces[0]);
        return true;
    }

    static void store(const fs::path& file, const std::string& key, const Trace& tr) {
        // Full precision so cached and fresh runs agree bit for bit.
        const fs::path tmp = file.string() + ".tmp";
        {
            std::ofstream out(tmp);
            std::istringstream lines(key);
            std::string line;
            while (std::getline(lines, line)) out << "# " << line << '\n';
            out << "t_gamma,value,config_id\n";
            char buf[64];
            for (std::size_t k = 0; k < tr.t.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,", tr.t[k], tr.value[k]);
                out << buf << tr.config_id << '\n';
            }
        }
        fs::rename(tmp, file);
    }

    fs::path dir_;
};

std::vector<double> mean_trace(const std::vector<Trace>& traces) {
    std::vector<double> m(traces.front().t.size(), 0.0);
    for (const auto& tr : traces)
        for (std::size_t k = 0; k < m.size(); ++k) m[k] += tr.value[k];
    for (double& v : m) v /= static_cast<double>(traces.size());
    return m;
}

double rel_diff(const CVector& a, const CVector& b) { return (a - b).norm() / b.norm(); }

Positions cloud(long n, double side, std::uint64_t seed, std::uint64_t index) {
    const Box box{Vec3::Zero(), Vec3::Constant(side)};
    auto rng = derive_stream(seed, index, purpose::positions);
    return sample_positions(box, n, rng);
}

CVector random_unit_state(Eigen::Index dim, std::uint64_t seed) {
    auto rng = derive_stream(seed, 0, "state");
    CVector b(dim);
    for (auto& x : b) x = cplx(rng.normal(), rng.normal());
    return b / b.norm();
}

// Small moving slab used by the property checks (26 atoms).
Config small_slab() {
    Config c = default_slab_config();
    c.geom.lt = 8;
    c.geom.l = 2;
    c.geom.ld = 4;
    c.geom.detector_offset = 12;
    c.phys.v0 = 0.025;
    c.plan.t_end = 20;
    c.plan.transient_cut = 5;
    c.plan.sample_dt = 1;
    c.plan.n_configs = 4;
    return c;
}

// ---------------------------------------------------------------- criteria

Outcome single_atom() {
    Outcome o;
    PhysParams p;
    p.delta = 0;
    p.zeeman = 0;
    p.rabi = 0;
    const AtomKinematics one(Box{Vec3::Zero(), Vec3::Ones()}, {Vec3(0.5, 0.5, 0.5)}, {Vec3::Zero()});
    ExcitationVector b0{CVector::Zero(3), 0.0};
    b0.b[1] = 1;
    const auto grid = sample_times(20.0, 0.1);
    IntegratorOptions opt;
    opt.rel_tol = 1e-10;
    double worst = 0;
    integrate(b0, one, p, grid, opt, [&](double t, const CVector& b) {
        worst = std::max(worst, std::abs(survival_probability(b, {0, 0}) - std::exp(-t)));
    });
    o.require(worst <= 1e-8, "decay max |P_s - e^-t| = " + num(worst) + " at rel_tol 1e-10");

    double lorentz = 0;
    p.rabi = 0.1;
    const Positions at{Vec3::Zero()};
    for (int k = -50; k <= 50; ++k) {
        p.delta = 0.1 * k;
        const auto ss = steady_state(assemble(at, p), drive_vector(at, p));
        const cplx expected = (p.rabi / 2) / (p.delta + 0.5i);
        lorentz = std::max(lorentz, std::abs(ss.b[2] - expected) / std::abs(expected));
    }
    o.require(lorentz <= 1e-10, "Lorentzian max rel err = " + num(lorentz));
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    PhysParams p;  // delta 0.5, zeeman 100
    const long n = 25;
    const double side = std::cbrt(n / 0.1);
    const std::vector<double> grid{1.0, 5.0, 20.0};
    // Zeeman phases reach ~4e3 rad by t = 20; the default tolerance drifts by ~1e-4
    IntegratorOptions opt;
    opt.rel_tol = 1e-9;
    opt.abs_tol = 1e-13;
    double worst_free = 0, worst_free_default = 0, worst_driven = 0, worst_transient = 0;
    long driven_ok = 0, explained = 0;
    std::string slow;
    for (long c = 0; c < 20; ++c) {
        const auto pos = cloud(n, side, 2, static_cast<std::uint64_t>(c));
        const AtomKinematics kin(Box{Vec3::Zero(), Vec3::Constant(side)}, pos, Positions(pos.size(), Vec3::Zero()));
        PhysParams free = p;
        free.rabi = 0;
        const StaticPropagator prop(assemble(pos, free));
        const ExcitationVector b0{random_unit_state(3 * n, 100 + c), 0.0};
        const auto tr = integrate(b0, kin, free, grid, opt);
        const auto loose = integrate(b0, kin, free, grid, IntegratorOptions{});
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const CVector ex = prop.propagate(b0, grid[k]).b;
            worst_free = std::max(worst_free, (tr.states[k] - ex).cwiseAbs().maxCoeff());
            worst_free_default = std::max(worst_free_default, (loose.states[k] - ex).cwiseAbs().maxCoeff());
        }

        const auto m = assemble(pos, p);
        const std::vector<double> end{300.0};
        const auto driven = integrate(ExcitationVector{CVector::Zero(3 * n), 0.0}, kin, p, end, opt);
        const auto ss = steady_state(m, drive_vector(pos, p));
        // exact solution from rest: b_ss - exp(A t) b_ss
        const CVector exact = ss.b + StaticPropagator(m).propagate({-ss.b, 0.0}, 300.0).b;
        const double d = rel_diff(driven.states.back(), ss.b);
        const double d_exact = rel_diff(exact, ss.b);
        worst_driven = std::max(worst_driven, d);
        worst_transient = std::max(worst_transient, (driven.states.back() - exact).norm() / ss.b.norm());
        if (d <= 1e-5) {
            ++driven_ok;
        } else {
            if (d_exact > 1e-5) ++explained;
            const double g = mode_spectrum(m, false).gamma[0];
            slow += " config " + std::to_string(c) + ": " + num(d) + " (exact " + num(d_exact) + ", slowest rate " +
                    num(g) + ")";
        }
    }
    o.require(worst_free <= 1e-6, "zero drive max |b - expm| = " + num(worst_free) + " at rel_tol 1e-9 (" +
                                      num(worst_free_default) + " at the default 1e-6)");
    o.require(worst_transient <= 1e-5, "driven vs exact transient at t=300: " + num(worst_transient));
    o.require(driven_ok == 20, "driven vs steady state at t=300: " + std::to_string(driven_ok) +
                                   "/20 within 1e-5, worst " + num(worst_driven) + ";" + slow);
    const bool only_settling = worst_free <= 1e-6 && worst_transient <= 1e-5;
    if (!o.pass && only_settling && driven_ok + explained == 20) {
        o.limitation = true;
        o.detail += "; the exact solution itself has not settled to 1e-5 in each failing configuration";
    }
    return o;
}

Outcome sum_rule() {
    Outcome o;
    PhysParams p;
    for (long n : {30L, 100L, 410L}) {
        double worst = 0, gmin = 1e300;
        for (long c = 0; c < 100; ++c) {
            const auto s = mode_spectrum(assemble(cloud(n, std::cbrt(n / 0.1), 3, static_cast<std::uint64_t>(c)), p),
                                         false);
            worst = std::max(worst, std::abs(s.gamma.sum() - 3.0 * n) / (3.0 * n));
            gmin = std::min(gmin, s.gamma.minCoeff());
        }
        o.require(worst <= 1e-9 && gmin > 0,
                  "N=" + std::to_string(n) + ": max rel err " + num(worst) + ", min gamma " + num(gmin));
    }
    return o;
}

Outcome dicke_limit() {
    Outcome o;
    PhysParams p;
    p.delta = 0;
    p.zeeman = 0;
    std::vector<double> up, down;
    for (double r : {0.2, 0.1, 0.05}) {
        const auto m = assemble(Positions{Vec3::Zero(), Vec3(0, 0, r)}, p);
        const auto eig = eigen_decompose(m.a, true);
        std::vector<double> rates;
        for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
            const auto v = eig.vectors.col(k);
            const double w0 = std::norm(v[1]) + std::norm(v[4]);
            if (w0 > 0.5 * v.squaredNorm()) rates.push_back(-2 * eig.values[k].real());
        }
        if (rates.size() != 2) {
            o.require(false, "r=" + num(r) + ": expected two m=0 modes");
            return o;
        }
        up.push_back(std::max(rates[0], rates[1]));
        down.push_back(std::min(rates[0], rates[1]));
    }
    const double sum = up.back() + down.back();
    o.require(std::abs(sum - 2.0) <= 1e-9, "r=0.05: G+ = " + num(up.back(), 10) + ", G- = " + num(down.back()) +
                                               ", sum - 2 = " + num(sum - 2.0));
    const bool monotone = up[0] < up[1] && up[1] < up[2] && down[0] > down[1] && down[1] > down[2];
    o.require(monotone, "G+ " + num(up[0]) + " < " + num(up[1]) + " < " + num(up[2]) + ", G- " + num(down[0]) +
                            " > " + num(down[1]) + " > " + num(down[2]));
    return o;
}

// Integral over [0, t_end] of the largest close-pair coupling 1.5/r^3; the
// explicit step count of a moving run grows with it.
struct Stiffness {
    double integral = 0;
    double closest = std::numeric_limits<double>::infinity();
};

Stiffness stiffness(const AtomKinematics& kin, double t_end) {
    const long n = static_cast<long>(kin.size());
    std::set<std::pair<long, long>> near;
    for (double t = 0; t <= t_end; t += 0.25)
        for (long i = 0; i < n; ++i)
            for (long j = i + 1; j < n; ++j)
                if ((kin.position_at(i, t) - kin.position_at(j, t)).squaredNorm() < 0.36) near.insert({i, j});
    Stiffness s;
    const double dt = 2e-4;
    for (double t = 0.5 * dt; t < t_end; t += dt) {
        double worst = 1.0;
        for (auto [i, j] : near) {
            const double r = (kin.position_at(i, t) - kin.position_at(j, t)).norm();
            s.closest = std::min(s.closest, r);
            worst = std::max(worst, 1.5 / (r * r * r));
        }
        s.integral += worst * dt;
    }
    return s;
}

Outcome cube_decay(TraceCache& cache, bool full) {
    Outcome o;
    Config c = default_cube_config();  // k0 L = 16, density 0.1, no field, 200 configurations
    c.plan.t_end = 50;
    c.plan.sample_dt = 0.5;

    c.phys.v0 = 0;
    const auto frozen = cache.traces(ValidatedConfig::validate(c), Run::decay, "cube v0=0");
    // short windows suffice for (c)
    c.plan.t_end = 3;
    c.phys.v0 = 0.01;
    const auto slow_early = cache.traces(ValidatedConfig::validate(c), Run::decay, "cube v0=0.01 to t=3");
    c.phys.v0 = 0.025;
    const auto fast_early = cache.traces(ValidatedConfig::validate(c), Run::decay, "cube v0=0.025 to t=3");

    // (a)
    const auto mean = mean_trace(frozen);
    const auto& t = frozen.front().t;
    long above = 0, checked = 0;
    double worst = 1e300;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(t[k] > 10)) continue;
        ++checked;
        const double ratio = mean[k] / std::exp(-t[k]);
        worst = std::min(worst, ratio);
        if (ratio > 1) ++above;
    }
    o.require(above == checked, "(a) static P_s > e^-t at " + std::to_string(above) + "/" + std::to_string(checked) +
                                    " samples with t > 10 (min ratio " + num(worst) + ")");

    // (c)
    const std::vector<const std::vector<Trace>*> sets{&frozen, &slow_early, &fast_early};
    const char* names[] = {"0", "0.01", "0.025"};
    for (double te : {1.0, 2.0}) {
        std::vector<RateEstimate> r;
        for (const auto* s : sets) r.push_back(ensemble_rate(*s, te));
        bool agree = true;
        std::string line = "(c) t=" + num(te) + ":";
        for (std::size_t a = 0; a < r.size(); ++a) {
            line += std::string(" v0=") + names[a] + " " + num(r[a].rate, 5) + "+-" + num(r[a].stderr_rate, 2);
            for (std::size_t b = a + 1; b < r.size(); ++b)
                agree = agree && std::abs(r[a].rate - r[b].rate) <= std::hypot(r[a].stderr_rate, r[b].stderr_rate);
        }
        o.require(agree, line);
    }

    // (b)
    c.phys.v0 = 0.01;
    c.plan.t_end = 42;
    const auto slow_cfg = ValidatedConfig::validate(c);
    const auto r0 = ensemble_rate(frozen, 40.0);
    if (full) {
        const auto slow = cache.traces(slow_cfg, Run::decay, "cube v0=0.01");
        const auto r1 = ensemble_rate(slow, 40.0);
        const double ratio = r1.rate / r0.rate;
        const double ratio_err = ratio * std::hypot(r0.stderr_rate / r0.rate, r1.stderr_rate / r1.rate);
        o.require(std::abs(ratio - 2.0) <= 0.6, "(b) rate(40) v0=0.01 / static = " + num(ratio) + " +- " +
                                                    num(ratio_err) + " (" + num(r1.rate) + " / " + num(r0.rate) + ")");
        return o;
    }
    const bool rest_ok = o.pass;
    const auto done = cache.cached_prefix(slow_cfg, Run::decay);
    const long n = slow_cfg.plan().n_configs;

    // price the remaining configurations: seconds per unit of stiffness, timed on configuration 0
    const auto kin0 = sample_kinematics(slow_cfg, 0);
    PhysParams free = slow_cfg.phys();
    free.rabi = 0;
    ExcitationVector b0{CVector::Zero(3 * kin0.size()), 0.0};
    b0.b[1] = 1.0;
    const std::vector<double> window{1.0};
    const auto t0 = std::chrono::steady_clock::now();
    integrate(b0, kin0, free, window, integrator_options(slow_cfg.plan()));
    const double per_unit = seconds_since(t0) / stiffness(kin0, 1.0).integral;
    double total = 0, closest = std::numeric_limits<double>::infinity();
    long closest_at = 0;
    for (long i = static_cast<long>(done.size()); i < n; ++i) {
        const auto s = stiffness(sample_kinematics(slow_cfg, i), slow_cfg.plan().t_end);
        total += s.integral;
        if (s.closest < closest) closest = s.closest, closest_at = i;
    }
    std::string line = "(b) not evaluated: " + std::to_string(done.size()) + "/" + std::to_string(n) +
                       " configurations of the v0=0.01 ensemble cached; the rest is estimated at " +
                       num(per_unit * total / 3600, 3) + " CPU-hours (closest approach " + num(closest, 3) +
                       " in configuration " + std::to_string(closest_at) + "); rerun with --full";
    if (done.size() >= 2) {
        const auto r1 = ensemble_rate(done, 40.0);
        line += "; first " + std::to_string(done.size()) + " configurations only: rate(40) ratio " +
                num(r1.rate / r0.rate) + " (informational)";
    }
    o.require(false, line);
    o.limitation = rest_ok;
    return o;
}

Config transmission_slab(double l, double v0) {
    Config c = default_slab_config();
    c.geom.lt = 24;
    c.geom.ld = 12;
    c.geom.l = l;
    c.phys.density = 0.2;
    c.phys.delta = 0.5;
    c.phys.zeeman = 100;
    c.phys.v0 = v0;
    c.plan.n_configs = 30;
    return c;
}

Outcome slab_transmission(TraceCache& cache, bool full) {
    Outcome o;
    std::vector<double> tl;
    double static6 = 0;
    std::string line = "(a) v0=0 T*L:";
    for (double l : {2.0, 4.0, 6.0}) {
        const auto cfg = ValidatedConfig::validate(transmission_slab(l, 0.0));
        const auto traces = cache.traces(cfg, Run::transmission, "slab L=" + num(l) + " v0=0");
        double mean = 0;
        for (const auto& tr : traces) mean += tr.value.front();
        mean /= static_cast<double>(traces.size());
        tl.push_back(mean * l);
        if (l == 6.0) static6 = mean;
        line += " L=" + num(l) + " (N=" + std::to_string(cfg.n_atoms()) + ") " + num(mean * l);
    }
    o.require(tl[0] > tl[1] && tl[1] > tl[2], line);

    const auto moving = ValidatedConfig::validate(transmission_slab(6.0, 0.025));
    const auto& plan = moving.plan();
    if (!full) {
        // Price one configuration over a short window and extrapolate.
        const auto kin = sample_kinematics(moving, 0);
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<double> window{1.0};
        const auto st = integrate(ExcitationVector{CVector::Zero(3 * kin.size()), 0.0}, kin, moving.phys(), window,
                                  integrator_options(plan));
        const double per_unit = seconds_since(t0);
        const double hours = per_unit * plan.t_end * plan.n_configs / 3600.0;
        o.require(false, "(b),(c) not evaluated: the v0=0.025 ensemble (N=" + std::to_string(moving.n_atoms()) +
                             ", " + std::to_string(plan.n_configs) + " configurations to t=" + num(plan.t_end) +
                             ") is estimated at " + num(hours, 3) + " CPU-hours (" + num(per_unit, 3) + " s and " +
                             std::to_string(st.stats.steps) + " steps per unit time for configuration 0); rerun with --full");
        o.limitation = o.detail.find("FAILED (a)") == std::string::npos;
        return o;
    }
    const auto traces = cache.traces(moving, Run::transmission, "slab L=6 v0=0.025");
    std::vector<double> avg;
    for (const auto& tr : traces) avg.push_back(time_average(tr, plan.transient_cut, plan.t_end));
    double mean = 0;
    for (double a : avg) mean += a;
    mean /= static_cast<double>(avg.size());
    const double gain = mean / static6;
    o.require(gain >= 1.3, "(b) T(v0=0.025) / T(v0=0) at L=6 = " + num(mean) + " / " + num(static6) + " = " +
                               num(gain));
    const auto [lo, hi] = std::minmax_element(avg.begin(), avg.end());
    const double spread = (*hi - *lo) / mean;
    o.require(spread <= 0.04, "(c) spread of per-configuration averages = " + num(100 * spread, 3) + "%");
    return o;
}

PolarizationBasis random_triad(std::uint64_t seed) {
    auto rng = derive_stream(seed, 0, "triad");
    Eigen::Matrix3cd m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = cplx(rng.normal(), rng.normal());
    const Eigen::Matrix3cd q = Eigen::HouseholderQR<Eigen::Matrix3cd>(m).householderQ();
    return {q.col(0), q.col(1), q.col(2)};
}

Outcome property_suite() {
    Outcome o;

    {  // rabi invariance of T, moving and frozen
        Config c = small_slab();
        ExperimentOptions opt;
        opt.retain_traces = true;
        opt.static_fast_path = false;
        double worst = 0;
        for (double v0 : {0.025, 0.0}) {
            c.phys.v0 = v0;
            c.phys.rabi = 0.1;
            const auto a = run_transmission(ValidatedConfig::validate(c), opt);
            c.phys.rabi = 1.0;
            const auto b = run_transmission(ValidatedConfig::validate(c), opt);
            for (std::size_t i = 0; i < a.traces.size(); ++i)
                for (std::size_t k = 0; k < a.traces[i].value.size(); ++k)
                    worst = std::max(worst, std::abs(a.traces[i].value[k] - b.traces[i].value[k]) /
                                                std::abs(b.traces[i].value[k]));
        }
        o.require(worst <= 1e-10, "rabi x10 changes T by " + num(worst));
    }

    {  // dissipativity
        Config c = default_cube_config();
        c.geom.lt = c.geom.l = 10;
        c.phys.v0 = 0.025;
        const auto cfg = ValidatedConfig::validate(c);
        const auto kin = sample_kinematics(cfg, 0);
        PhysParams p = cfg.phys();
        p.rabi = 0;
        const ExcitationVector b0{random_unit_state(3 * kin.size(), 7), 0.0};
        const IntegratorOptions opt;
        double prev = -1, worst = 0;
        bool ok = true;
        integrate(b0, kin, p, sample_times(20.0, 0.05), opt, [&](double, const CVector& b) {
            const double n = b.norm();
            if (prev >= 0) {
                ok = ok && n <= prev * (1 + 10 * opt.rel_tol);
                worst = std::max(worst, n / prev - 1);
            }
            prev = n;
        });
        o.require(ok, "field-free norm growth per sample at most " + num(worst) + " (N=" +
                          std::to_string(kin.size()) + ")");
    }

    {  // polarization triad
        const auto cfg = ValidatedConfig::validate(small_slab());
        const auto det = detector_for(cfg.geom(), cfg.plan().detector_grid);
        double worst = 0;
        for (long i = 0; i < 3; ++i) {
            const auto kin = sample_kinematics(cfg, i);
            const auto ss = steady_state(assemble(kin.positions(), cfg.phys()), drive_vector(kin.positions(), cfg.phys()));
            const double ref = transmission(ss.b, kin.positions(), cfg.phys(), kin.box(), det);
            for (std::uint64_t s = 0; s < 3; ++s) {
                const double t = transmission(ss.b, kin.positions(), cfg.phys(), kin.box(), det, random_triad(s));
                worst = std::max(worst, std::abs(t - ref) / ref);
            }
        }
        o.require(worst <= 1e-6, "polarization triad changes T by " + num(worst));
    }

    {  // detector grid at full geometry
        const auto cfg = ValidatedConfig::validate(default_slab_config());
        const auto kin = sample_kinematics(cfg, 0);
        const auto ss = steady_state(assemble(kin.positions(), cfg.phys()), drive_vector(kin.positions(), cfg.phys()));
        const double t32 = transmission(ss.b, kin.positions(), cfg.phys(), kin.box(), detector_for(cfg.geom(), 32));
        const double t64 = transmission(ss.b, kin.positions(), cfg.phys(), kin.box(), detector_for(cfg.geom(), 64));
        const double change = std::abs(t64 - t32) / t32;
        o.require(change < 0.005, "detector 32->64 at N=" + std::to_string(cfg.n_atoms()) + " changes T by " +
                                      num(100 * change, 3) + "%");
    }

    {  // tolerance refinement
        Config c = small_slab();
        std::vector<std::vector<double>> runs;
        for (double tol : {1e-6, 5e-7, 2.5e-7}) {
            c.plan.rel_tol = tol;
            runs.push_back(transmission_trace(ValidatedConfig::validate(c), 0).value);
        }
        double first = 0, second = 0;
        for (std::size_t k = 0; k < runs[0].size(); ++k) {
            first = std::max(first, std::abs(runs[1][k] - runs[0][k]));
            second = std::max(second, std::abs(runs[2][k] - runs[1][k]));
        }
        o.require(second < std::max(1e-6, 0.1 * first),
                  "halving rel_tol changes T by " + num(first) + " then " + num(second));
    }

    {  // kinematics
        Config c = default_cube_config();
        c.phys.v0 = 0.025;
        const auto cfg = ValidatedConfig::validate(c);
        auto kin = sample_kinematics(cfg, 0);
        auto rng = derive_stream(9, 0, "steps");
        auto energy = [&] {
            double e = 0;
            for (const auto& v : kin.velocities()) e += v.squaredNorm();
            return e;
        };
        double worst_e = 0;
        bool inside = true;
        while (kin.time() < 1000) {
            const double before = energy();
            kin.advance(rng.uniform(0.0, 20.0));
            worst_e = std::max(worst_e, std::abs(energy() - before) / before);
            for (const auto& x : kin.positions()) inside = inside && kin.box().contains(x);
        }
        o.require(worst_e <= 1e-12 && inside,
                  "energy drift per advance " + num(worst_e) + (inside ? ", contained" : ", ESCAPED"));
    }

    {  // reproducibility
        const auto cfg = ValidatedConfig::validate(small_slab());
        ExperimentOptions one, two;
        one.workers = 1;
        two.workers = 2;
        const auto a = run_transmission(cfg, one), b = run_transmission(cfg, two), d = run_transmission(cfg, one);
        bool same = a.mean == b.mean && a.mean == d.mean && a.stderr_mean == b.stderr_mean;
        for (long i = 0; i < a.n_configs(); ++i) same = same && a.per_config[i].value == b.per_config[i].value;
        o.require(same, same ? "bit-identical across runs and worker counts" : "results differ between runs");
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string only, cache_dir = "acceptance_cache";
    bool full = false, strict = false;
    app.add_option("--only", only, "comma-separated criterion numbers");
    app.add_option("--cache", cache_dir, "directory for cached ensemble traces");
    app.add_flag("--full", full, "run the long moving ensembles (criteria 5b, 6b, 6c)");
    app.add_flag("--strict", strict, "limitations also fail the run");
    CLI11_PARSE(app, argc, argv);

    std::set<int> selected;
    if (!only.empty()) {
        std::stringstream ss(only);
        std::string item;
        while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
    }
    TraceCache cache{fs::path(cache_dir)};

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"single-atom exactness", single_atom},
        {"oracle equivalence", oracle_equivalence},
        {"spectral sum rule", sum_rule},
        {"two-atom Dicke limit", dicke_limit},
        {"cube decay (k0L=16, 200 configurations)", [&] { return cube_decay(cache, full); }},
        {"slab transmission trend (k0Lt=24)", [&] { return slab_transmission(cache, full); }},
        {"property suite", property_suite},
    };

    int failures = 0, limitations = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, false, std::string("error: ") + e.what()};
        }
        if (!out.pass) ++(out.limitation ? limitations : failures);
        std::cout << (out.pass ? "PASS " : "FAIL ") << id << " " << criteria[i].first << " [" << num(seconds_since(t0), 3)
                  << " s]: " << out.detail << std::endl;
    }
    if (limitations)
        std::cout << limitations << " failure(s) above are limitations, not defects; exit status ignores them unless --strict"
                  << std::endl;
    return failures == 0 && (limitations == 0 || !strict) ? 0 : 1;
}
