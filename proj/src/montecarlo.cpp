#include "cdsim/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "cdsim/error.hpp"
#include "cdsim/rng.hpp"

namespace cdsim {

namespace {

struct Moments {
    double mean = 0.0;
    double stderr_mean = 0.0;
    double spread = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    const auto n = static_cast<double>(x.size());
    if (x.empty()) return m;
    for (double v : x) m.mean += v;
    m.mean /= n;
    if (x.size() > 1) {
        double ss = 0.0;
        for (double v : x) ss += (v - m.mean) * (v - m.mean);
        m.stderr_mean = std::sqrt(ss / (n - 1.0) / n);
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    m.spread = m.mean != 0.0 ? (*hi - *lo) / std::abs(m.mean) : 0.0;
    return m;
}

// Sample-wise mean and standard error over traces that share a time grid.
void reduce_traces(const std::vector<Trace>& traces, ExperimentResult& out) {
    out.times = traces.front().t;
    const std::size_t ns = out.times.size();
    out.mean.assign(ns, 0.0);
    out.stderr_mean.assign(ns, 0.0);
    std::vector<double> column(traces.size());
    for (std::size_t k = 0; k < ns; ++k) {
        for (std::size_t c = 0; c < traces.size(); ++c) column[c] = traces[c].value[k];
        const auto m = moments(column);
        out.mean[k] = m.mean;
        out.stderr_mean[k] = m.stderr_mean;
    }
}

void finish_scalars(ExperimentResult& out) {
    std::vector<double> values;
    values.reserve(out.per_config.size());
    for (const auto& s : out.per_config) values.push_back(s.value);
    const auto m = moments(values);
    out.scalar_mean = m.mean;
    out.scalar_stderr = m.stderr_mean;
    out.scalar_spread = m.spread;
}

std::size_t nearest_index(const std::vector<double>& t, double x) {
    auto it = std::lower_bound(t.begin(), t.end(), x);
    if (it == t.end()) return t.size() - 1;
    auto k = static_cast<std::size_t>(it - t.begin());
    if (k > 0 && x - t[k - 1] < t[k] - x) --k;
    return k;
}

}  // namespace

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CDSIM_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(long n, int workers, const std::function<void(long)>& work,
                  const std::function<void(long, long)>& progress) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<long> next{0};
    std::atomic<long> done{0};
    std::mutex progress_mutex;

    auto loop = [&] {
        for (long i; (i = next.fetch_add(1)) < n;) {
            try {
                work(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
            const long d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(d, n);
            }
        }
    };

    const int w = static_cast<int>(std::min<long>(std::max(1, workers), std::max(1L, n)));
    if (w == 1) {
        loop();
    } else {
        std::vector<std::jthread> pool;
        for (int k = 0; k < w; ++k) pool.emplace_back(loop);
    }

    for (long i = 0; i < n; ++i) {
        if (!errors[static_cast<std::size_t>(i)]) continue;
        try {
            std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
        } catch (const IntegrationError& e) {
            throw IntegrationError("configuration " + std::to_string(i) + ": " + e.what());
        } catch (const std::exception& e) {
            throw Error("configuration " + std::to_string(i) + ": " + e.what());
        }
    }
}

std::vector<double> sample_times(double t_end, double dt) {
    std::vector<double> t;
    for (long k = 0;; ++k) {
        const double tk = static_cast<double>(k) * dt;
        if (tk > t_end * (1.0 + 1e-12)) break;
        t.push_back(std::min(tk, t_end));
    }
    if (t.back() < t_end) t.push_back(t_end);
    return t;
}

AtomKinematics sample_kinematics(const ValidatedConfig& config, long index) {
    const auto& plan = config.plan();
    const Box box = box_of(config.geom());
    const long n = config.n_atoms();
    auto pos_rng = derive_stream(plan.seed, static_cast<std::uint64_t>(index), purpose::positions);
    auto vel_rng = derive_stream(plan.seed, static_cast<std::uint64_t>(index), purpose::velocities);

    Positions positions;
    if (config.geom().shape == Shape::cube && n > 0) positions.push_back(box.centre());
    append_positions(box, n - static_cast<long>(positions.size()), pos_rng, plan.exclusion_radius, positions);
    auto velocities = sample_velocities(n, config.phys().v0, vel_rng);
    return AtomKinematics(box, std::move(positions), std::move(velocities), 0.0);
}

Trace transmission_trace(const ValidatedConfig& config, long index, bool static_fast_path, IntegratorStats* stats) {
    const auto& plan = config.plan();
    const auto& params = config.phys();
    const auto kin = sample_kinematics(config, index);
    const auto detector = detector_for(config.geom(), plan.detector_grid);
    Trace trace;
    trace.config_id = index;

    if (static_fast_path && kin.is_static()) {
        const auto matrix = assemble(kin.positions(), params, 0.0);
        const auto ss = steady_state(matrix, drive_vector(kin.positions(), params));
        trace.t.push_back(plan.t_end);
        trace.value.push_back(transmission(ss.b, kin.positions(), params, kin.box(), detector));
        if (stats) *stats = IntegratorStats{0, 0, 1, 0};
        return trace;
    }

    const auto grid = sample_times(plan.t_end, plan.sample_dt);
    trace.t.reserve(grid.size());
    trace.value.reserve(grid.size());
    Positions scratch;
    const ExcitationVector b0{CVector::Zero(3 * kin.size()), 0.0};
    const auto st = integrate(b0, kin, params, grid, integrator_options(plan), [&](double t, const CVector& b) {
        kin.positions_at(t, scratch);
        trace.t.push_back(t);
        trace.value.push_back(transmission(b, scratch, params, kin.box(), detector));
    });
    if (stats) *stats = st;
    return trace;
}

Trace decay_trace(const ValidatedConfig& config, long index, bool static_fast_path, IntegratorStats* stats) {
    const auto& plan = config.plan();
    PhysParams params = config.phys();
    params.rabi = 0.0;
    const auto kin = sample_kinematics(config, index);
    const SublevelIndex source{0, plan.source_m};

    ExcitationVector b0{CVector::Zero(3 * kin.size()), 0.0};
    b0.b[source.flat()] = 1.0;
    const auto grid = sample_times(plan.t_end, plan.sample_dt);
    Trace trace;
    trace.config_id = index;
    trace.t.reserve(grid.size());
    trace.value.reserve(grid.size());
    if (static_fast_path && kin.is_static()) {
        const StaticPropagator prop(assemble(kin.positions(), params, 0.0));
        for (const cplx amp : prop.component(b0.b, source.flat(), grid)) trace.value.push_back(std::norm(amp));
        trace.t = grid;
        if (stats) *stats = IntegratorStats{0, 0, 1, 0};
        return trace;
    }
    const auto st = integrate(b0, kin, params, grid, integrator_options(plan), [&](double t, const CVector& b) {
        trace.t.push_back(t);
        trace.value.push_back(survival_probability(b, source));
    });
    if (stats) *stats = st;
    return trace;
}

ExperimentResult run_transmission(const ValidatedConfig& config, const ExperimentOptions& options) {
    if (config.geom().shape != Shape::slab) throw Error("transmission runs need slab geometry");
    const auto& plan = config.plan();
    const long n = plan.n_configs;
    const bool fast = options.static_fast_path && config.phys().v0 == 0.0;

    std::vector<Trace> traces(static_cast<std::size_t>(n));
    std::vector<ConfigSummary> summaries(static_cast<std::size_t>(n));
    parallel_for(
        n, resolve_workers(options.workers),
        [&](long i) {
            IntegratorStats st;
            auto tr = transmission_trace(config, i, fast, &st);
            const double value = fast ? tr.value.front() : time_average(tr, plan.transient_cut, plan.t_end);
            summaries[static_cast<std::size_t>(i)] = {i, config.n_atoms(), value, st};
            traces[static_cast<std::size_t>(i)] = std::move(tr);
        },
        options.progress);

    ExperimentResult out;
    out.kind = ExperimentKind::transmission;
    out.used_static_fast_path = fast;
    out.per_config = std::move(summaries);
    reduce_traces(traces, out);
    finish_scalars(out);
    if (options.retain_traces) out.traces = std::move(traces);
    return out;
}

ExperimentResult run_decay(const ValidatedConfig& config, const ExperimentOptions& options) {
    if (config.geom().shape != Shape::cube) throw Error("decay runs need cube geometry");
    if (config.phys().zeeman != 0.0) throw Error("decay runs assume no static field (zeeman = 0)");
    if (config.n_atoms() < 1) throw Error("decay runs need at least one atom");
    const long n = config.plan().n_configs;
    const bool fast = options.static_fast_path && config.phys().v0 == 0.0;

    std::vector<Trace> traces(static_cast<std::size_t>(n));
    std::vector<ConfigSummary> summaries(static_cast<std::size_t>(n));
    parallel_for(
        n, resolve_workers(options.workers),
        [&](long i) {
            IntegratorStats st;
            auto tr = decay_trace(config, i, fast, &st);
            summaries[static_cast<std::size_t>(i)] = {i, config.n_atoms(), tr.value.back(), st};
            traces[static_cast<std::size_t>(i)] = std::move(tr);
        },
        options.progress);

    ExperimentResult out;
    out.kind = ExperimentKind::decay;
    out.used_static_fast_path = fast;
    out.per_config = std::move(summaries);
    reduce_traces(traces, out);
    finish_scalars(out);
    if (options.retain_traces) out.traces = std::move(traces);
    return out;
}

double instantaneous_rate(const Trace& trace, double t) {
    if (trace.t.size() < 5) throw Error("instantaneous_rate: trace too short");
    const auto k = nearest_index(trace.t, t);
    if (k < 2 || k + 2 >= trace.t.size()) throw Error("instantaneous_rate: t too close to the trace ends");
    const double lo = trace.value[k - 2], hi = trace.value[k + 2];
    if (!(lo > 0.0 && hi > 0.0)) throw Error("instantaneous_rate: non-positive population");
    return (std::log(lo) - std::log(hi)) / (trace.t[k + 2] - trace.t[k - 2]);
}

RateEstimate ensemble_rate(std::span<const Trace> traces, double t) {
    if (traces.empty()) throw Error("ensemble_rate: no traces");
    const auto& grid = traces.front().t;
    const auto k = nearest_index(grid, t);
    if (k < 2 || k + 2 >= grid.size()) throw Error("ensemble_rate: t too close to the trace ends");
    const auto n = static_cast<double>(traces.size());
    const double dt = grid[k + 2] - grid[k - 2];

    double sum_lo = 0.0, sum_hi = 0.0;
    for (const auto& tr : traces) {
        sum_lo += tr.value[k - 2];
        sum_hi += tr.value[k + 2];
    }
    RateEstimate est;
    est.rate = (std::log(sum_lo / n) - std::log(sum_hi / n)) / dt;
    if (traces.size() < 2) return est;

    std::vector<double> loo(traces.size());
    double loo_mean = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const double lo = (sum_lo - traces[i].value[k - 2]) / (n - 1.0);
        const double hi = (sum_hi - traces[i].value[k + 2]) / (n - 1.0);
        loo[i] = (std::log(lo) - std::log(hi)) / dt;
        loo_mean += loo[i];
    }
    loo_mean /= n;
    double ss = 0.0;
    for (double r : loo) ss += (r - loo_mean) * (r - loo_mean);
    est.stderr_rate = std::sqrt((n - 1.0) / n * ss);
    return est;
}

}  // namespace cdsim
