#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdsim/config.hpp"
#include "cdsim/dynamics.hpp"
#include "cdsim/observables.hpp"

namespace cdsim {

struct ExperimentOptions {
    int workers = 0;                // 0: $CDSIM_WORKERS, else hardware concurrency
    bool retain_traces = false;     // keep every per-configuration trace
    bool static_fast_path = true;   // v0 = 0: steady-state solve (transmission), eigenmodes (decay)
    std::function<void(long done, long total)> progress;
};

struct ConfigSummary {
    long config_id = 0;
    long n_atoms = 0;
    double value = 0.0;  // time-averaged T (transmission) or final P_s (decay)
    IntegratorStats stats;
};

enum class ExperimentKind { transmission, decay };

struct ExperimentResult {
    ExperimentKind kind = ExperimentKind::transmission;
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> stderr_mean;
    std::vector<ConfigSummary> per_config;
    std::vector<Trace> traces;  // filled only with retain_traces

    // Mean, standard error and relative spread (max-min)/mean of the
    // per-configuration values. For transmission this is the double average.
    double scalar_mean = 0.0;
    double scalar_stderr = 0.0;
    double scalar_spread = 0.0;
    bool used_static_fast_path = false;

    long n_configs() const { return static_cast<long>(per_config.size()); }
};

/// Uniform sample times 0, dt, 2 dt, ... up to t_end (t_end appended if off-grid).
std::vector<double> sample_times(double t_end, double dt);

/// Initial atoms of configuration `index`. Slab: uniform positions. Cube: atom 0
/// pinned at the centre, the rest uniform. Velocities for every atom are
/// normal with spread v0; the centre atom is not exempt.
AtomKinematics sample_kinematics(const ValidatedConfig& config, long index);

/// T(t) of one configuration driven from b = 0 at t = 0. With static_fast_path
/// and v0 = 0 the trace is the single steady-state value at t_end.
Trace transmission_trace(const ValidatedConfig& config, long index, bool static_fast_path = false,
                         IntegratorStats* stats = nullptr);

/// P_s(t) of one cube configuration: unit amplitude on (centre atom, source_m),
/// no drive. With static_fast_path and v0 = 0 the trace comes from the
/// eigen-decomposition of the frozen generator.
Trace decay_trace(const ValidatedConfig& config, long index, bool static_fast_path = false,
                  IntegratorStats* stats = nullptr);

/// Transmission experiment: per configuration, T(t) time-averaged over
/// [transient_cut, t_end]; then mean and standard error over configurations.
ExperimentResult run_transmission(const ValidatedConfig& config, const ExperimentOptions& options = {});

/// Decay experiment on the cube (requires zeeman = 0); ensemble-mean P_s(t).
ExperimentResult run_decay(const ValidatedConfig& config, const ExperimentOptions& options = {});

/// -d ln P/dt at the sample nearest t, centred difference over +-2 samples.
double instantaneous_rate(const Trace& trace, double t);

struct RateEstimate {
    double rate = 0.0;
    double stderr_rate = 0.0;
};

/// Rate of the ensemble-mean trace with a jackknife standard error.
RateEstimate ensemble_rate(std::span<const Trace> traces, double t);

/// Apply `work(i)` for i in [0, n) on a pool of workers. Exceptions are
/// rethrown for the lowest failing index, tagged with that index.
void parallel_for(long n, int workers, const std::function<void(long)>& work,
                  const std::function<void(long, long)>& progress = {});

int resolve_workers(int requested);

}  // namespace cdsim
