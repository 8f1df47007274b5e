// cdsim: coupled-dipole light scattering by cold moving atoms.
//
//   cdsim validate --config FILE
//   cdsim transmit --config FILE --out DIR [--seed S] [--workers N] [--force]
//   cdsim decay    --config FILE --out DIR [...]
//   cdsim spectrum --config FILE --out DIR [...]
//   cdsim trace    --config FILE --out DIR [--index I] [...]
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdsim/config.hpp"
#include "cdsim/error.hpp"
#include "cdsim/montecarlo.hpp"
#include "cdsim/results.hpp"
#include "cdsim/spectral.hpp"

namespace fs = std::filesystem;
using namespace cdsim;

namespace {

struct Args {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    bool force = false;
    long index = 0;
};

ValidatedConfig load(const Args& args) {
    Config c = load_config(args.config);
    if (args.seed) c.plan.seed = *args.seed;
    return ValidatedConfig::validate(c);
}

void report_progress(long done, long total) {
    std::fprintf(stderr, "\r  %ld/%ld configurations", done, total);
    if (done == total) std::fputc('\n', stderr);
    std::fflush(stderr);
}

ExperimentOptions options_from(const Args& args) {
    ExperimentOptions opt;
    opt.workers = args.workers;
    opt.progress = report_progress;
    return opt;
}

void print_summary(const char* what, const ExperimentResult& r, const ValidatedConfig& config) {
    std::cout << "experiment," << what << '\n'
              << "n_atoms," << config.n_atoms() << '\n'
              << "n_configs," << r.n_configs() << '\n'
              << "mean," << format_number(r.scalar_mean) << '\n'
              << "stderr," << format_number(r.scalar_stderr) << '\n'
              << "relative_spread," << format_number(r.scalar_spread) << '\n';
}

int cmd_validate(const Args& args) {
    const auto config = load(args);
    std::cout << "valid," << args.config << '\n' << "n_atoms," << config.n_atoms() << '\n';
    return 0;
}

int cmd_transmit(const Args& args) {
    const auto config = load(args);
    prepare_output_dir(args.out, args.force);
    std::cerr << "transmission: " << config.n_atoms() << " atoms, " << config.plan().n_configs << " configurations\n";
    const auto r = run_transmission(config, options_from(args));
    emit_results(r, config, args.out, true);
    print_summary("transmission", r, config);
    return 0;
}

int cmd_decay(const Args& args) {
    const auto config = load(args);
    prepare_output_dir(args.out, args.force);
    std::cerr << "decay: " << config.n_atoms() << " atoms, " << config.plan().n_configs << " configurations\n";
    const auto r = run_decay(config, options_from(args));
    emit_results(r, config, args.out, true);
    print_summary("decay", r, config);
    return 0;
}

int cmd_spectrum(const Args& args) {
    constexpr double gamma_cut = 0.1;
    const auto config = load(args);
    const fs::path dir = args.out;
    fs::create_directories(dir);
    if (!args.force && fs::exists(dir / "spectrum_summary.csv"))
        throw IoError("result set already exists in " + dir.string() + " (use --force to overwrite)");

    const long n = config.plan().n_configs;
    std::vector<ModeSpectrum> spectra(static_cast<std::size_t>(n));
    std::cerr << "spectrum: " << config.n_atoms() << " atoms, " << n << " configurations\n";
    parallel_for(
        n, resolve_workers(args.workers),
        [&](long i) {
            const auto kin = sample_kinematics(config, i);
            spectra[static_cast<std::size_t>(i)] = mode_spectrum(assemble(kin.positions(), config.phys(), 0.0));
        },
        report_progress);

    std::ofstream summary(dir / "spectrum_summary.csv");
    summary << "config_id,n_atoms,sum_gamma,min_gamma,max_gamma,subradiant_fraction\n";
    double mean_fraction = 0.0;
    for (long i = 0; i < n; ++i) {
        const auto& s = spectra[static_cast<std::size_t>(i)];
        char name[32];
        std::snprintf(name, sizeof name, "spectrum_%04ld.csv", i);
        std::ofstream out(dir / name);
        write_spectrum_csv(out, s);
        if (!out) throw IoError("write failed for " + (dir / name).string());
        const double frac = subradiant_fraction(s, gamma_cut);
        mean_fraction += frac / static_cast<double>(n);
        summary << i << ',' << config.n_atoms() << ',' << format_number(s.gamma.sum()) << ','
                << format_number(s.size() ? s.gamma.minCoeff() : 0.0) << ','
                << format_number(s.size() ? s.gamma.maxCoeff() : 0.0) << ',' << format_number(frac) << '\n';
    }
    if (!summary) throw IoError("write failed for " + (dir / "spectrum_summary.csv").string());

    nlohmann::ordered_json meta;
    meta["code_version"] = code_version;
    meta["experiment"] = "spectrum";
    meta["n_atoms"] = config.n_atoms();
    meta["n_configs"] = n;
    meta["gamma_cut"] = gamma_cut;
    meta["config"] = format_config(config.get());
    std::ofstream(dir / meta_file) << meta.dump(2) << '\n';

    std::cout << "experiment,spectrum\n"
              << "n_atoms," << config.n_atoms() << '\n'
              << "n_configs," << n << '\n'
              << "mean_subradiant_fraction," << format_number(mean_fraction) << '\n';
    return 0;
}

int cmd_trace(const Args& args) {
    const auto config = load(args);
    if (args.index < 0) throw ConfigError({"--index must be non-negative"});
    const fs::path dir = args.out;
    fs::create_directories(dir);
    const auto path = dir / "trace.csv";
    if (!args.force && fs::exists(path))
        throw IoError("result set already exists in " + dir.string() + " (use --force to overwrite)");

    const bool slab = config.geom().shape == Shape::slab;
    IntegratorStats st;
    const Trace tr = slab ? transmission_trace(config, args.index, false, &st) : decay_trace(config, args.index, false, &st);

    std::ostringstream header;
    header << code_version << '\n'
           << (slab ? "transmission" : "survival probability") << ", configuration " << args.index << ", "
           << config.n_atoms() << " atoms\n"
           << format_config(config.get());
    std::ofstream out(path);
    write_trace_csv(out, std::span(&tr, 1), header.str());
    if (!out) throw IoError("write failed for " + path.string());

    std::cout << "experiment," << (slab ? "transmission_trace" : "decay_trace") << '\n'
              << "n_atoms," << config.n_atoms() << '\n'
              << "samples," << tr.t.size() << '\n'
              << "steps," << st.steps << '\n';
    if (slab) std::cout << "time_average," << format_number(time_average(tr, config.plan().transient_cut, config.plan().t_end)) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled-dipole simulation of light scattering by cold moving atoms"};
    app.require_subcommand(1);
    Args args;

    auto common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", args.config, "configuration file (key = value)")->required();
        if (!needs_out) return;
        sub->add_option("--out", args.out, "output directory")->required();
        sub->add_option("--seed", args.seed, "override the master seed");
        sub->add_option("--workers", args.workers, "worker threads (default: $CDSIM_WORKERS or all cores)");
        sub->add_flag("--force", args.force, "overwrite an existing result set");
    };

    auto* validate = app.add_subcommand("validate", "check a configuration and exit");
    common(validate, false);
    validate->add_option("--seed", args.seed, "override the master seed");
    auto* transmit = app.add_subcommand("transmit", "quasi-stationary transmission of a slab");
    common(transmit, true);
    auto* decay = app.add_subcommand("decay", "decay of an excited atom at the centre of a cube");
    common(decay, true);
    auto* spectrum = app.add_subcommand("spectrum", "collective mode spectra of static configurations");
    common(spectrum, true);
    auto* trace = app.add_subcommand("trace", "time series of a single configuration");
    common(trace, true);
    trace->add_option("--index", args.index, "configuration index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*validate) return cmd_validate(args);
        if (*transmit) return cmd_transmit(args);
        if (*decay) return cmd_decay(args);
        if (*spectrum) return cmd_spectrum(args);
        return cmd_trace(args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
