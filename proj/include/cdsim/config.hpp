#pragma once

// Dimensionless unit system used throughout the library:
//   length    1/k0   (reduced wavelength)
//   time      1/gamma (natural lifetime)
//   frequency gamma
//   field     Rabi frequency in units of gamma
// Neither k0 nor gamma exists as a runtime parameter; both are 1.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cdsim {

enum class Shape { slab, cube };

struct PhysParams {
    double delta = 0.5;    // laser detuning from the driven transition
    double zeeman = 100.0; // Zeeman splitting between adjacent sublevels
    double rabi = 0.1;     // incident Rabi amplitude; observables are independent of it
    double v0 = 0.0;       // per-axis thermal velocity spread k0*v0/gamma
    double density = 0.2;  // n * lambdabar^3

    /// Full width at half maximum of the Doppler profile, 2*sqrt(2 ln 2)*v0.
    double doppler_width() const;
};

struct Geometry {
    double lt = 50.0;              // transverse side (x and y)
    double l = 6.0;                // thickness along the beam axis z
    double ld = 25.0;              // detector side
    double detector_offset = 12.0; // distance of the detector plane behind the sample
    Shape shape = Shape::slab;

    double volume() const;
};

struct RunPlan {
    double t_end = 1150.0;
    double sample_dt = 1.0;
    double transient_cut = 150.0;
    int n_configs = 100;
    std::uint64_t seed = 1;
    double rel_tol = 1e-6;
    double abs_tol = 1e-10;
    double kernel_refresh = 1e-3; // displacement that triggers kernel reassembly
    int detector_grid = 32;

    // Not part of the file schema; API-level knobs.
    double exclusion_radius = 0.0; // minimum pair distance at sampling, 0 = off
    int source_m = 0;              // sublevel excited in decay runs
};

struct Config {
    PhysParams phys;
    Geometry geom;
    RunPlan plan;
};

/// Number of atoms for a density and box: round(n * V). Zero density gives an
/// empty sample; a positive density that rounds to zero atoms is rejected.
long atom_count(double density, const Geometry& geometry);

/// Every violated invariant, in a stable order. Empty means valid.
std::vector<std::string> check_config(const Config& config);

/// A configuration that has passed check_config. Immutable.
class ValidatedConfig {
public:
    /// Throws ConfigError listing all problems.
    static ValidatedConfig validate(const Config& config);

    const Config& get() const noexcept { return config_; }
    const PhysParams& phys() const noexcept { return config_.phys; }
    const Geometry& geom() const noexcept { return config_.geom; }
    const RunPlan& plan() const noexcept { return config_.plan; }
    long n_atoms() const noexcept { return n_atoms_; }

private:
    ValidatedConfig(Config config, long n_atoms) : config_(std::move(config)), n_atoms_(n_atoms) {}
    Config config_;
    long n_atoms_;
};

/// Parse the flat "key = value" format. '#' starts a comment. Missing keys keep
/// their defaults; unknown or repeated keys and malformed values throw ConfigError.
Config parse_config(std::istream& in);
Config load_config(const std::string& path);

/// Serialize in the same format parse_config reads (file-schema keys only).
std::string format_config(const Config& config);

/// Full-size slab used for the transmission experiments.
Config default_slab_config();
/// Cube used for the decay experiments: k0 L = 16, density 0.1, no field.
Config default_cube_config();

}  // namespace cdsim
