#include "cdsim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cdsim/error.hpp"

namespace cdsim {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string shortest(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

bool parse_double(const std::string& text, double& out) {
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

template <class Int>
bool parse_int(const std::string& text, Int& out) {
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error("invalid configuration: " + join(problems)), problems_(std::move(problems)) {}

double PhysParams::doppler_width() const { return 2.0 * std::sqrt(2.0 * std::log(2.0)) * v0; }

double Geometry::volume() const {
    return shape == Shape::cube ? l * l * l : lt * lt * l;
}

long atom_count(double density, const Geometry& geometry) {
    if (!(density >= 0.0)) throw ConfigError({"negative density"});
    if (density == 0.0) return 0;
    const double n = std::round(density * geometry.volume());
    if (n < 1.0) throw ConfigError({"box too small for one atom at this density"});
    return static_cast<long>(n);
}

std::vector<std::string> check_config(const Config& c) {
    std::vector<std::string> errs;
    const auto& p = c.phys;
    const auto& g = c.geom;
    const auto& r = c.plan;

    auto finite = [&](double x, const char* name) {
        if (!std::isfinite(x)) errs.push_back(std::string("non-finite value for ") + name);
        return std::isfinite(x);
    };

    finite(p.delta, "delta");
    if (finite(p.zeeman, "zeeman") && p.zeeman < 0) errs.emplace_back("negative Zeeman splitting");
    if (finite(p.rabi, "rabi") && !(p.rabi > 0)) errs.emplace_back("Rabi amplitude must be positive");
    if (finite(p.v0, "v0") && p.v0 < 0) errs.emplace_back("negative velocity scale");
    if (finite(p.density, "density") && p.density < 0) errs.emplace_back("negative density");

    bool lengths_ok = true;
    for (auto [x, name] : {std::pair{g.lt, "lt"}, {g.l, "l"}, {g.ld, "ld"},
                           {g.detector_offset, "detector_offset"}}) {
        if (!finite(x, name) || !(x > 0)) {
            if (std::isfinite(x)) errs.push_back(std::string("length ") + name + " must be positive");
            lengths_ok = false;
        }
    }
    if (g.shape == Shape::slab) {
        if (g.ld > g.lt) errs.emplace_back("detector larger than sample");
    } else if (g.lt != g.l) {
        errs.emplace_back("cube geometry requires lt == l");
    }

    if (finite(r.t_end, "t_end") && finite(r.transient_cut, "transient_cut")) {
        if (r.transient_cut < 0) errs.emplace_back("negative transient cut");
        if (!(r.t_end > r.transient_cut)) errs.emplace_back("t_end must exceed transient_cut");
    }
    if (finite(r.sample_dt, "sample_dt") && !(r.sample_dt > 0)) errs.emplace_back("sample_dt must be positive");
    if (r.n_configs < 1) errs.emplace_back("n_configs must be at least 1");
    if (finite(r.rel_tol, "rel_tol") && !(r.rel_tol > 0)) errs.emplace_back("rel_tol must be positive");
    if (finite(r.abs_tol, "abs_tol") && !(r.abs_tol > 0)) errs.emplace_back("abs_tol must be positive");
    if (finite(r.kernel_refresh, "kernel_refresh") && !(r.kernel_refresh > 0))
        errs.emplace_back("kernel_refresh must be positive");
    if (r.detector_grid < 1) errs.emplace_back("detector_grid must be at least 1");
    if (finite(r.exclusion_radius, "exclusion_radius") && r.exclusion_radius < 0)
        errs.emplace_back("negative exclusion radius");
    if (r.source_m < -1 || r.source_m > 1) errs.emplace_back("source sublevel must be -1, 0 or +1");

    if (lengths_ok && std::isfinite(p.density) && p.density > 0 &&
        std::round(p.density * g.volume()) < 1.0)
        errs.emplace_back("box too small for one atom at this density");
    return errs;
}

ValidatedConfig ValidatedConfig::validate(const Config& config) {
    auto errs = check_config(config);
    if (!errs.empty()) throw ConfigError(std::move(errs));
    return ValidatedConfig(config, atom_count(config.phys.density, config.geom));
}

Config parse_config(std::istream& in) {
    Config c;
    std::vector<std::string> errs;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) {
            errs.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
            continue;
        }

        auto bad = [&] { errs.push_back("line " + std::to_string(lineno) + ": bad value for '" + key + "': " + val); };
        auto real = [&](double& dst) { if (!parse_double(val, dst)) bad(); };

        if (key == "delta") real(c.phys.delta);
        else if (key == "zeeman") real(c.phys.zeeman);
        else if (key == "rabi") real(c.phys.rabi);
        else if (key == "v0") real(c.phys.v0);
        else if (key == "density") real(c.phys.density);
        else if (key == "lt") real(c.geom.lt);
        else if (key == "l") real(c.geom.l);
        else if (key == "ld") real(c.geom.ld);
        else if (key == "detector_offset") real(c.geom.detector_offset);
        else if (key == "shape") {
            if (val == "slab") c.geom.shape = Shape::slab;
            else if (val == "cube") c.geom.shape = Shape::cube;
            else bad();
        }
        else if (key == "t_end") real(c.plan.t_end);
        else if (key == "sample_dt") real(c.plan.sample_dt);
        else if (key == "transient_cut") real(c.plan.transient_cut);
        else if (key == "n_configs") { if (!parse_int(val, c.plan.n_configs)) bad(); }
        else if (key == "seed") { if (!parse_int(val, c.plan.seed)) bad(); }
        else if (key == "rel_tol") real(c.plan.rel_tol);
        else if (key == "abs_tol") real(c.plan.abs_tol);
        else if (key == "kernel_refresh") real(c.plan.kernel_refresh);
        else if (key == "detector_grid") { if (!parse_int(val, c.plan.detector_grid)) bad(); }
        else errs.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!errs.empty()) throw ConfigError(std::move(errs));
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file " + path});
    return parse_config(in);
}

std::string format_config(const Config& c) {
    std::ostringstream os;
    os << "delta = " << shortest(c.phys.delta) << '\n'
       << "zeeman = " << shortest(c.phys.zeeman) << '\n'
       << "rabi = " << shortest(c.phys.rabi) << '\n'
       << "v0 = " << shortest(c.phys.v0) << '\n'
       << "density = " << shortest(c.phys.density) << '\n'
       << "lt = " << shortest(c.geom.lt) << '\n'
       << "l = " << shortest(c.geom.l) << '\n'
       << "ld = " << shortest(c.geom.ld) << '\n'
       << "detector_offset = " << shortest(c.geom.detector_offset) << '\n'
       << "shape = " << (c.geom.shape == Shape::slab ? "slab" : "cube") << '\n'
       << "t_end = " << shortest(c.plan.t_end) << '\n'
       << "sample_dt = " << shortest(c.plan.sample_dt) << '\n'
       << "transient_cut = " << shortest(c.plan.transient_cut) << '\n'
       << "n_configs = " << c.plan.n_configs << '\n'
       << "seed = " << c.plan.seed << '\n'
       << "rel_tol = " << shortest(c.plan.rel_tol) << '\n'
       << "abs_tol = " << shortest(c.plan.abs_tol) << '\n'
       << "kernel_refresh = " << shortest(c.plan.kernel_refresh) << '\n'
       << "detector_grid = " << c.plan.detector_grid << '\n';
    return os.str();
}

Config default_slab_config() { return Config{}; }

Config default_cube_config() {
    Config c;
    c.phys.delta = 0.0;
    c.phys.zeeman = 0.0;
    c.phys.density = 0.1;
    c.geom.shape = Shape::cube;
    c.geom.lt = 16.0;
    c.geom.l = 16.0;
    c.plan.t_end = 50.0;
    c.plan.sample_dt = 0.5;
    c.plan.transient_cut = 0.0;
    c.plan.n_configs = 200;
    return c;
}

}  // namespace cdsim
