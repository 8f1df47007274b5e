#include "cdsim/results.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cdsim/error.hpp"

namespace cdsim {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

void close_checked(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    return cells;
}

template <class T>
T parse_cell(const std::string& cell, const fs::path& path) {
    T v{};
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw IoError(path.string() + ": bad number '" + cell + "'");
    return v;
}

void write_series(const fs::path& path, const char* column, const std::vector<double>& t,
                  const std::vector<double>& v) {
    auto out = open_out(path);
    out << "t_gamma," << column << '\n';
    for (std::size_t k = 0; k < t.size(); ++k) out << format_number(t[k]) << ',' << format_number(v[k]) << '\n';
    close_checked(out, path);
}

nlohmann::ordered_json config_json(const Config& c) {
    nlohmann::ordered_json j;
    j["delta"] = c.phys.delta;
    j["zeeman"] = c.phys.zeeman;
    j["rabi"] = c.phys.rabi;
    j["v0"] = c.phys.v0;
    j["density"] = c.phys.density;
    j["lt"] = c.geom.lt;
    j["l"] = c.geom.l;
    j["ld"] = c.geom.ld;
    j["detector_offset"] = c.geom.detector_offset;
    j["shape"] = c.geom.shape == Shape::slab ? "slab" : "cube";
    j["t_end"] = c.plan.t_end;
    j["sample_dt"] = c.plan.sample_dt;
    j["transient_cut"] = c.plan.transient_cut;
    j["n_configs"] = c.plan.n_configs;
    j["seed"] = c.plan.seed;
    j["rel_tol"] = c.plan.rel_tol;
    j["abs_tol"] = c.plan.abs_tol;
    j["kernel_refresh"] = c.plan.kernel_refresh;
    j["detector_grid"] = c.plan.detector_grid;
    j["exclusion_radius"] = c.plan.exclusion_radius;
    j["source_m"] = c.plan.source_m;
    return j;
}

}  // namespace

void prepare_output_dir(const fs::path& dir, bool force) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    if (force) return;
    for (const char* name : {mean_trace_file, stderr_trace_file, summary_file, meta_file}) {
        if (fs::exists(dir / name))
            throw IoError("result set already exists in " + dir.string() + " (use --force to overwrite)");
    }
}

void emit_results(const ExperimentResult& result, const ValidatedConfig& config, const fs::path& dir, bool force) {
    prepare_output_dir(dir, force);
    const char* column = result.kind == ExperimentKind::transmission ? "transmission" : "survival";
    write_series(dir / mean_trace_file, column, result.times, result.mean);
    write_series(dir / stderr_trace_file, column, result.times, result.stderr_mean);

    {
        const auto path = dir / summary_file;
        auto out = open_out(path);
        out << "config_id,n_atoms,value,steps,rejected,reassemblies\n";
        for (const auto& s : result.per_config) {
            out << s.config_id << ',' << s.n_atoms << ',' << format_number(s.value) << ',' << s.stats.steps << ','
                << s.stats.rejected << ',' << s.stats.reassemblies << '\n';
        }
        close_checked(out, path);
    }

    nlohmann::ordered_json meta;
    meta["code_version"] = code_version;
    meta["experiment"] = result.kind == ExperimentKind::transmission ? "transmission" : "decay";
    meta["n_atoms"] = config.n_atoms();
    meta["n_configs"] = result.n_configs();
    meta["static_fast_path"] = result.used_static_fast_path;
    // stored as text so the 12-digit rounding matches the CSV files
    meta["scalar_mean"] = format_number(result.scalar_mean);
    meta["scalar_stderr"] = format_number(result.scalar_stderr);
    meta["scalar_relative_spread"] = format_number(result.scalar_spread);
    if (result.kind == ExperimentKind::transmission)
        meta["time_average_window"] = {config.plan().transient_cut, config.plan().t_end};
    meta["config"] = config_json(config.get());

    const auto path = dir / meta_file;
    auto out = open_out(path);
    out << meta.dump(2) << '\n';
    close_checked(out, path);
}

Series read_series_csv(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t_gamma,", 0) != 0)
        throw IoError(path.string() + ": missing t_gamma header");
    Series s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != 2) throw IoError(path.string() + ": malformed row '" + line + "'");
        s.t.push_back(parse_cell<double>(cells[0], path));
        s.value.push_back(parse_cell<double>(cells[1], path));
    }
    return s;
}

std::vector<ConfigSummary> read_summary_csv(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != "config_id,n_atoms,value,steps,rejected,reassemblies")
        throw IoError(path.string() + ": unexpected header");
    std::vector<ConfigSummary> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != 6) throw IoError(path.string() + ": malformed row '" + line + "'");
        ConfigSummary s;
        s.config_id = parse_cell<long>(cells[0], path);
        s.n_atoms = parse_cell<long>(cells[1], path);
        s.value = parse_cell<double>(cells[2], path);
        s.stats.steps = parse_cell<long>(cells[3], path);
        s.stats.rejected = parse_cell<long>(cells[4], path);
        s.stats.reassemblies = parse_cell<long>(cells[5], path);
        out.push_back(s);
    }
    return out;
}

}  // namespace cdsim
