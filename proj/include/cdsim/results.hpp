#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cdsim/config.hpp"
#include "cdsim/montecarlo.hpp"

namespace cdsim {

inline constexpr const char* code_version = "cdsim 1.0.0";

/// File names of one result set.
inline constexpr const char* mean_trace_file = "mean_trace.csv";
inline constexpr const char* stderr_trace_file = "stderr_trace.csv";
inline constexpr const char* summary_file = "summary.csv";
inline constexpr const char* meta_file = "meta.json";

/// Create `dir` if needed. Throws IoError if it already holds any file of a
/// result set and `force` is false.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

/// Write mean_trace.csv, stderr_trace.csv, summary.csv and meta.json.
/// Numbers carry 12 significant digits; output depends only on the inputs.
void emit_results(const ExperimentResult& result, const ValidatedConfig& config,
                  const std::filesystem::path& dir, bool force = false);

struct Series {
    std::vector<double> t;
    std::vector<double> value;
};

/// Two-column t_gamma,<name> file (mean or stderr trace).
Series read_series_csv(const std::filesystem::path& path);

/// summary.csv back into per-configuration records.
std::vector<ConfigSummary> read_summary_csv(const std::filesystem::path& path);

}  // namespace cdsim
