#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "glucast/core.hpp"
#include "glucast/forecaster.hpp"
#include "glucast/ingest.hpp"

namespace glucast::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs the `glucast` command line. `args` excludes the program name.
/// Returns the process exit code: 0 success, 1 usage, 2 data, 3 fit.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int exit_code(ErrorKind kind);

struct InputOptions {
    std::string path;
    std::string preset = "generic";
    std::string subject;  // multi-subject files: which subject to use (default: first)
    std::string time_format = "iso";  // iso or epoch
    std::int64_t interval_s = kDefaultIntervalSeconds;
    std::int64_t max_gap_s = 900;
};

/// Raw samples of the selected subject, sorted by time.
std::vector<GlucoseSample> load_samples(const InputOptions& input);
/// Regularized series: the longest gap-free segment.
TimeSeries load_series(const InputOptions& input);

/// Accepts des, auto-arima, bats, tbats, timeglu, persistence and the
/// report names (DFS, AutoARIMA, ...).
ModelId parse_model_name(const std::string& name);

/// The four TimeGlu structure variants: full, LSTM encoder, LSTM decoder, no attention.
std::vector<ForecasterConfig> timeglu_ablation(const ForecasterConfig& full);

/// CSV in the generic preset's layout (timestamp,glucose).
std::string to_csv(const TimeSeries& series);

}  // namespace glucast::cli
