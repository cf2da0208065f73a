#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "glucast/core.hpp"

namespace glucast::ingest {

enum class TimestampFormat { Iso8601, EpochSeconds };

/// Column layout of a CGM CSV export.
struct CsvSchema {
    std::string timestamp_column = "timestamp";
    std::string value_column = "glucose";
    TimestampFormat timestamp_format = TimestampFormat::Iso8601;
    std::string subject_column;  // empty: single-subject file
    bool skip_blank_rows = false;  // rows with an empty timestamp or value cell are ignored
};

/// Named presets: "cgm-glucose", "colas", "generic".
CsvSchema schema_preset(std::string_view name);

/// Parses "YYYY-MM-DDThh:mm:ss" with an optional trailing 'Z' into UTC epoch seconds.
std::int64_t parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t epoch_seconds);

/**
 * Reads glucose samples from CSV text. The header row names the columns.
 * Output is sorted by timestamp; duplicate timestamps collapse to the mean
 * of their values. Errors carry the 1-based line number.
 */
std::vector<GlucoseSample> parse_csv(std::string_view text, const CsvSchema& schema);

/// As parse_csv, grouped by the schema's subject column.
std::map<std::string, std::vector<GlucoseSample>> parse_csv_by_subject(std::string_view text,
                                                                        const CsvSchema& schema);

std::string read_file(const std::string& path);

enum class OnLargerGap { SplitSegments, Error };

struct GapPolicy {
    std::int64_t max_gap_s = 900;
    OnLargerGap on_larger = OnLargerGap::SplitSegments;
};

/**
 * Places samples on the grid t0 + i*interval_s, where t0 is the first
 * timestamp of each segment. Off-grid samples are linearly interpolated onto
 * grid points; gaps up to max_gap_s are filled by linear interpolation and
 * larger gaps start a new segment (or throw, per policy).
 */
std::vector<TimeSeries> regularize(const std::vector<GlucoseSample>& samples, std::int64_t interval_s,
                                   const GapPolicy& policy, const std::string& subject_id = {});

/// Longest segment; ties go to the earliest.
const TimeSeries& longest_segment(const std::vector<TimeSeries>& segments);

/// Chronological split: train gets ceil(fraction * n) points.
std::pair<TimeSeries, TimeSeries> split(const TimeSeries& series, double train_fraction);

/// Mean/std pair. std uses divisor n.
struct Standardization {
    double mean = 0.0;
    double std = 1.0;

    double apply(double v) const { return (v - mean) / std; }
    double invert(double z) const { return z * std + mean; }
    bool operator==(const Standardization&) const = default;
};

std::pair<TimeSeries, Standardization> standardize(const TimeSeries& series);
TimeSeries destandardize(const TimeSeries& series, const Standardization& standardization);

/// Adds i.i.d. N(0, sigma^2) noise drawn from Rng(seed). Timestamps unchanged.
TimeSeries add_noise(const TimeSeries& series, double sigma, std::uint64_t seed);

}  // namespace glucast::ingest
