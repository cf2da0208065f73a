#include "glucast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "glucast/rng.hpp"

namespace glucast::ingest {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == ',' && !quoted) {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    fields.push_back(trim(line.substr(start)));
    return fields;
}

std::size_t column_index(const std::vector<std::string_view>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw DataError("line 1: missing column '" + name + "'");
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<GlucoseSample> collapse_duplicates(std::vector<GlucoseSample> samples) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const GlucoseSample& a, const GlucoseSample& b) { return a.timestamp < b.timestamp; });
    std::vector<GlucoseSample> out;
    std::size_t i = 0;
    while (i < samples.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < samples.size() && samples[j].timestamp == samples[i].timestamp) sum += samples[j++].value;
        out.push_back({samples[i].timestamp, sum / static_cast<double>(j - i)});
        i = j;
    }
    return out;
}

struct Row {
    std::string subject;
    GlucoseSample sample;
};

std::vector<Row> parse_rows(std::string_view text, const CsvSchema& schema) {
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF) text.remove_prefix(3);  // UTF-8 BOM
    std::vector<Row> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::vector<std::string_view> header;
    std::size_t ts_col = 0, value_col = 0, subject_col = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        if (header.empty()) {
            header = split_fields(line);
            ts_col = column_index(header, schema.timestamp_column);
            value_col = column_index(header, schema.value_column);
            if (!schema.subject_column.empty()) subject_col = column_index(header, schema.subject_column);
            continue;
        }
        const auto fields = split_fields(line);
        const std::string where = "line " + std::to_string(line_no) + ": ";
        auto field = [&](std::size_t col) -> std::string_view {
            if (col >= fields.size()) throw DataError(where + "too few fields");
            return fields[col];
        };
        const auto ts_text = field(ts_col);
        const auto value_text = field(value_col);
        if (schema.skip_blank_rows && (ts_text.empty() || value_text.empty())) continue;

        Row row;
        try {
            if (schema.timestamp_format == TimestampFormat::Iso8601) {
                row.sample.timestamp = parse_iso8601(ts_text);
            } else if (!parse_number(ts_text, row.sample.timestamp)) {
                throw DataError("bad epoch timestamp '" + std::string(ts_text) + "'");
            }
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        if (!parse_number(value_text, row.sample.value)) {
            throw DataError(where + "unparseable glucose value '" + std::string(value_text) + "'");
        }
        if (!(row.sample.value > 0.0)) {
            throw DataError(where + "non-positive glucose value " + std::string(value_text));
        }
        if (!is_valid_glucose(row.sample.value)) {
            throw DataError(where + "glucose value out of range " + std::string(value_text));
        }
        if (!schema.subject_column.empty()) row.subject = std::string(field(subject_col));
        rows.push_back(std::move(row));
    }
    if (header.empty()) throw DataError("empty file");
    if (rows.empty()) throw DataError("no data rows");
    return rows;
}

}  // namespace

CsvSchema schema_preset(std::string_view name) {
    CsvSchema schema;
    if (name == "generic") return schema;
    if (name == "cgm-glucose") {
        schema.timestamp_column = "Timestamp (YYYY-MM-DDThh:mm:ss)";
        schema.value_column = "Glucose Value (mg/dL)";
        schema.skip_blank_rows = true;
        return schema;
    }
    if (name == "colas") {
        schema.timestamp_column = "timestamp";
        schema.value_column = "glucose";
        schema.subject_column = "subject_id";
        return schema;
    }
    throw UsageError("unknown schema preset '" + std::string(name) + "'");
}

std::int64_t parse_iso8601(std::string_view text) {
    using namespace std::chrono;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    const std::string buf(text);
    int consumed = 0;
    if (std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &s, &consumed) != 6 ||
        !(static_cast<std::size_t>(consumed) == buf.size() ||
          (static_cast<std::size_t>(consumed) + 1 == buf.size() && buf.back() == 'Z'))) {
        throw DataError("bad ISO-8601 timestamp '" + buf + "'");
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw DataError("bad ISO-8601 timestamp '" + buf + "'");
    const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days_since_epoch) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_iso8601(std::int64_t epoch_seconds) {
    using namespace std::chrono;
    const auto days = static_cast<int>(std::floor(static_cast<double>(epoch_seconds) / 86400.0));
    const std::int64_t secs = epoch_seconds - static_cast<std::int64_t>(days) * 86400;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char out[32];
    std::snprintf(out, sizeof out, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
                  static_cast<int>(secs % 3600 / 60), static_cast<int>(secs % 60));
    return out;
}

std::vector<GlucoseSample> parse_csv(std::string_view text, const CsvSchema& schema) {
    const auto rows = parse_rows(text, schema);
    std::vector<GlucoseSample> samples;
    samples.reserve(rows.size());
    for (const auto& row : rows) samples.push_back(row.sample);
    return collapse_duplicates(std::move(samples));
}

std::map<std::string, std::vector<GlucoseSample>> parse_csv_by_subject(std::string_view text,
                                                                        const CsvSchema& schema) {
    std::map<std::string, std::vector<GlucoseSample>> grouped;
    for (const auto& row : parse_rows(text, schema)) grouped[row.subject].push_back(row.sample);
    for (auto& [subject, samples] : grouped) samples = collapse_duplicates(std::move(samples));
    return grouped;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<TimeSeries> regularize(const std::vector<GlucoseSample>& samples, std::int64_t interval_s,
                                   const GapPolicy& policy, const std::string& subject_id) {
    if (samples.empty()) throw DataError("empty input");
    if (interval_s <= 0) throw UsageError("interval must be positive");
    if (policy.max_gap_s < interval_s) throw UsageError("max_gap_s must be >= interval_s");
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].timestamp <= samples[i - 1].timestamp) throw DataError("samples not strictly sorted");
    }

    std::vector<TimeSeries> segments;
    std::size_t begin = 0;
    while (begin < samples.size()) {
        std::size_t end = begin + 1;
        while (end < samples.size() && samples[end].timestamp - samples[end - 1].timestamp <= policy.max_gap_s) {
            ++end;
        }
        if (end < samples.size() && policy.on_larger == OnLargerGap::Error) {
            throw DataError("gap of " + std::to_string(samples[end].timestamp - samples[end - 1].timestamp) +
                            " s exceeds max_gap_s at " + format_iso8601(samples[end - 1].timestamp));
        }

        const std::int64_t t0 = samples[begin].timestamp;
        const std::int64_t span = samples[end - 1].timestamp - t0;
        std::vector<GlucoseSample> grid;
        grid.reserve(static_cast<std::size_t>(span / interval_s) + 1);
        std::size_t j = begin;  // samples[j] is the left bracket
        for (std::int64_t t = t0; t <= samples[end - 1].timestamp; t += interval_s) {
            while (j + 1 < end && samples[j + 1].timestamp <= t) ++j;
            const auto& left = samples[j];
            double value = left.value;
            if (left.timestamp != t) {
                const auto& right = samples[j + 1];
                const double w = static_cast<double>(t - left.timestamp) /
                                 static_cast<double>(right.timestamp - left.timestamp);
                value = left.value + w * (right.value - left.value);
            }
            grid.push_back({t, value});
        }
        segments.emplace_back(std::move(grid), interval_s, subject_id);
        begin = end;
    }
    return segments;
}

const TimeSeries& longest_segment(const std::vector<TimeSeries>& segments) {
    if (segments.empty()) throw DataError("no segments");
    const TimeSeries* best = &segments.front();
    for (const auto& s : segments) {
        if (s.size() > best->size()) best = &s;
    }
    return *best;
}

std::pair<TimeSeries, TimeSeries> split(const TimeSeries& series, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
    if (series.size() < 2) throw DataError("split needs at least 2 points");
    const std::size_t n = series.size();
    // Guard against 0.8 * 10 = 8.000000000000002 rounding up.
    const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
    if (n_train >= n) throw DataError("split leaves an empty test set");
    if (n_train == 0) throw DataError("split leaves an empty training set");
    return {series.slice(0, n_train), series.slice(n_train, n)};
}

std::pair<TimeSeries, Standardization> standardize(const TimeSeries& series) {
    if (series.size() < 2) throw DataError("standardize needs at least 2 points");
    const auto values = series.values();
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double std = std::sqrt(ss / n);
    if (!(std > 1e-12 * std::max(1.0, std::abs(mean)))) throw DataError("zero variance");
    Standardization st{mean, std};
    std::vector<double> z;
    z.reserve(values.size());
    for (double v : values) z.push_back(st.apply(v));
    return {series.with_values(z, Scale::Standardized), st};
}

TimeSeries destandardize(const TimeSeries& series, const Standardization& standardization) {
    auto values = series.values();
    for (double& v : values) v = standardization.invert(v);
    return series.with_values(values, Scale::MgDl);
}

TimeSeries add_noise(const TimeSeries& series, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw UsageError("noise sigma must be >= 0");
    if (sigma == 0.0) return series;
    Rng rng(seed);
    auto values = series.values();
    for (double& v : values) v += sigma * rng.normal();
    return series.with_values(values, series.scale());
}

}  // namespace glucast::ingest
