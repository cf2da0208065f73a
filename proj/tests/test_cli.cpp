#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "glucast/cli.hpp"
#include "support.hpp"

using nlohmann::json;
using testing::count_occurrences;
using testing::run_cli;
using testing::slurp;
using testing::spit;
using testing::TempDir;

namespace {

// Commands without an explicit --manifest write one to the working directory.
const testing::ScopedWorkDir kWorkDir;

std::string line_csv(int n, double start, double slope) {
    std::string text = "timestamp,glucose\n";
    for (int t = 0; t < n; ++t) {
        text += glucast::ingest::format_iso8601(1704067200 + 300 * t) + "," + std::to_string(start + slope * t) + "\n";
    }
    return text;
}

const std::vector<std::string> kSmallNet{"--window", "8", "--hidden", "3", "--attn-dim", "3", "--decoder-hidden",
                                         "3", "--epochs", "2", "--batch", "64"};

std::vector<double> forecast_values(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "timestamp,forecast");
    std::vector<double> out;
    while (std::getline(in, line)) {
        if (line.find(',') == std::string::npos) break;
        out.push_back(std::stod(line.substr(line.find(',') + 1)));
    }
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("stats on a constant file") {
    TempDir dir;
    const auto csv = dir.file("flat.csv");
    spit(csv, "timestamp,glucose\n2024-01-01T00:00:00Z,100\n2024-01-01T00:05:00Z,100\n2024-01-01T00:10:00Z,100\n");
    const auto r = run_cli({"stats", "-i", csv, "--lo", "90", "--hi", "150", "-o", dir.file("s.json")});
    CHECK(r.code == 0);
    CHECK(r.out.find("100.0 ± 0.0") != std::string::npos);
    const auto j = json::parse(slurp(dir.file("s.json")));
    CHECK(j["n"] == 3);
    CHECK(j["std"] == 0.0);
    CHECK(j["tir"] == 1.0);
    CHECK(std::filesystem::exists(dir.file("s.json.manifest.json")));
}

TEST_CASE("exit codes") {
    TempDir dir;
    const auto empty = dir.file("empty.csv");
    spit(empty, "");
    auto r = run_cli({"stats", "-i", empty});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());

    const auto bad = dir.file("bad.csv");
    spit(bad, "timestamp,glucose\n2024-01-01T00:00:00Z,abc\n");
    r = run_cli({"stats", "-i", bad});
    CHECK(r.code == 2);
    CHECK(r.err.find("bad.csv") != std::string::npos);

    CHECK(run_cli({"stats"}).code == 1);
    CHECK(run_cli({"frobnicate"}).code == 1);
    CHECK(run_cli({"fit", "-i", bad, "-m", "nonsense", "-o", dir.file("m.json")}).code == 1);
    CHECK(run_cli({"--help"}).code == 0);

    const auto short_csv = dir.file("short.csv");
    spit(short_csv, line_csv(30, 100, 1));
    // BATS with its daily default period needs far more than 30 points.
    CHECK(run_cli({"fit", "-i", short_csv, "-m", "bats", "-o", dir.file("b.json")}).code == 2);
}

TEST_CASE("fit des on linear data and forecast continues the line") {
    TempDir dir;
    const auto csv = dir.file("line.csv");
    spit(csv, line_csv(60, 80, 2));
    const auto model = dir.file("des.json");
    REQUIRE(run_cli({"fit", "-i", csv, "-m", "des", "-o", model}).code == 0);
    const auto fc = dir.file("fc.csv");
    REQUIRE(run_cli({"forecast", "--model-file", model, "-k", "4", "-o", fc}).code == 0);
    const auto values = forecast_values(slurp(fc));
    REQUIRE(values.size() == 4);
    for (int h = 1; h <= 4; ++h) CHECK(std::abs(values[std::size_t(h - 1)] - (198.0 + 2 * h)) <= 1e-6);

    // Conditioning on a different history continues that history instead.
    const auto other = dir.file("other.csv");
    spit(other, line_csv(40, 150, -1));
    const auto r = run_cli({"forecast", "--model-file", model, "-i", other, "-k", "1"});
    CHECK(r.code == 0);
    const auto cont = forecast_values(r.out);
    REQUIRE(cont.size() == 1);
    CHECK(std::abs(cont[0] - 110.0) <= 1e-6);
}

TEST_CASE("auto-arima manifest records the grid size") {
    TempDir dir;
    const auto csv = dir.file("s.csv");
    REQUIRE(run_cli({"synth", "-o", csv, "--days", "1"}).code == 0);
    const auto model = dir.file("aa.json");
    REQUIRE(run_cli({"fit", "-i", csv, "-m", "auto-arima", "--max-p", "5", "--max-q", "5", "-o", model}).code == 0);
    const auto manifest = json::parse(slurp(model + ".manifest.json"));
    CHECK(manifest["format"] == "glucast-manifest");
    CHECK(manifest["summary"]["searched_grid_size"] == 36);
    CHECK(manifest["inputs"][0]["sha256"].get<std::string>().size() == 64);
    CHECK(manifest["config"]["model"]["params"]["max_p"] == 5);
}

TEST_CASE("timeglu fits are byte-identical for a seed") {
    TempDir dir;
    const auto csv = dir.file("s.csv");
    REQUIRE(run_cli({"synth", "-o", csv, "--days", "1"}).code == 0);
    const auto a = dir.file("a.json"), b = dir.file("b.json"), c = dir.file("c.json");
    const auto base = concat({"fit", "-i", csv, "-m", "timeglu", "--seed", "7"}, kSmallNet);
    REQUIRE(run_cli(concat(base, {"-o", a, "--log", dir.file("log.csv")})).code == 0);
    REQUIRE(run_cli(concat(base, {"-o", b})).code == 0);
    CHECK(slurp(a) == slurp(b));
    const auto log = slurp(dir.file("log.csv"));
    CHECK(log.rfind("epoch,", 0) == 0);
    CHECK(count_occurrences(log, "\n") == 3);

    auto other = concat({"fit", "-i", csv, "-m", "timeglu", "--seed", "8"}, kSmallNet);
    REQUIRE(run_cli(concat(other, {"-o", c})).code == 0);
    CHECK(slurp(a) != slurp(c));
}

TEST_CASE("compare six models deterministically") {
    TempDir dir;
    const auto csv = dir.file("s.csv");
    REQUIRE(run_cli({"synth", "-o", csv, "--days", "3"}).code == 0);
    auto args = concat({"compare", "-i", csv, "--seed", "7", "--stride", "24", "--max-p", "2", "--max-q", "2"},
                       kSmallNet);
    const auto r1 = run_cli(concat(args, {"-o", dir.file("r1.json"), "--svg", dir.file("plot")}));
    REQUIRE(r1.code == 0);
    const auto r2 = run_cli(concat(args, {"-o", dir.file("r2.json"), "--serial"}));
    REQUIRE(r2.code == 0);
    CHECK(slurp(dir.file("r1.json")) == slurp(dir.file("r2.json")));
    CHECK(r1.out == r2.out);

    const auto report = json::parse(slurp(dir.file("r1.json")));
    REQUIRE(report["rows"].size() == 6);
    std::set<std::string> ids;
    for (const auto& row : report["rows"]) {
        CHECK(row["status"] == "ok");
        ids.insert(row["model_id"].get<std::string>());
    }
    CHECK(ids == std::set<std::string>{"DFS", "AutoARIMA", "BATS", "TBATS", "TimeGlu", "Persistence"});
    for (std::size_t i = 1; i < report["rows"].size(); ++i) {
        CHECK(report["rows"][i - 1]["mae"].get<double>() <= report["rows"][i]["mae"].get<double>());
    }
    CHECK(count_occurrences(r1.out, "\n") == 8);

    const auto svg = slurp(dir.file("plot-timeglu.svg"));
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(count_occurrences(svg, "<polyline") == 2);
    CHECK(count_occurrences(svg, "</svg>") == 1);
}

TEST_CASE("refit policy changes the manifest, not reproducibility") {
    TempDir dir;
    const auto csv = dir.file("line.csv");
    spit(csv, line_csv(80, 90, 0.5));
    const std::vector<std::string> base{"evaluate", "-i", csv, "-m", "des", "-k", "1"};
    REQUIRE(run_cli(concat(base, {"--refit", "once", "-o", dir.file("a.json")})).code == 0);
    REQUIRE(run_cli(concat(base, {"--refit", "every-origin", "-o", dir.file("b.json")})).code == 0);
    REQUIRE(run_cli(concat(base, {"--refit", "every-origin", "-o", dir.file("c.json")})).code == 0);
    const auto ma = json::parse(slurp(dir.file("a.json.manifest.json")));
    const auto mb = json::parse(slurp(dir.file("b.json.manifest.json")));
    CHECK(ma["config"] != mb["config"]);
    CHECK(ma["config"]["protocol"]["refit"] == "once");
    CHECK(mb["config"]["protocol"]["refit"] == "every-origin");
    const auto rb = json::parse(slurp(dir.file("b.json")));
    const auto rc = json::parse(slurp(dir.file("c.json")));
    CHECK(rb == rc);
    CHECK(rb["rows"][0]["mae"].get<double>() <= 1e-6);
    CHECK(run_cli(concat(base, {"--refit", "never", "-o", dir.file("d.json")})).code == 1);
}

TEST_CASE("ablation report has the four structure variants") {
    TempDir dir;
    const auto csv = dir.file("s.csv");
    REQUIRE(run_cli({"synth", "-o", csv, "--days", "1"}).code == 0);
    const auto r = run_cli(concat({"compare", "-i", csv, "--ablate", "timeglu", "--seed", "3", "--stride", "12",
                                   "-o", dir.file("ab.json")},
                                  kSmallNet));
    REQUIRE(r.code == 0);
    const auto report = json::parse(slurp(dir.file("ab.json")));
    REQUIRE(report["rows"].size() == 4);
    std::set<std::string> labels;
    for (const auto& row : report["rows"]) labels.insert(row["label"].get<std::string>());
    CHECK(labels == std::set<std::string>{"TimeGlu", "TimeGlu-LSTM-encoder", "TimeGlu-LSTM-decoder",
                                          "TimeGlu-no-attention"});
}

TEST_CASE("stats plot and config file precedence") {
    TempDir dir;
    const auto csv = dir.file("s.csv");
    REQUIRE(run_cli({"synth", "-o", csv, "--days", "2"}).code == 0);
    REQUIRE(run_cli({"stats", "-i", csv, "--svg", dir.file("profile.svg")}).code == 0);
    const auto svg = slurp(dir.file("profile.svg"));
    CHECK(count_occurrences(svg, "<polyline") == 5);

    const auto cfg = dir.file("run.toml");
    spit(cfg, "[fit]\nalpha = 0.3\nbeta = 0.2\n");
    REQUIRE(run_cli({"--config", cfg, "fit", "-i", csv, "-m", "des", "-o", dir.file("m1.json")}).code == 0);
    REQUIRE(run_cli({"--config", cfg, "fit", "-i", csv, "-m", "des", "--alpha", "0.6", "-o", dir.file("m2.json")})
                .code == 0);
    REQUIRE(run_cli({"fit", "-i", csv, "-m", "des", "-o", dir.file("m3.json")}).code == 0);
    const auto p1 = json::parse(slurp(dir.file("m1.json")))["config"]["params"];
    const auto p2 = json::parse(slurp(dir.file("m2.json")))["config"]["params"];
    const auto p3 = json::parse(slurp(dir.file("m3.json")))["config"]["params"];
    CHECK(p1["alpha"] == 0.3);
    CHECK(p1["beta"] == 0.2);
    CHECK(p2["alpha"] == 0.6);
    CHECK(p2["beta"] == 0.2);
    CHECK(p3["alpha"].is_null());
}

TEST_CASE("gradcheck command") {
    const auto r = run_cli({"gradcheck", "--seeds", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("max relative error") != std::string::npos);
    CHECK(run_cli({"gradcheck", "--seeds", "1", "--tolerance", "1e-30"}).code == 3);
}

TEST_CASE("synth is reproducible and matches the bundled file") {
    TempDir dir;
    REQUIRE(run_cli({"synth", "-o", dir.file("a.csv")}).code == 0);
    CHECK(slurp(dir.file("a.csv")) == slurp(std::string(GLUCAST_DATA_DIR) + "/synthetic_cgm.csv"));
}

TEST_CASE("epoch-second timestamps") {
    TempDir dir;
    const auto csv = dir.file("epoch.csv");
    spit(csv, "timestamp,glucose\n1704067200,100\n1704067500,110\n");
    CHECK(run_cli({"stats", "-i", csv}).code == 2);
    const auto r = run_cli({"stats", "-i", csv, "--time-format", "epoch"});
    CHECK(r.code == 0);
    CHECK(r.out.find("2024-01-01T00:00:00Z") != std::string::npos);
    CHECK(run_cli({"stats", "-i", csv, "--time-format", "unix"}).code == 1);
}

TEST_CASE("model names") {
    using glucast::ModelId;
    CHECK(glucast::cli::parse_model_name("des") == ModelId::DFS);
    CHECK(glucast::cli::parse_model_name("DFS") == ModelId::DFS);
    CHECK(glucast::cli::parse_model_name("auto-arima") == ModelId::AutoARIMA);
    CHECK(glucast::cli::parse_model_name("tbats") == ModelId::TBATS);
    CHECK(glucast::cli::parse_model_name("TimeGlu") == ModelId::TimeGlu);
    CHECK_THROWS_AS(glucast::cli::parse_model_name("lstm"), glucast::UsageError);
}
