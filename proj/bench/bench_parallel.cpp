#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "glucast/arima.hpp"
#include "glucast/eval.hpp"
#include "glucast/neural/timeglu.hpp"
#include "glucast/synth.hpp"

using namespace glucast;

namespace {

/// Best-of-n wall time in seconds; `fn` returns a fingerprint of its result.
double time_best(int repeats, const std::function<std::string()>& fn, std::string& fingerprint) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fingerprint = fn();
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        best = std::min(best, dt.count());
    }
    return best;
}

std::string hex(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

void row(const char* name, int repeats, const std::function<std::string(bool)>& kernel) {
    std::string fs, fp;
    const double ts = time_best(repeats, [&] { return kernel(false); }, fs);
    const double tp = time_best(repeats, [&] { return kernel(true); }, fp);
    std::printf("%-22s %10.4f %10.4f %8.2fx  %s\n", name, ts, tp, ts / tp, fs == fp ? "identical" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial vs OpenMP timings of the parallel kernels"};
    int repeats = 3;
    int threads = 0;
    app.add_option("-r,--repeats", repeats, "Runs per kernel (best time reported)")->capture_default_str();
    app.add_option("-t,--threads", threads, "OpenMP threads (0: runtime default)");
    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
    std::printf("%-22s %10s %10s %9s  %s\n", "kernel", "serial s", "openmp s", "speedup", "results");

    const auto ar = synth::ar1(1000, 0.7, 1.0, 42);
    row("auto_arima 6x6 grid", repeats, [&](bool parallel) {
        const auto res = arima::auto_arima_search(ar, {5, 2, 5, parallel});
        return hex(res.best.aic);
    });

    neural::Architecture arch;
    arch.window = 24;
    arch.encoder_hidden = 16;
    arch.attn_dim = 16;
    arch.decoder_hidden = 16;
    const auto params = neural::TimeGluParams::initialize(arch, 42);
    const auto windows = neural::make_windows(synth::sinusoid(600, 24, 0.0, 1.0, 0.1, 42), arch.window);
    std::vector<std::size_t> batch(64);
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i * 7 % windows.targets.size();
    row("TimeGlu batch gradient", repeats, [&](bool parallel) {
        neural::TimeGluParams grads;
        const double loss = neural::batch_loss_and_gradient(params, windows, batch, nullptr, grads, parallel);
        std::string fp = hex(loss);
        grads.for_each([&](const std::string&, const neural::Tensor& t) { fp += hex(t.data().front()); });
        return fp;
    });

    synth::CgmConfig cgm;
    cgm.days = 3;
    const auto series = synth::synthetic_cgm(cgm);
    eval::BacktestProtocol protocol;
    protocol.stride = 6;
    std::vector<ForecasterConfig> models{ForecasterConfig::defaults(ModelId::DFS),
                                         ForecasterConfig::defaults(ModelId::AutoARIMA),
                                         ForecasterConfig::defaults(ModelId::BATS)};
    auto& search = std::get<ArimaParams>(models[1].params).search;
    search.max_p = 2;
    search.max_q = 2;
    row("compare (4 models)", repeats, [&](bool parallel) {
        return eval::compare(models, series, protocol, {true, parallel}).to_json().dump();
    });
    return 0;
}
