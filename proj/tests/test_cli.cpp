#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "rssbreath/cli.hpp"
#include "rssbreath/core.hpp"
#include "rssbreath/synth.hpp"

using namespace rssbreath;
namespace fs = std::filesystem;

namespace {

int run_cli(std::initializer_list<std::string> args) {
    std::vector<std::string> storage{"rssbreath"};
    storage.insert(storage.end(), args);
    std::vector<const char*> argv;
    argv.reserve(storage.size());
    for (const std::string& s : storage) argv.push_back(s.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

// Per-process scratch directory so parallel ctest invocations cannot collide.
fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path()
                     / ("rssbreath_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
    const fs::path path = scratch_dir() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

const std::string kStillScenario =
    "seed = 5\n"
    "quant_step_db = 0\n"
    "channels = 2\n"
    "estimate_stride_s = 1.0\n"
    "\n"
    "[segment]\n"
    "state = S1\n"
    "duration_s = 70\n"
    "sigma_db = 0.197\n"
    "\n"
    "[person]\n"
    "freq_hz = 0.25\n"
    "amp_db = value:0.3\n"
    "phase = bimodal:0.4\n";

}  // namespace

TEST_CASE("help and version exit cleanly") {
    CHECK_EQ(run_cli({"--help"}), 0);
    CHECK_EQ(run_cli({"--version"}), 0);
    CHECK_EQ(run_cli({"synth", "--help"}), 0);
}

TEST_CASE("bad invocations are argument errors") {
    CHECK_EQ(run_cli({}), 2);                       // a subcommand is required
    CHECK_EQ(run_cli({"frobnicate"}), 2);           // unknown subcommand
    CHECK_EQ(run_cli({"synth"}), 2);                // missing required options
    CHECK_EQ(run_cli({"run", "--bogus", "x"}), 2);  // unknown option
}

TEST_CASE("synth writes deterministic traces and truth files") {
    const fs::path scenario = write_file("det.scn", kStillScenario);
    const fs::path trace_a = scratch_dir() / "det_a.csv";
    const fs::path trace_b = scratch_dir() / "det_b.csv";
    const fs::path truth_a = scratch_dir() / "det_a_truth.csv";

    CHECK_EQ(run_cli({"synth", "--scenario", scenario.string(), "--out", trace_a.string(),
                      "--truth", truth_a.string()}),
             0);
    CHECK_EQ(run_cli({"synth", "--scenario", scenario.string(), "--out", trace_b.string()}), 0);
    CHECK_EQ(slurp(trace_a), slurp(trace_b));

    const RssTrace trace = read_trace(trace_a.string());
    CHECK_EQ(trace.num_channels, 2);
    CHECK_EQ(trace.fs_hz, 62.5);
    CHECK_EQ(trace.rows(), 4375);
    const synth::GroundTruth truth = synth::read_truth(truth_a.string());
    CHECK_EQ(truth.state.size(), trace.rows());

    // A different seed gives a different byte stream.
    const fs::path trace_c = scratch_dir() / "det_c.csv";
    CHECK_EQ(run_cli({"synth", "--scenario", scenario.string(), "--out", trace_c.string(),
                      "--seed", "99"}),
             0);
    CHECK_NE(slurp(trace_a), slurp(trace_c));
}

TEST_CASE("synth rejects broken scenarios and missing files") {
    const fs::path empty = write_file("empty.scn", "seed = 1\n");
    const fs::path out = scratch_dir() / "never.csv";
    CHECK_EQ(run_cli({"synth", "--scenario", empty.string(), "--out", out.string()}), 2);
    CHECK_EQ(run_cli({"synth", "--scenario", (scratch_dir() / "nope.scn").string(), "--out",
                      out.string()}),
             3);
}

TEST_CASE("run estimates a synthesized trace and writes a CSV") {
    const fs::path scenario = write_file("run.scn", kStillScenario);
    const fs::path trace = scratch_dir() / "run.csv";
    const fs::path truth = scratch_dir() / "run_truth.csv";
    const fs::path estimates = scratch_dir() / "run_est.csv";
    REQUIRE_EQ(run_cli({"synth", "--scenario", scenario.string(), "--out", trace.string(),
                        "--truth", truth.string()}),
               0);

    CHECK_EQ(run_cli({"run", "--trace", trace.string(), "--truth", truth.string(), "--out",
                      estimates.string()}),
             0);
    std::ifstream in(estimates);
    REQUIRE_UNARY(in.good());
    std::string header;
    std::getline(in, header);
    CHECK_EQ(header, "t_s,f_hat_hz,bpm,amp_1,amp_2,phase_1,phase_2");
    // The trace file carries no cadence, so the run falls back to the dense
    // default: one estimate per decimated sample once the window fills.
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK_EQ(rows, 251);
}

TEST_CASE("run rejects missing traces and contradictory configs") {
    CHECK_EQ(run_cli({"run", "--trace", (scratch_dir() / "ghost.csv").string()}), 3);

    const fs::path scenario = write_file("mismatch.scn", kStillScenario);
    const fs::path trace = scratch_dir() / "mismatch.csv";
    REQUIRE_EQ(run_cli({"synth", "--scenario", scenario.string(), "--out", trace.string()}), 0);

    const fs::path wrong_rate = write_file("wrong_rate.conf", "fs_hz = 31.25\n");
    CHECK_EQ(run_cli({"run", "--trace", trace.string(), "--config", wrong_rate.string()}), 2);
    const fs::path wrong_channels = write_file("wrong_ch.conf", "channels = 9\n");
    CHECK_EQ(run_cli({"run", "--trace", trace.string(), "--config", wrong_channels.string()}),
             2);
}

TEST_CASE("run accepts spot overrides for the estimator") {
    const fs::path scenario = write_file("opts.scn", kStillScenario);
    const fs::path trace = scratch_dir() / "opts.csv";
    REQUIRE_EQ(run_cli({"synth", "--scenario", scenario.string(), "--out", trace.string()}), 0);
    const fs::path taps = scratch_dir() / "opts_taps.txt";
    CHECK_EQ(run_cli({"run", "--trace", trace.string(), "--peaks", "2", "--stride-s", "2",
                      "--taps-out", taps.string()}),
             0);
    std::ifstream tap_file(taps);
    std::size_t tap_lines = 0;
    for (std::string line; std::getline(tap_file, line);) ++tap_lines;
    CHECK_EQ(tap_lines, 301);
    // Unusable grids are argument errors, whether caught at parse time or by
    // config validation.
    CHECK_EQ(run_cli({"run", "--trace", trace.string(), "--grid-hz", "0"}), 2);
    CHECK_EQ(run_cli({"run", "--trace", trace.string(), "--grid-hz", "2.0"}), 2);
}

TEST_CASE("sweep writes one CSV row per axis value") {
    const fs::path scenario = write_file("sweep.scn", kStillScenario);
    const fs::path out = scratch_dir() / "sweep.csv";
    CHECK_EQ(run_cli({"sweep", "--scenario", scenario.string(), "--axis", "M", "--values",
                      "1,10", "--out", out.string()}),
             0);
    std::ifstream in(out);
    REQUIRE_UNARY(in.good());
    std::string header;
    std::getline(in, header);
    CHECK_EQ(header, "value,mean_error_bpm,failure_rate");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK_EQ(rows, 2);

    CHECK_EQ(run_cli({"sweep", "--scenario", scenario.string(), "--axis", "sideways",
                      "--values", "1", "--out", out.string()}),
             2);
    CHECK_EQ(run_cli({"sweep", "--scenario", scenario.string(), "--axis", "M", "--values",
                      "abc", "--out", out.string()}),
             2);
}

TEST_CASE("fit-density recovers noise scales into a config file") {
    const std::string still_scn =
        "seed = 7\nquant_step_db = 0\nchannels = 1\n"
        "[segment]\nstate = S1\nduration_s = 40\nsigma_db = 0.25\n";
    const std::string motion_scn =
        "seed = 8\nquant_step_db = 0\nchannels = 16\n"
        "[segment]\nstate = S2\nduration_s = 40\nsigma_db = 2.0\n";
    const fs::path still_file = write_file("fit_still.scn", still_scn);
    const fs::path motion_file = write_file("fit_motion.scn", motion_scn);
    const fs::path still_trace = scratch_dir() / "fit_still.csv";
    const fs::path motion_trace = scratch_dir() / "fit_motion.csv";
    REQUIRE_EQ(
        run_cli({"synth", "--scenario", still_file.string(), "--out", still_trace.string()}),
        0);
    REQUIRE_EQ(
        run_cli({"synth", "--scenario", motion_file.string(), "--out", motion_trace.string()}),
        0);

    const fs::path fitted = scratch_dir() / "fitted.conf";
    CHECK_EQ(run_cli({"fit-density", "--still", still_trace.string(), "--motion",
                      motion_trace.string(), "--out", fitted.string()}),
             0);
    const PipelineConfig config = load_config(fitted.string());
    CHECK_GT(config.sigma1, 0.2);
    CHECK_LT(config.sigma1, 0.3);
    CHECK_GT(config.sigma2, 1.8);
    CHECK_LT(config.sigma2, 2.2);

    // Too little data to fit from is an argument error.
    const std::string tiny_scn =
        "seed = 7\nchannels = 1\n[segment]\nstate = S1\nduration_s = 5\nsigma_db = 0.25\n";
    const fs::path tiny_file = write_file("fit_tiny.scn", tiny_scn);
    const fs::path tiny_trace = scratch_dir() / "fit_tiny.csv";
    REQUIRE_EQ(run_cli({"synth", "--scenario", tiny_file.string(), "--out", tiny_trace.string()}),
               0);
    CHECK_EQ(run_cli({"fit-density", "--still", tiny_trace.string(), "--motion",
                      motion_trace.string()}),
             2);
}
