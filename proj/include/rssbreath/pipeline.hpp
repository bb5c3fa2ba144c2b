#pragma once

// End-to-end processing of a recorded trace: windowed mean removal feeds the
// motion detector and, while the link is still, the anti-alias decimator and
// the sliding estimation window. Motion flushes the downstream state so
// estimates never mix samples from both sides of a movement burst.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "rssbreath/analysis.hpp"
#include "rssbreath/core.hpp"

namespace rssbreath::pipeline {

struct Estimate {
    // Time of the newest sample in the window, group-delay corrected so it
    // refers to the raw stream, seconds from the trace start.
    double t_s = 0.0;
    std::size_t end_cycle = 0;  // raw cycle index of that sample
    BreathingParams params;
    double r2 = 0.0;  // doubled-angle phase concentration of the window
    std::vector<analysis::Peak> peaks;  // filled when RunOptions::peak_count > 0
};

struct RunOptions {
    int peak_count = 0;       // peaks to record per estimate, 0 = skip detection
    bool keep_psd = false;    // keep each estimate's spectrum (memory heavy)
    bool collect_decimated = false;  // keep the decimated stream in the report
};

struct RunReport {
    int num_channels = 0;
    std::vector<MotionState> states;  // one per raw cycle
    std::vector<Estimate> estimates;
    std::size_t gate_flushes = 0;     // still-to-motion transitions that dropped state
    double estimator_seconds = 0.0;   // wall time inside spectrum/parameter search
    double group_delay_s = 0.0;
    std::size_t filter_taps = 0;
    std::size_t window_length = 0;    // estimation window, decimated samples
    // Row-major decimated samples fed to the estimator and the raw cycle each
    // row came from; filled only when RunOptions::collect_decimated is set.
    std::vector<double> decimated;
    std::vector<std::size_t> decimated_cycles;
};

// Runs the full chain over a trace. The config must agree with the trace on
// sampling rate and channel count; anything else is a ConfigError.
RunReport run_trace(const RssTrace& trace, const PipelineConfig& config,
                    const RunOptions& options = {});

// Estimates CSV: `t_s,f_hat_hz,bpm,amp_1..amp_C,phase_1..phase_C`.
void write_estimates(const RunReport& report, const std::filesystem::path& path);
void write_estimates(const RunReport& report, std::ostream& out);

}  // namespace rssbreath::pipeline
