#include "rssbreath/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <utility>

#include "rssbreath/estimator.hpp"
#include "rssbreath/filter.hpp"
#include "rssbreath/log.hpp"
#include "rssbreath/motion.hpp"
#include "rssbreath/preprocess.hpp"

namespace rssbreath::pipeline {

RunReport run_trace(const RssTrace& trace, const PipelineConfig& config,
                    const RunOptions& options) {
    config.validate();
    if (trace.num_channels != config.num_channels) {
        throw ConfigError("trace has " + std::to_string(trace.num_channels)
                          + " channels but the config expects "
                          + std::to_string(config.num_channels));
    }
    if (std::abs(trace.fs_hz - config.fs_hz) > 1e-9) {
        throw ConfigError("trace sampled at " + format_double(trace.fs_hz)
                          + " Hz but the config expects " + format_double(config.fs_hz) + " Hz");
    }
    if (trace.rows() == 0) throw DataError("trace has no samples");

    const int c_count = config.num_channels;
    const std::size_t c_sz = static_cast<std::size_t>(c_count);
    const std::size_t window_len = static_cast<std::size_t>(config.window_length());
    const double step_s = static_cast<double>(config.decimation) / config.fs_hz;

    filter::FirSpec spec;
    spec.fs_hz = config.fs_hz;
    spec.passband_hz = config.resolved_passband_hz();
    spec.stopband_hz = config.resolved_stopband_hz();
    spec.ripple_db = config.filter_ripple_db;
    spec.atten_db = config.filter_atten_db;
    filter::FirDecimator decimator(filter::design_lowpass(spec), config.decimation, c_count,
                                   config.fs_hz);
    preprocess::MeanRemover remover(c_count, config.resolved_mean_window());
    motion::HmmFilter detector(motion::HmmParams::from_config(config));
    const estimator::FrequencyGrid grid = estimator::FrequencyGrid::from_config(config);
    const estimator::ProjectionTable table(grid, window_len, step_s);

    RunReport report;
    report.num_channels = c_count;
    report.states.reserve(trace.rows());
    report.group_delay_s = decimator.group_delay_s();
    report.filter_taps = decimator.taps().size();
    report.window_length = window_len;
    log::infof("run: %zu cycles, %d channels, %zu taps, window %zu decimated samples",
               trace.rows(), c_count, report.filter_taps, window_len);

    // Ring of the newest window_len decimated samples; head_ is the slot the
    // next sample overwrites, which is also the oldest row once full.
    std::vector<double> ring(window_len * c_sz, 0.0);
    std::size_t ring_head = 0;
    std::size_t ring_count = 0;
    std::size_t until_next = 0;  // decimated samples until the next estimate is due
    const std::size_t stride =
        config.estimate_stride_s > 0.0
            ? std::max<std::size_t>(
                  1, static_cast<std::size_t>(std::lround(config.estimate_stride_s / step_s)))
            : 1;

    estimator::EstimationWindow window;
    window.length = window_len;
    window.num_channels = c_count;
    window.step_s = step_s;
    window.data.resize(window_len * c_sz);

    ChannelVector raw;
    raw.values.resize(c_sz);
    bool fed_any = false;

    for (std::size_t k = 0; k < trace.rows(); ++k) {
        const double* row = trace.row(k);
        std::copy(row, row + c_count, raw.values.begin());
        raw.kind = SampleKind::kRaw;
        const ChannelVector removed = remover.push(raw);

        const motion::StepResult step = detector.step(motion::observe(removed));
        report.states.push_back(step.state);
        if (step.state == MotionState::kMotion) {
            if (fed_any) {
                // Motion corrupts the filter delay line and any partial
                // window; both restart from scratch when the link calms down.
                decimator.reset();
                ring_count = 0;
                ring_head = 0;
                until_next = 0;
                fed_any = false;
                ++report.gate_flushes;
            }
            continue;
        }

        const std::optional<ChannelVector> emitted = decimator.push(removed);
        fed_any = true;
        if (!emitted) continue;
        std::copy(emitted->values.begin(), emitted->values.end(),
                  ring.begin() + static_cast<std::ptrdiff_t>(ring_head * c_sz));
        ring_head = (ring_head + 1) % window_len;
        if (ring_count < window_len) ++ring_count;
        if (options.collect_decimated) {
            report.decimated.insert(report.decimated.end(), emitted->values.begin(),
                                    emitted->values.end());
            report.decimated_cycles.push_back(k);
        }
        if (ring_count < window_len) continue;
        if (until_next > 0) --until_next;
        if (until_next > 0) continue;
        until_next = stride;

        // Unroll the ring oldest-first into the window buffer.
        const std::size_t tail = window_len - ring_head;
        std::copy(ring.begin() + static_cast<std::ptrdiff_t>(ring_head * c_sz), ring.end(),
                  window.data.begin());
        std::copy(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(ring_head * c_sz),
                  window.data.begin() + static_cast<std::ptrdiff_t>(tail * c_sz));

        const auto t0 = std::chrono::steady_clock::now();
        Estimate est;
        est.params = table.estimate(window);
        report.estimator_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        est.end_cycle = k;
        est.t_s = static_cast<double>(k) / config.fs_hz - report.group_delay_s;
        double weight = 0.0;
        for (double a : est.params.amplitudes) weight += a;
        est.r2 = (c_count >= 2 && weight > 0.0)
                     ? analysis::phase_dispersion(est.params.phases, est.params.amplitudes)
                     : 0.0;
        if (options.peak_count > 0) {
            est.peaks = analysis::detect_peaks(est.params.psd, grid);
            if (est.peaks.size() > static_cast<std::size_t>(options.peak_count)) {
                est.peaks.resize(static_cast<std::size_t>(options.peak_count));
            }
        }
        if (!options.keep_psd) {
            est.params.psd.clear();
            est.params.psd.shrink_to_fit();
        }
        report.estimates.push_back(std::move(est));
    }
    log::infof("run: %zu estimates, %zu motion flushes, %.3f s in the estimator",
               report.estimates.size(), report.gate_flushes, report.estimator_seconds);
    return report;
}

void write_estimates(const RunReport& report, std::ostream& out) {
    out << "t_s,f_hat_hz,bpm";
    for (int c = 1; c <= report.num_channels; ++c) out << ",amp_" << c;
    for (int c = 1; c <= report.num_channels; ++c) out << ",phase_" << c;
    out << '\n';
    for (const Estimate& est : report.estimates) {
        out << format_double(est.t_s) << ',' << format_double(est.params.freq_hz) << ','
            << format_double(60.0 * est.params.freq_hz);
        for (double a : est.params.amplitudes) out << ',' << format_double(a);
        for (double p : est.params.phases) out << ',' << format_double(p);
        out << '\n';
    }
}

void write_estimates(const RunReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_estimates(report, out);
    if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace rssbreath::pipeline
