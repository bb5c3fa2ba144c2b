#include "rssbreath/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <thread>

#include "rssbreath/log.hpp"
#include "rssbreath/pipeline.hpp"

namespace rssbreath::analysis {

ErrorStats error_stats(const std::vector<double>& estimates_hz, double true_hz,
                       double failure_threshold_bpm) {
    if (estimates_hz.empty()) throw ConfigError("error stats need at least one estimate");
    ErrorStats stats;
    stats.count = estimates_hz.size();
    double sum = 0.0, sum_abs = 0.0;
    std::size_t failures = 0;
    for (double f : estimates_hz) {
        const double err_bpm = 60.0 * (f - true_hz);
        sum += err_bpm;
        sum_abs += std::abs(err_bpm);
        if (std::abs(err_bpm) > failure_threshold_bpm) ++failures;
    }
    const double n = static_cast<double>(stats.count);
    stats.mean_signed_bpm = sum / n;
    stats.mean_abs_bpm = sum_abs / n;
    stats.failure_rate = static_cast<double>(failures) / n;
    double ss = 0.0;
    for (double f : estimates_hz) {
        const double d = 60.0 * (f - true_hz) - stats.mean_signed_bpm;
        ss += d * d;
    }
    stats.std_bpm = stats.count > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return stats;
}

double mean_error_bpm(const std::vector<double>& estimates_hz, double true_hz) {
    return error_stats(estimates_hz, true_hz).mean_signed_bpm;
}

std::vector<int> rank_channels(const std::vector<double>& amplitudes, int k) {
    const int c = static_cast<int>(amplitudes.size());
    if (k < 1 || k > c) {
        throw ConfigError("channel ranking: k must be in [1, " + std::to_string(c) + "], got "
                          + std::to_string(k));
    }
    std::vector<int> order(amplitudes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return amplitudes[static_cast<std::size_t>(a)] > amplitudes[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

std::vector<Peak> detect_peaks(const std::vector<double>& psd, const estimator::FrequencyGrid& grid,
                               double min_separation_hz, double rel_threshold) {
    if (psd.size() != grid.size()) {
        throw DataError("peak detection: spectrum length does not match the grid");
    }
    const double top = *std::max_element(psd.begin(), psd.end());
    if (!(top > 0.0)) return {};
    const double floor_power = rel_threshold * top;

    std::vector<Peak> candidates;
    const std::size_t n = psd.size();
    for (std::size_t i = 0; i < n; ++i) {
        const bool rises = i == 0 ? n > 1 && psd[0] > psd[1] : psd[i] > psd[i - 1];
        const bool falls = i + 1 == n ? i > 0 && psd[i] > psd[i - 1] : psd[i] >= psd[i + 1];
        if (rises && falls && psd[i] >= floor_power) {
            candidates.push_back({grid.at(i), psd[i], i});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Peak& a, const Peak& b) {
        return a.power > b.power;
    });
    std::vector<Peak> kept;
    for (const Peak& p : candidates) {
        const bool clear = std::none_of(kept.begin(), kept.end(), [&](const Peak& q) {
            return std::abs(q.freq_hz - p.freq_hz) < min_separation_hz;
        });
        if (clear) kept.push_back(p);
    }
    return kept;
}

double phase_dispersion(const std::vector<double>& phases, const std::vector<double>& weights) {
    if (phases.size() != weights.size()) {
        throw ConfigError("phase dispersion: phases and weights differ in length");
    }
    if (phases.size() < 2) throw ConfigError("phase dispersion needs at least two channels");
    std::complex<double> acc{0.0, 0.0};
    double total = 0.0;
    for (std::size_t c = 0; c < phases.size(); ++c) {
        if (weights[c] < 0.0) throw ConfigError("phase dispersion: negative weight");
        acc += weights[c] * std::polar(1.0, 2.0 * phases[c]);
        total += weights[c];
    }
    if (!(total > 0.0)) throw ConfigError("phase dispersion: all channel weights are zero");
    return std::abs(acc) / total;
}

namespace {

double gaussian_cdf(double x, double sigma) {
    return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0)));
}

}  // namespace

KsResult ks_statistic(std::vector<double> samples, double sigma) {
    if (samples.size() < 50) {
        throw ConfigError("KS test needs at least 50 samples, got "
                          + std::to_string(samples.size()));
    }
    if (!(sigma > 0.0)) throw ConfigError("KS test: reference sigma must be positive");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double ref = gaussian_cdf(samples[i], sigma);
        const double below = static_cast<double>(i) / n;
        const double above = static_cast<double>(i + 1) / n;
        d = std::max({d, ref - below, above - ref});
    }
    KsResult result;
    result.d = d;
    result.n = samples.size();
    result.critical = 1.358 / std::sqrt(n);
    result.accepted = d <= result.critical;
    return result;
}

std::vector<ChannelKs> residual_gaussianity(const estimator::EstimationWindow& window,
                                            const BreathingParams& params, std::size_t stride) {
    window.validate();
    if (stride == 0) throw ConfigError("residual test: stride must be positive");
    const std::size_t c_count = static_cast<std::size_t>(window.num_channels);
    if (params.amplitudes.size() != c_count || params.phases.size() != c_count) {
        throw DataError("residual test: parameter bundle does not match the window channels");
    }
    const double omega = 2.0 * std::acos(-1.0) * params.freq_hz * window.step_s;
    std::vector<ChannelKs> report;
    report.reserve(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
        std::vector<double> residuals;
        residuals.reserve(window.length / stride + 1);
        for (std::size_t k = 0; k < window.length; k += stride) {
            const double model = params.amplitudes[c]
                                 * std::cos(omega * static_cast<double>(k) + params.phases[c]);
            residuals.push_back(window.data[k * c_count + c] - model);
        }
        double ss = 0.0;
        for (double r : residuals) ss += r * r;
        ChannelKs entry;
        entry.channel = static_cast<int>(c);
        entry.sigma_hat = std::sqrt(ss / static_cast<double>(residuals.size()));
        entry.ks = ks_statistic(std::move(residuals), entry.sigma_hat);
        report.push_back(entry);
    }
    return report;
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "M" || name == "m" || name == "decimation") return SweepAxis::kDecimation;
    if (name == "delta" || name == "downsample") return SweepAxis::kDownsample;
    if (name == "channels" || name == "channel_count") return SweepAxis::kChannelCount;
    throw ConfigError("unknown sweep axis '" + name
                      + "' (expected M, delta, or channel_count)");
}

namespace {

int integer_value(double v, const char* what) {
    const double r = std::round(v);
    if (!(v > 0.0) || std::abs(v - r) > 1e-9 || r > 1e9) {
        throw ConfigError(std::string("sweep: ") + what + " must be a positive integer, got "
                          + format_double(v));
    }
    return static_cast<int>(r);
}

double scenario_breath_hz(const synth::SynthScenario& scenario) {
    for (const synth::Segment& seg : scenario.segments) {
        if (!seg.persons.empty()) return seg.persons[0].freq_hz;
    }
    throw ConfigError("sweep scenario has no breathing person to score against");
}

std::vector<double> estimate_freqs(const pipeline::RunReport& report) {
    std::vector<double> fs;
    fs.reserve(report.estimates.size());
    for (const pipeline::Estimate& e : report.estimates) fs.push_back(e.params.freq_hz);
    return fs;
}

SweepPoint score(double value, const std::vector<double>& freqs, double true_hz) {
    if (freqs.empty()) {
        throw DataError("sweep: no estimates produced at value " + format_double(value)
                        + " (trace shorter than one estimation window?)");
    }
    const ErrorStats stats = error_stats(freqs, true_hz);
    return {value, stats.mean_abs_bpm, stats.failure_rate, stats.count};
}

// Config for one decimation-axis point: M swapped in, search band clamped to
// the new decimated Nyquist rate if M pushed past it.
PipelineConfig decimation_config(const PipelineConfig& base, int m) {
    PipelineConfig cfg = base;
    cfg.decimation = m;
    const double nyquist = cfg.fs_hz / (2.0 * m);
    if (cfg.f_max_hz > nyquist) {
        if (cfg.f_min_hz >= nyquist) {
            throw ConfigError("sweep: decimation " + std::to_string(m)
                              + " leaves no usable search band below "
                              + format_double(nyquist) + " Hz");
        }
        cfg.f_max_hz = nyquist;
    }
    return cfg;
}

// Config for one downsample-axis point: the radio now reports at fs/delta, so
// decimation, band top, mean window, and filter edges are re-derived for the
// reduced rate.
PipelineConfig downsample_config(const PipelineConfig& base, int delta) {
    PipelineConfig cfg = base;
    cfg.fs_hz = base.fs_hz / delta;
    const int m_fit = static_cast<int>(std::floor(cfg.fs_hz / (2.5 * base.f_max_hz)));
    cfg.decimation = std::clamp(m_fit, 1, base.decimation);
    const double top = std::min(base.f_max_hz, 0.9 * cfg.fs_hz / (2.0 * cfg.decimation));
    if (cfg.f_min_hz >= top) {
        throw ConfigError("sweep: downsampling by " + std::to_string(delta)
                          + " leaves no usable search band below " + format_double(top) + " Hz");
    }
    cfg.f_max_hz = top;
    cfg.mean_window = 0;  // re-derive from the reduced rate
    cfg.filter_stopband_hz = std::min(base.resolved_stopband_hz(), 0.45 * cfg.fs_hz);
    if (cfg.filter_stopband_hz < cfg.f_max_hz) cfg.filter_stopband_hz = cfg.f_max_hz;
    if (cfg.resolved_passband_hz() >= cfg.filter_stopband_hz) {
        cfg.filter_passband_hz = 0.5 * cfg.filter_stopband_hz;
    }
    return cfg;
}

void run_parallel(std::size_t count, const std::function<void(std::size_t)>& work) {
    const std::size_t workers =
        std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) work(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    work(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<SweepPoint> sweep_channel_count(const synth::SynthScenario& scenario,
                                            const RssTrace& trace,
                                            const std::vector<double>& values, double true_hz) {
    pipeline::RunOptions options;
    options.collect_decimated = true;
    const pipeline::RunReport report = pipeline::run_trace(trace, scenario.config, options);
    if (report.gate_flushes > 0) {
        log::warnf("channel sweep: %zu motion flushes; windows may straddle gaps",
                   report.gate_flushes);
    }
    const PipelineConfig& cfg = scenario.config;
    const double step_s = static_cast<double>(cfg.decimation) / cfg.fs_hz;
    const std::size_t stride =
        cfg.estimate_stride_s > 0.0
            ? std::max<std::size_t>(
                  1, static_cast<std::size_t>(std::lround(cfg.estimate_stride_s / step_s)))
            : 1;
    const std::vector<estimator::EstimationWindow> windows = estimator::sliding_windows(
        report.decimated, cfg.num_channels, step_s, report.window_length, stride);
    if (windows.empty()) {
        throw DataError("channel sweep: trace yields no complete estimation window");
    }
    const estimator::ProjectionTable table(estimator::FrequencyGrid::from_config(cfg),
                                           report.window_length, step_s);

    std::vector<int> keep_counts;
    keep_counts.reserve(values.size());
    for (double v : values) {
        const int k = integer_value(v, "channel count");
        if (k > cfg.num_channels) {
            throw ConfigError("sweep: channel count " + std::to_string(k) + " exceeds the "
                              + std::to_string(cfg.num_channels) + " trace channels");
        }
        keep_counts.push_back(k);
    }

    // freqs[value][window]
    std::vector<std::vector<double>> freqs(values.size());
    for (auto& f : freqs) f.resize(windows.size());
    run_parallel(windows.size(), [&](std::size_t w) {
        const estimator::EstimationWindow& full = windows[w];
        const BreathingParams base = table.estimate(full);
        const std::size_t c_all = static_cast<std::size_t>(full.num_channels);
        for (std::size_t vi = 0; vi < keep_counts.size(); ++vi) {
            const std::size_t k = static_cast<std::size_t>(keep_counts[vi]);
            if (k == c_all) {
                freqs[vi][w] = base.freq_hz;
                continue;
            }
            const std::vector<int> keep = rank_channels(base.amplitudes, keep_counts[vi]);
            estimator::EstimationWindow sub;
            sub.length = full.length;
            sub.num_channels = keep_counts[vi];
            sub.step_s = full.step_s;
            sub.data.resize(full.length * k);
            for (std::size_t n = 0; n < full.length; ++n) {
                for (std::size_t c = 0; c < k; ++c) {
                    sub.data[n * k + c] =
                        full.data[n * c_all + static_cast<std::size_t>(keep[c])];
                }
            }
            freqs[vi][w] = table.grid().at(estimator::peak_index(table.average_power(sub)));
        }
    });

    std::vector<SweepPoint> points;
    points.reserve(values.size());
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        points.push_back(score(values[vi], freqs[vi], true_hz));
    }
    return points;
}

}  // namespace

std::vector<SweepPoint> run_sweep(const synth::SynthScenario& scenario, SweepAxis axis,
                                  const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep needs at least one axis value");
    scenario.validate();
    const double true_hz = scenario_breath_hz(scenario);
    const synth::SynthResult base = synth::generate(scenario);

    if (axis == SweepAxis::kChannelCount) {
        return sweep_channel_count(scenario, base.trace, values, true_hz);
    }

    std::vector<SweepPoint> points(values.size());
    run_parallel(values.size(), [&](std::size_t i) {
        PipelineConfig cfg;
        const RssTrace* trace = &base.trace;
        RssTrace reduced;
        if (axis == SweepAxis::kDecimation) {
            cfg = decimation_config(scenario.config, integer_value(values[i], "decimation"));
        } else {
            const int delta = integer_value(values[i], "downsample factor");
            cfg = downsample_config(scenario.config, delta);
            if (delta > 1) {
                reduced = synth::downsample_trace(base.trace, delta);
                trace = &reduced;
            }
        }
        const pipeline::RunReport report = pipeline::run_trace(*trace, cfg);
        points[i] = score(values[i], estimate_freqs(report), true_hz);
    });
    return points;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << "value,mean_error_bpm,failure_rate\n";
    for (const SweepPoint& p : points) {
        out << format_double(p.value) << ',' << format_double(p.mean_error_bpm) << ','
            << format_double(p.failure_rate) << '\n';
    }
    if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace rssbreath::analysis
