#include "rssbreath/estimator.hpp"

#include <cmath>
#include <numbers>

namespace rssbreath::estimator {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Transpose a window into channel-contiguous rows so the per-frequency dot
// products stream linearly through memory.
std::vector<double> by_channel(const EstimationWindow& w) {
    std::vector<double> out(w.data.size());
    const std::size_t C = static_cast<std::size_t>(w.num_channels);
    for (std::size_t n = 0; n < w.length; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            out[c * w.length + n] = w.data[n * C + c];
        }
    }
    return out;
}

}  // namespace

std::size_t FrequencyGrid::size() const {
    return static_cast<std::size_t>(std::floor((f_max_hz - f_min_hz) / step_hz + 1e-9)) + 1;
}

void FrequencyGrid::validate() const {
    if (!(f_min_hz > 0.0)) throw ConfigError("frequency grid: f_min_hz must be positive");
    if (!(f_min_hz < f_max_hz)) throw ConfigError("frequency grid: f_min_hz must be below f_max_hz");
    if (!(step_hz > 0.0)) throw ConfigError("frequency grid: step_hz must be positive");
    if (step_hz > f_max_hz - f_min_hz) {
        throw ConfigError("frequency grid: step_hz wider than the band");
    }
}

FrequencyGrid FrequencyGrid::from_config(const PipelineConfig& config) {
    FrequencyGrid grid{config.f_min_hz, config.f_max_hz, config.freq_grid_hz};
    grid.validate();
    return grid;
}

void EstimationWindow::validate() const {
    if (length == 0) throw DataError("estimation window is empty");
    if (num_channels < 1) throw DataError("estimation window has no channels");
    if (!(step_s > 0.0)) throw DataError("estimation window needs a positive sample step");
    if (data.size() != length * static_cast<std::size_t>(num_channels)) {
        throw DataError("estimation window data size does not match length x channels");
    }
}

ProjectionTable::ProjectionTable(const FrequencyGrid& grid, std::size_t window_len, double step_s)
    : grid_(grid), len_(window_len), step_s_(step_s) {
    grid_.validate();
    if (window_len == 0) throw ConfigError("projection table: window length must be positive");
    if (!(step_s > 0.0)) throw ConfigError("projection table: sample step must be positive");
    if (grid.f_max_hz > 0.5 / step_s + 1e-12) {
        throw ConfigError("projection table: grid top " + format_double(grid.f_max_hz)
                          + " Hz exceeds the Nyquist rate " + format_double(0.5 / step_s)
                          + " Hz of the decimated stream");
    }
    const std::size_t F = grid_.size();
    cos_.resize(F * len_);
    sin_.resize(F * len_);
    for (std::size_t i = 0; i < F; ++i) {
        const double w = kTwoPi * grid_.at(i) * step_s_;
        double* crow = cos_.data() + i * len_;
        double* srow = sin_.data() + i * len_;
        for (std::size_t n = 0; n < len_; ++n) {
            crow[n] = std::cos(w * static_cast<double>(n));
            srow[n] = std::sin(w * static_cast<double>(n));
        }
    }
}

bool ProjectionTable::matches(const FrequencyGrid& grid, std::size_t window_len,
                              double step_s) const {
    return grid.f_min_hz == grid_.f_min_hz && grid.f_max_hz == grid_.f_max_hz
           && grid.step_hz == grid_.step_hz && window_len == len_ && step_s == step_s_;
}

std::vector<double> ProjectionTable::average_power(const EstimationWindow& window) const {
    window.validate();
    if (window.length != len_ || window.step_s != step_s_) {
        throw DataError("estimation window does not match the projection table layout");
    }
    const std::size_t C = static_cast<std::size_t>(window.num_channels);
    const std::vector<double> channels = by_channel(window);
    const std::size_t F = grid_.size();
    std::vector<double> power(F, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        const double* r = channels.data() + c * len_;
        for (std::size_t i = 0; i < F; ++i) {
            const double* crow = cos_.data() + i * len_;
            const double* srow = sin_.data() + i * len_;
            double re = 0.0, im = 0.0;
            for (std::size_t n = 0; n < len_; ++n) {
                re += r[n] * crow[n];
                im += r[n] * srow[n];
            }
            power[i] += re * re + im * im;
        }
    }
    const double inv_c = 1.0 / static_cast<double>(C);
    for (double& p : power) p *= inv_c;
    return power;
}

BreathingParams ProjectionTable::estimate(const EstimationWindow& window) const {
    BreathingParams params;
    params.psd = average_power(window);
    params.freq_hz = grid_.at(peak_index(params.psd));
    params.amplitudes = estimate_amplitudes(window, params.freq_hz);
    params.phases = estimate_phases(window, params.freq_hz);
    return params;
}

std::vector<double> periodogram(const EstimationWindow& window, const FrequencyGrid& grid) {
    window.validate();
    return ProjectionTable(grid, window.length, window.step_s).average_power(window);
}

BreathingParams estimate(const EstimationWindow& window, const FrequencyGrid& grid) {
    window.validate();
    return ProjectionTable(grid, window.length, window.step_s).estimate(window);
}

std::size_t peak_index(const std::vector<double>& power) {
    if (power.empty()) throw DataError("cannot take the peak of an empty spectrum");
    std::size_t best = 0;
    for (std::size_t i = 1; i < power.size(); ++i) {
        if (power[i] > power[best]) best = i;
    }
    return best;
}

double estimate_frequency(const std::vector<double>& power, const FrequencyGrid& grid) {
    if (power.size() != grid.size()) {
        throw DataError("spectrum length does not match the frequency grid");
    }
    return grid.at(peak_index(power));
}

namespace {

// Complex projection sum_n r_c(n) e^{-j w n} for every channel.
void project(const EstimationWindow& w, double f_hz, std::vector<double>* re,
             std::vector<double>* im) {
    w.validate();
    const std::size_t C = static_cast<std::size_t>(w.num_channels);
    re->assign(C, 0.0);
    im->assign(C, 0.0);
    const double omega = kTwoPi * f_hz * w.step_s;
    for (std::size_t n = 0; n < w.length; ++n) {
        const double cn = std::cos(omega * static_cast<double>(n));
        const double sn = std::sin(omega * static_cast<double>(n));
        const double* row = w.data.data() + n * C;
        for (std::size_t c = 0; c < C; ++c) {
            (*re)[c] += row[c] * cn;
            (*im)[c] += row[c] * sn;
        }
    }
}

}  // namespace

std::vector<double> estimate_amplitudes(const EstimationWindow& window, double f_hz) {
    std::vector<double> re, im;
    project(window, f_hz, &re, &im);
    std::vector<double> amps(re.size());
    const double scale = 2.0 / static_cast<double>(window.length);
    for (std::size_t c = 0; c < amps.size(); ++c) {
        amps[c] = scale * std::hypot(re[c], im[c]);
    }
    return amps;
}

std::vector<double> estimate_phases(const EstimationWindow& window, double f_hz) {
    std::vector<double> re, im;
    project(window, f_hz, &re, &im);
    std::vector<double> phases(re.size());
    for (std::size_t c = 0; c < phases.size(); ++c) {
        phases[c] = std::atan2(-im[c], re[c]);
    }
    return phases;
}

double log_likelihood(const EstimationWindow& window, const BreathingParams& params) {
    window.validate();
    const std::size_t C = static_cast<std::size_t>(window.num_channels);
    if (params.amplitudes.size() != C || params.phases.size() != C) {
        throw DataError("parameter bundle does not cover every window channel");
    }
    const double omega = kTwoPi * params.freq_hz * window.step_s;
    double sum_sq = 0.0;
    for (std::size_t n = 0; n < window.length; ++n) {
        const double* row = window.data.data() + n * C;
        for (std::size_t c = 0; c < C; ++c) {
            const double g = params.amplitudes[c]
                             * std::cos(omega * static_cast<double>(n) + params.phases[c]);
            const double d = row[c] - g;
            sum_sq += d * d;
        }
    }
    return -0.5 * sum_sq;
}

std::vector<EstimationWindow> sliding_windows(const std::vector<double>& stream, int num_channels,
                                              double step_s, std::size_t window_len,
                                              std::size_t stride) {
    if (num_channels < 1) throw DataError("sliding windows: need at least one channel");
    if (stride == 0) throw ConfigError("sliding windows: stride must be positive");
    const std::size_t C = static_cast<std::size_t>(num_channels);
    if (stream.size() % C != 0) throw DataError("sliding windows: stream is not whole rows");
    const std::size_t rows = stream.size() / C;
    std::vector<EstimationWindow> out;
    if (rows < window_len) return out;
    for (std::size_t start = 0; start + window_len <= rows; start += stride) {
        EstimationWindow w;
        w.length = window_len;
        w.num_channels = num_channels;
        w.step_s = step_s;
        w.data.assign(stream.begin() + static_cast<std::ptrdiff_t>(start * C),
                      stream.begin() + static_cast<std::ptrdiff_t>((start + window_len) * C));
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace rssbreath::estimator
