#pragma once

// Maximum-likelihood sinusoid fit over a window of decimated samples. The
// frequency estimate maximizes the channel-averaged periodogram on a fixed
// search grid; per-channel amplitude and phase then come from the complex
// projection at the winning frequency. Phases are referenced to the window
// start.

#include <cstddef>
#include <vector>

#include "rssbreath/core.hpp"

namespace rssbreath::estimator {

struct FrequencyGrid {
    double f_min_hz = 0.1;
    double f_max_hz = 1.0;
    double step_hz = 0.0005;

    std::size_t size() const;
    double at(std::size_t i) const { return f_min_hz + step_hz * static_cast<double>(i); }
    void validate() const;
    static FrequencyGrid from_config(const PipelineConfig& config);
};

// N consecutive decimated samples, row-major [sample][channel], spaced
// step_s seconds apart.
struct EstimationWindow {
    std::size_t length = 0;
    int num_channels = 0;
    double step_s = 0.0;
    std::vector<double> data;

    double at(std::size_t n, int c) const {
        return data[n * static_cast<std::size_t>(num_channels) + static_cast<std::size_t>(c)];
    }
    void validate() const;
};

// Trig tables for projecting windows of a fixed length onto a fixed grid.
// Building the table costs one sin/cos per (frequency, sample) pair; every
// estimate after that is pure multiply-accumulate.
class ProjectionTable {
  public:
    ProjectionTable(const FrequencyGrid& grid, std::size_t window_len, double step_s);

    bool matches(const FrequencyGrid& grid, std::size_t window_len, double step_s) const;
    const FrequencyGrid& grid() const { return grid_; }

    // Channel-averaged power |sum_n r_c(n) e^{-j 2 pi f t_n}|^2 per grid point.
    std::vector<double> average_power(const EstimationWindow& window) const;
    BreathingParams estimate(const EstimationWindow& window) const;

  private:
    FrequencyGrid grid_;
    std::size_t len_;
    double step_s_;
    std::vector<double> cos_;  // grid.size() rows of len_ values
    std::vector<double> sin_;
};

// One-shot conveniences (build a table internally).
std::vector<double> periodogram(const EstimationWindow& window, const FrequencyGrid& grid);
BreathingParams estimate(const EstimationWindow& window, const FrequencyGrid& grid);

// Index of the largest value; ties resolve to the lowest index.
std::size_t peak_index(const std::vector<double>& power);
double estimate_frequency(const std::vector<double>& power, const FrequencyGrid& grid);

// Per-channel projection at an arbitrary frequency.
std::vector<double> estimate_amplitudes(const EstimationWindow& window, double f_hz);
std::vector<double> estimate_phases(const EstimationWindow& window, double f_hz);

// Gaussian log-likelihood of the window under `params`, up to the constant
// term: -(1/2) sum_c sum_n (r_c(n) - g_c(n))^2.
double log_likelihood(const EstimationWindow& window, const BreathingParams& params);

// Sliding windows over a row-major decimated stream; `stride` is in samples.
std::vector<EstimationWindow> sliding_windows(const std::vector<double>& stream,
                                              int num_channels, double step_s,
                                              std::size_t window_len, std::size_t stride);

}  // namespace rssbreath::estimator
