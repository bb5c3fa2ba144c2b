#pragma once

// Evaluation helpers: bpm error metrics against known ground truth, channel
// ranking by estimated amplitude, multi-peak detection on a spectrum, circular
// phase-dispersion, Kolmogorov-Smirnov goodness of fit, and the parameter
// sweep harness behind the `sweep` subcommand.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "rssbreath/core.hpp"
#include "rssbreath/estimator.hpp"
#include "rssbreath/synth.hpp"

namespace rssbreath::analysis {

// Error of a batch of frequency estimates against a single true rate, in
// breaths per minute. The signed mean is the headline number; absolute mean
// and std are diagnostics, and failure_rate is the share of estimates whose
// absolute error exceeds the threshold passed to error_stats.
struct ErrorStats {
    double mean_signed_bpm = 0.0;
    double mean_abs_bpm = 0.0;
    double std_bpm = 0.0;
    std::size_t count = 0;
    double failure_rate = 0.0;
};

ErrorStats error_stats(const std::vector<double>& estimates_hz, double true_hz,
                       double failure_threshold_bpm = 1.0);

// Signed mean error in bpm, 60 * mean(f_hat - f). Throws ConfigError when the
// estimate list is empty.
double mean_error_bpm(const std::vector<double>& estimates_hz, double true_hz);

// Indices of the k largest amplitudes, descending, ties broken toward the
// lower channel index. Throws ConfigError unless 1 <= k <= C.
std::vector<int> rank_channels(const std::vector<double>& amplitudes, int k);

struct Peak {
    double freq_hz = 0.0;
    double power = 0.0;
    std::size_t index = 0;  // position on the grid
};

// Local maxima of the spectrum with power >= rel_threshold * max(psd),
// thinned so surviving peaks sit at least min_separation_hz apart (the
// stronger of two close peaks wins). Sorted by power, descending. A
// non-positive spectrum yields no peaks.
std::vector<Peak> detect_peaks(const std::vector<double>& psd, const estimator::FrequencyGrid& grid,
                               double min_separation_hz = 0.03, double rel_threshold = 0.25);

// Amplitude-weighted circular concentration of doubled phase angles,
//   R2 = |sum_c w_c e^{j 2 phi_c}| / sum_c w_c.
// Doubling folds an antipodal (phi, phi+pi) split into one mode, so a single
// breather scores near 1 even though raw phases land in two clusters; a
// second same-frequency breather spreads the doubled angles and pulls R2
// down. Channels with zero weight drop out; if every weight is zero (or any
// is negative) the statistic is undefined and ConfigError is thrown.
double phase_dispersion(const std::vector<double>& phases, const std::vector<double>& weights);

struct KsResult {
    double d = 0.0;         // sup distance between empirical and reference CDF
    double critical = 0.0;  // 95% asymptotic critical value, 1.358 / sqrt(n)
    std::size_t n = 0;
    bool accepted = false;  // d <= critical
};

// One-sample Kolmogorov-Smirnov test of `samples` against a zero-mean
// Gaussian with the given sigma. Requires at least 50 samples.
KsResult ks_statistic(std::vector<double> samples, double sigma);

struct ChannelKs {
    int channel = 0;
    double sigma_hat = 0.0;  // RMS of the channel's residuals
    KsResult ks;
};

// Per-channel KS test of the model residuals r_c(n) - g_c(n) against a
// zero-mean Gaussian at the residual RMS. `stride` subsamples the residual
// sequence before testing; residuals of neighbouring decimated samples are
// correlated by the anti-alias filter, and the KS test assumes independent
// draws, so callers should pass a stride that clears the filter memory
// (ceil of output rate / filter stopband is a reasonable choice).
std::vector<ChannelKs> residual_gaussianity(const estimator::EstimationWindow& window,
                                            const BreathingParams& params, std::size_t stride = 1);

// Parameter sweeps over a synth scenario. Each axis regenerates or reprocesses
// the scenario trace and reports, per axis value, the mean absolute estimate
// error in bpm and the share of estimates off by more than 1 bpm.
//
//   kDecimation   value = decimation factor M. The search band is clamped to
//                 the decimated Nyquist rate when M pushes past it.
//   kDownsample   value = keep-every-delta subsampling of the raw trace,
//                 emulating a slower radio. Decimation, search band, mean
//                 window, and filter edges are re-derived for the reduced
//                 rate.
//   kChannelCount value = number of channels kept. Windows are estimated once
//                 with all channels, then re-estimated on the top-`value`
//                 channels by ranked amplitude. Assumes a motion-free trace.
enum class SweepAxis { kDecimation, kDownsample, kChannelCount };

// Accepts "M"/"decimation", "delta"/"downsample", "channels"/"channel_count".
SweepAxis parse_axis(const std::string& name);

struct SweepPoint {
    double value = 0.0;
    double mean_error_bpm = 0.0;  // mean absolute error
    double failure_rate = 0.0;
    std::size_t estimates = 0;
};

std::vector<SweepPoint> run_sweep(const synth::SynthScenario& scenario, SweepAxis axis,
                                  const std::vector<double>& values);

// CSV with header `value,mean_error_bpm,failure_rate`.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points);

}  // namespace rssbreath::analysis
