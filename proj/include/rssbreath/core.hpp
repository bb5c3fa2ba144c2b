#pragma once

// Shared types for the respiration-monitoring chain: pipeline configuration,
// multi-channel RSS traces and their CSV format, and the parameter bundle a
// single estimate produces. File formats are line-oriented and written with
// shortest round-trip float formatting so write(read(file)) is byte-identical
// for canonical files.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rssbreath/errors.hpp"

namespace rssbreath {

// Where a sample sits in the processing chain. Carried for dimension/role
// checks at module boundaries.
enum class SampleKind { kRaw, kMeanRemoved, kDecimated };

// One RSS sample across all radio channels, in dB.
struct ChannelVector {
    std::vector<double> values;
    SampleKind kind = SampleKind::kRaw;

    std::size_t size() const { return values.size(); }
};

// Detector / ground-truth motion label. kStill: breathing-only (S1);
// kMotion: gross body motion (S2).
enum class MotionState : std::uint8_t { kStill = 0, kMotion = 1 };

const char* to_string(MotionState state);

// Knobs for the full chain. Defaults are the reference operating point:
// 16 channels cycled at 62.5 Hz per channel, a 0.1-1.0 Hz search band,
// a ~1 s mean-removal window, and 10x decimation ahead of the estimator.
struct PipelineConfig {
    double fs_hz = 62.5;       // per-channel sampling rate
    int num_channels = 16;
    double f_min_hz = 0.1;     // search band, low edge
    double f_max_hz = 1.0;     // search band, high edge
    int mean_window = 0;       // samples; 0 = derive round(fs_hz / f_max_hz)
    int decimation = 10;       // keep every M-th filtered sample
    double est_window_s = 30.0;
    double freq_grid_hz = 0.0005;    // search grid spacing
    double estimate_stride_s = 0.0;  // 0 = estimate at every decimated sample

    // Anti-alias lowpass mask. Edges of 0 mean "use the search band edges".
    double filter_passband_hz = 0.0;
    double filter_stopband_hz = 0.0;
    double filter_ripple_db = 0.05;  // max passband deviation from unity
    double filter_atten_db = 40.0;   // min stopband attenuation

    // Two-state motion detector: transition probabilities (row = from-state),
    // initial state weights, and per-state observation std in dB.
    double p11 = 0.90, p12 = 0.10;
    double p21 = 0.90, p22 = 0.10;
    double pi1 = 1.0, pi2 = 0.0;
    double sigma1 = 0.197;
    double sigma2 = 2.385;

    int resolved_mean_window() const;     // mean_window, or round(fs/f_max)
    double resolved_passband_hz() const;  // filter_passband_hz, or f_min_hz
    double resolved_stopband_hz() const;  // filter_stopband_hz, or f_max_hz
    int window_length() const;            // round(est_window_s * fs / M)
    double decimated_fs_hz() const { return fs_hz / decimation; }

    // Throws ConfigError on any inconsistent setting (band edges, Nyquist
    // after decimation, detector rows not summing to 1, ...).
    void validate() const;
};

// Key=value config file ('#' comments, blank lines allowed; unknown keys are
// rejected). keys_seen, when non-null, receives the keys present in the file
// so callers can distinguish "explicit" from "defaulted" values.
PipelineConfig load_config(const std::string& path,
                           std::vector<std::string>* keys_seen = nullptr);
PipelineConfig parse_config(std::istream& in, const std::string& origin,
                            std::vector<std::string>* keys_seen = nullptr);
void save_config(const PipelineConfig& config, const std::string& path);
void write_config(const PipelineConfig& config, std::ostream& out);

// Applies one config key to `config`; returns false when the key is unknown.
// Shared by the config and scenario file parsers.
bool apply_config_key(PipelineConfig& config, const std::string& key,
                      const std::string& value, const std::string& origin, int line);

// A recorded RSS trace: row-major [cycle][channel] dB values plus the
// sampling metadata carried in the file header. quant_step_db = 0 means the
// values are unquantized; otherwise every value is an integer multiple of
// the step.
struct RssTrace {
    double fs_hz = 62.5;
    double quant_step_db = 0.0;
    int num_channels = 0;
    std::vector<double> samples;

    std::size_t rows() const {
        return num_channels > 0 ? samples.size() / static_cast<std::size_t>(num_channels) : 0;
    }
    double* row(std::size_t k) { return samples.data() + k * static_cast<std::size_t>(num_channels); }
    const double* row(std::size_t k) const {
        return samples.data() + k * static_cast<std::size_t>(num_channels);
    }
    double at(std::size_t k, int c) const { return row(k)[c]; }
};

// Trace CSV: three header lines `#fs_hz=`, `#channels=`, `#quant_step_db=`
// followed by rows `cycle,rss_1,...,rss_C` with cycle counting from 0.
RssTrace read_trace(const std::string& path);
RssTrace read_trace(std::istream& in, const std::string& origin);
void write_trace(const RssTrace& trace, const std::string& path);
void write_trace(const RssTrace& trace, std::ostream& out);

// Result of one maximum-likelihood fit over an estimation window.
struct BreathingParams {
    double freq_hz = 0.0;
    std::vector<double> amplitudes;  // per channel, dB
    std::vector<double> phases;      // per channel, radians at window start
    std::vector<double> psd;         // channel-averaged periodogram over the grid
};

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Nearest integer with exact halves rounded to the even neighbor.
// Independent of the current floating-point rounding mode.
double round_half_even(double value);

namespace kv {

// One logical line of a key=value file, with optional [section] grouping.
struct Item {
    std::string section;  // "" before any section header
    std::string key;      // empty for a bare section marker
    std::string value;
    int line = 0;
};

// Parses '#'-comment / blank / "[section]" / "key=value" lines. Items appear
// in file order; a section header yields one Item with an empty key.
std::vector<Item> parse(std::istream& in, const std::string& origin);

double to_double(const Item& item, const std::string& origin);
long long to_int(const Item& item, const std::string& origin);

}  // namespace kv

}  // namespace rssbreath
