#pragma once

// Kaiser-window FIR lowpass design and a streaming decimating filter. The
// decimator keeps input samples whose index is 0 mod M, so an input stream
// of K samples yields ceil(K/M) outputs and output n corresponds to input
// index n*M.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rssbreath/core.hpp"

namespace rssbreath::filter {

struct FirSpec {
    double fs_hz = 62.5;
    double passband_hz = 0.1;  // response within +/-ripple_db of unity below this
    double stopband_hz = 1.0;  // response at least atten_db down above this
    double ripple_db = 0.05;
    double atten_db = 40.0;
};

// Linear-phase lowpass taps meeting `spec`, verified against the mask on a
// dense response grid before returning. The transition band is started well
// above the passband edge so the whole breathing search band sits in the
// flat region, not on the rolloff. Taps are normalized to unit DC gain.
// Throws ConfigError for inconsistent edges or when no design under the
// 4096-tap cap meets the mask.
std::vector<double> design_lowpass(const FirSpec& spec);

// |H(f)| for a tap vector at a single frequency.
double tap_response(const std::vector<double>& taps, double f_hz, double fs_hz);

// Largest deviation from the mask, measured on `grid_points` frequencies:
// first = worst passband |gain| deviation in dB, second = worst stopband
// gain in dB (more negative is better).
struct MaskReport {
    double worst_passband_db = 0.0;
    double worst_stopband_db = 0.0;
    bool passes(const FirSpec& spec) const {
        return worst_passband_db <= spec.ripple_db && worst_stopband_db <= -spec.atten_db;
    }
};
MaskReport measure_mask(const std::vector<double>& taps, const FirSpec& spec,
                        std::size_t grid_points = 10000);

class FirDecimator {
  public:
    FirDecimator(std::vector<double> taps, int factor, int num_channels, double fs_hz);

    // Feeds one multi-channel sample; returns a filtered sample on kept
    // input indices (0, M, 2M, ...), counting from construction/reset.
    std::optional<ChannelVector> push(const ChannelVector& in);
    void reset();

    const std::vector<double>& taps() const { return taps_; }
    int factor() const { return factor_; }
    double input_fs_hz() const { return fs_hz_; }
    double output_fs_hz() const { return fs_hz_ / factor_; }
    // Delay of the linear-phase filter; subtract from output timestamps.
    double group_delay_s() const {
        return static_cast<double>(taps_.size() - 1) / (2.0 * fs_hz_);
    }

  private:
    std::vector<double> taps_;
    int factor_;
    int channels_;
    double fs_hz_;
    std::vector<double> delay_;  // taps x channels ring, newest row at pos_
    std::size_t pos_ = 0;
    std::uint64_t pushed_ = 0;
};

// One tap per line.
void write_taps(const std::vector<double>& taps, const std::string& path);

}  // namespace rssbreath::filter
