#include "rssbreath/filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "rssbreath/log.hpp"

namespace rssbreath::filter {

namespace {

constexpr std::size_t kMaxTaps = 4096;
constexpr double kPi = std::numbers::pi;

// Zeroth-order modified Bessel function via its power series; converges fast
// for the argument range Kaiser betas produce.
double bessel_i0(double x) {
    double sum = 1.0;
    double term = 1.0;
    const double half_sq = 0.25 * x * x;
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (static_cast<double>(k) * k);
        sum += term;
        if (term < sum * 1e-16) break;
    }
    return sum;
}

double kaiser_beta(double atten_db) {
    if (atten_db > 50.0) return 0.1102 * (atten_db - 8.7);
    if (atten_db >= 21.0) {
        return 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0);
    }
    return 0.0;
}

// Windowed-sinc lowpass with the given cutoff; odd length, unit DC gain.
std::vector<double> kaiser_lowpass(std::size_t length, double beta, double cutoff_hz,
                                   double fs_hz) {
    std::vector<double> taps(length);
    const double mid = 0.5 * static_cast<double>(length - 1);
    const double scale = 2.0 * cutoff_hz / fs_hz;
    const double denom = bessel_i0(beta);
    for (std::size_t n = 0; n < length; ++n) {
        const double t = static_cast<double>(n) - mid;
        double sinc = (t == 0.0) ? 1.0 : std::sin(kPi * scale * t) / (kPi * scale * t);
        const double r = t / mid;  // mid > 0 because length >= 3
        const double window = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
        taps[n] = scale * sinc * window;
    }
    double sum = 0.0;
    for (double h : taps) sum += h;
    for (double& h : taps) h /= sum;
    return taps;
}

void check_spec(const FirSpec& spec) {
    auto fail = [](const std::string& msg) { throw ConfigError("filter design: " + msg); };
    if (!(spec.fs_hz > 0.0)) fail("fs_hz must be positive");
    if (!(spec.passband_hz > 0.0)) fail("passband edge must be positive");
    if (!(spec.passband_hz < spec.stopband_hz)) fail("passband edge must be below stopband edge");
    if (!(spec.stopband_hz < spec.fs_hz / 2.0)) fail("stopband edge must be below fs/2");
    if (!(spec.ripple_db > 0.0)) fail("ripple bound must be positive");
    if (!(spec.atten_db > 0.0)) fail("attenuation bound must be positive");
}

}  // namespace

double tap_response(const std::vector<double>& taps, double f_hz, double fs_hz) {
    const double w = 2.0 * kPi * f_hz / fs_hz;
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < taps.size(); ++n) {
        re += taps[n] * std::cos(w * static_cast<double>(n));
        im -= taps[n] * std::sin(w * static_cast<double>(n));
    }
    return std::hypot(re, im);
}

MaskReport measure_mask(const std::vector<double>& taps, const FirSpec& spec,
                        std::size_t grid_points) {
    MaskReport report;
    report.worst_stopband_db = -1e9;
    const double nyquist = spec.fs_hz / 2.0;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double f = nyquist * static_cast<double>(i) / static_cast<double>(grid_points - 1);
        if (f > spec.passband_hz && f < spec.stopband_hz) continue;
        const double mag = tap_response(taps, f, spec.fs_hz);
        const double db = 20.0 * std::log10(std::max(mag, 1e-300));
        if (f <= spec.passband_hz) {
            report.worst_passband_db = std::max(report.worst_passband_db, std::abs(db));
        } else {
            report.worst_stopband_db = std::max(report.worst_stopband_db, db);
        }
    }
    return report;
}

std::vector<double> design_lowpass(const FirSpec& spec) {
    check_spec(spec);

    // The passband bound in linear units is tighter than the stopband bound
    // for the default mask (0.05 dB vs 40 dB), and a Kaiser design has equal
    // ripple on both sides, so design for the smaller of the two.
    const double delta_pass = 1.0 - std::pow(10.0, -spec.ripple_db / 20.0);
    const double delta_stop = std::pow(10.0, -spec.atten_db / 20.0);
    double design_atten = -20.0 * std::log10(std::min(delta_pass, delta_stop)) + 1.0;

    // Start the transition well above the passband edge: the search band
    // between the two mask edges should sit in the flat region, not on the
    // rolloff. The mask itself only constrains [0, passband] and
    // [stopband, fs/2], so this is free margin.
    const double edge_lo = std::max(spec.passband_hz, 0.45 * spec.stopband_hz);
    const double cutoff = 0.5 * (edge_lo + spec.stopband_hz);
    const double width_hz = spec.stopband_hz - edge_lo;

    for (int attempt = 0; attempt < 24; ++attempt) {
        const double beta = kaiser_beta(design_atten);
        const double delta_w = 2.0 * kPi * width_hz / spec.fs_hz;
        std::size_t length =
            static_cast<std::size_t>(std::ceil((design_atten - 7.95) / (2.285 * delta_w))) + 1;
        if (length % 2 == 0) ++length;  // odd length: integer group delay
        length = std::max<std::size_t>(length, 3);
        if (length > kMaxTaps) break;

        std::vector<double> taps = kaiser_lowpass(length, beta, cutoff, spec.fs_hz);
        if (measure_mask(taps, spec).passes(spec)) {
            log::debugf("filter: %zu taps, design attenuation %.1f dB", length, design_atten);
            return taps;
        }
        design_atten += 1.5;  // tighten and retry
    }
    throw ConfigError("filter design: mask not reachable within " + std::to_string(kMaxTaps)
                      + " taps (fs=" + format_double(spec.fs_hz) + " Hz, edges "
                      + format_double(spec.passband_hz) + "/" + format_double(spec.stopband_hz)
                      + " Hz)");
}

FirDecimator::FirDecimator(std::vector<double> taps, int factor, int num_channels, double fs_hz)
    : taps_(std::move(taps)), factor_(factor), channels_(num_channels), fs_hz_(fs_hz) {
    if (taps_.empty()) throw ConfigError("decimator: empty tap vector");
    if (factor_ < 1) throw ConfigError("decimator: factor must be >= 1");
    if (channels_ < 1) throw ConfigError("decimator: need at least one channel");
    if (!(fs_hz_ > 0.0)) throw ConfigError("decimator: fs must be positive");
    delay_.assign(taps_.size() * static_cast<std::size_t>(channels_), 0.0);
}

void FirDecimator::reset() {
    std::fill(delay_.begin(), delay_.end(), 0.0);
    pos_ = 0;
    pushed_ = 0;
}

std::optional<ChannelVector> FirDecimator::push(const ChannelVector& in) {
    if (static_cast<int>(in.values.size()) != channels_) {
        throw ConfigError("decimator: sample has " + std::to_string(in.values.size())
                          + " channels, expected " + std::to_string(channels_));
    }
    const std::size_t T = taps_.size();
    double* slot = delay_.data() + pos_ * static_cast<std::size_t>(channels_);
    std::copy(in.values.begin(), in.values.end(), slot);

    const std::uint64_t index = pushed_++;
    const std::size_t newest = pos_;
    pos_ = (pos_ + 1) % T;

    if (index % static_cast<std::uint64_t>(factor_) != 0) return std::nullopt;

    ChannelVector out;
    out.kind = SampleKind::kDecimated;
    out.values.assign(channels_, 0.0);
    // y[k] = sum_t h[t] * x[k - t]; the ring holds the last T inputs with the
    // newest at `newest`, missing history reads as the zero initial state.
    std::size_t row = newest;
    for (std::size_t t = 0; t < T; ++t) {
        const double h = taps_[t];
        const double* x = delay_.data() + row * static_cast<std::size_t>(channels_);
        for (int c = 0; c < channels_; ++c) out.values[c] += h * x[c];
        row = (row == 0) ? T - 1 : row - 1;
    }
    return out;
}

void write_taps(const std::vector<double>& taps, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write taps file: " + path);
    for (double h : taps) out << format_double(h) << '\n';
    if (!out.good()) throw DataError("write failed: " + path);
}

}  // namespace rssbreath::filter
