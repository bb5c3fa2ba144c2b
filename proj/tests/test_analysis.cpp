#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "rssbreath/analysis.hpp"
#include "rssbreath/pipeline.hpp"
#include "rssbreath/synth.hpp"

using namespace rssbreath;
using namespace rssbreath::analysis;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Small grid for hand-built spectra: points 0.1, 0.105, ..., covering size()
// entries 0.005 Hz apart.
estimator::FrequencyGrid tiny_grid(std::size_t points) {
    estimator::FrequencyGrid grid;
    grid.f_min_hz = 0.1;
    grid.step_hz = 0.005;
    grid.f_max_hz = 0.1 + grid.step_hz * static_cast<double>(points - 1);
    return grid;
}

double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gaussian_quantile(double p) {
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gaussian_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Still 70 s scenario at the default radio settings with a 0.25 Hz breather.
// Phases alternate by half a turn so the channel-mean observation the motion
// gate watches stays flat, and quantization is off for the same reason; the
// sweep tests below rely on an uninterrupted estimate cadence.
synth::SynthScenario still_scenario(int channels, std::vector<double> amps) {
    synth::SynthScenario scenario;
    scenario.config.num_channels = channels;
    scenario.config.estimate_stride_s = 1.0;
    scenario.quant_step_db = 0.0;
    scenario.seed = 11;
    synth::PersonSignal person;
    person.freq_hz = 0.25;
    person.amplitudes_db = std::move(amps);
    for (int c = 0; c < channels; ++c) {
        person.phases_rad.push_back(0.4 + (c % 2 ? std::numbers::pi : 0.0));
    }
    synth::Segment segment;
    segment.duration_s = 70.0;
    segment.noise_sigma_db = 0.197;
    segment.persons.push_back(person);
    scenario.segments.push_back(segment);
    return scenario;
}

}  // namespace

TEST_CASE("error stats reduce hand-computed batches") {
    const double f = 0.25;
    const ErrorStats zero = error_stats({f, f, f}, f);
    CHECK_EQ(zero.mean_signed_bpm, 0.0);
    CHECK_EQ(zero.mean_abs_bpm, 0.0);
    CHECK_EQ(zero.std_bpm, 0.0);
    CHECK_EQ(zero.failure_rate, 0.0);
    CHECK_EQ(zero.count, 3);

    // Signed errors 0, +1.5, -0.5 bpm; only the +1.5 breaches the 1 bpm bar.
    const ErrorStats mixed = error_stats({f, f + 1.5 / 60.0, f - 0.5 / 60.0}, f);
    CHECK_EQ(mixed.mean_signed_bpm, doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_EQ(mixed.mean_abs_bpm, doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK_EQ(mixed.std_bpm, doctest::Approx(std::sqrt(13.0 / 12.0)).epsilon(1e-12));
    CHECK_EQ(mixed.failure_rate, doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // Exactly-at-threshold errors do not count as failures.
    CHECK_EQ(error_stats({f + 1.0 / 60.0}, f).failure_rate, 0.0);
    CHECK_EQ(error_stats({f + 1.0 / 60.0}, f, 0.5).failure_rate, 1.0);

    CHECK_EQ(mean_error_bpm({f + 0.01, f + 0.01}, f), doctest::Approx(0.6).epsilon(1e-12));
    CHECK_THROWS_AS(error_stats({}, f), ConfigError);
}

TEST_CASE("shifting every estimate shifts the signed mean accordingly") {
    std::vector<double> base{0.2, 0.23, 0.19, 0.31};
    const double before = mean_error_bpm(base, 0.25);
    for (double& v : base) v += 0.007;
    CHECK_EQ(mean_error_bpm(base, 0.25), doctest::Approx(before + 60.0 * 0.007).epsilon(1e-9));
}

TEST_CASE("channel ranking orders by amplitude with stable ties") {
    CHECK_EQ(rank_channels({0.3, 0.1, 0.2}, 1), std::vector<int>{0});
    CHECK_EQ(rank_channels({0.3, 0.1, 0.2}, 3), std::vector<int>{0, 2, 1});
    CHECK_EQ(rank_channels({0.5, 0.5, 0.1}, 2), std::vector<int>{0, 1});
    CHECK_EQ(rank_channels({0.1, 0.5, 0.5}, 2), std::vector<int>{1, 2});
    CHECK_EQ(rank_channels({0.2, 0.9, 0.4, 0.6}, 2), std::vector<int>{1, 3});
    CHECK_THROWS_AS(rank_channels({0.1, 0.2}, 0), ConfigError);
    CHECK_THROWS_AS(rank_channels({0.1, 0.2}, 3), ConfigError);
}

TEST_CASE("peak detection finds separated local maxima") {
    // Two sinusoids 0.15 Hz apart produce two well-separated spectral peaks
    // with the stronger one first.
    estimator::FrequencyGrid grid;
    estimator::EstimationWindow w;
    w.length = 200;
    w.num_channels = 1;
    w.step_s = 0.16;
    for (std::size_t k = 0; k < w.length; ++k) {
        const double t = 0.16 * static_cast<double>(k);
        w.data.push_back(0.3 * std::cos(kTau * 0.2 * t) + 0.2 * std::cos(kTau * 0.35 * t + 1.0));
    }
    const std::vector<double> psd = estimator::periodogram(w, grid);
    const std::vector<Peak> peaks = detect_peaks(psd, grid);
    REQUIRE_GE(peaks.size(), 2);
    CHECK_EQ(peaks[0].freq_hz, doctest::Approx(0.2).epsilon(0.02));
    CHECK_EQ(peaks[1].freq_hz, doctest::Approx(0.35).epsilon(0.02));
    CHECK_GT(peaks[0].power, peaks[1].power);
    for (std::size_t i = 2; i < peaks.size(); ++i) {
        CHECK_GE(peaks[1].power, peaks[i].power);
    }
}

TEST_CASE("peak detection on hand-built spectra") {
    CHECK_EQ(detect_peaks(std::vector<double>(3, 0.0), tiny_grid(3)).size(), 0);

    const std::vector<Peak> single = detect_peaks({1.0, 2.0, 1.0}, tiny_grid(3));
    REQUIRE_EQ(single.size(), 1);
    CHECK_EQ(single[0].index, 1);
    CHECK_EQ(single[0].power, 2.0);

    // Plateaus count once, at their left edge.
    const std::vector<Peak> plateau = detect_peaks({1.0, 2.0, 2.0, 1.0}, tiny_grid(4));
    REQUIRE_EQ(plateau.size(), 1);
    CHECK_EQ(plateau[0].index, 1);

    // Endpoints are eligible; the weaker end dies to separation thinning
    // against the stronger one when they are close on the grid.
    const std::vector<Peak> thinned = detect_peaks({3.0, 1.0, 2.0}, tiny_grid(3));
    REQUIRE_EQ(thinned.size(), 1);
    CHECK_EQ(thinned[0].index, 0);
    const std::vector<Peak> both = detect_peaks({3.0, 1.0, 2.0}, tiny_grid(3), 0.005);
    REQUIRE_EQ(both.size(), 2);
    CHECK_EQ(both[0].index, 0);
    CHECK_EQ(both[1].index, 2);

    // Candidates under the relative threshold disappear.
    const std::vector<Peak> gated = detect_peaks({10.0, 0.0, 1.0, 0.0}, tiny_grid(4));
    REQUIRE_EQ(gated.size(), 1);
    CHECK_EQ(gated[0].index, 0);

    // Positive scaling keeps the peak set, scales the powers.
    const std::vector<Peak> scaled = detect_peaks({3000.0, 1000.0, 2000.0}, tiny_grid(3), 0.005);
    REQUIRE_EQ(scaled.size(), both.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        CHECK_EQ(scaled[i].index, both[i].index);
        CHECK_EQ(scaled[i].power, doctest::Approx(1000.0 * both[i].power).epsilon(1e-12));
    }

    CHECK_THROWS_AS(detect_peaks({1.0, 2.0}, tiny_grid(3)), DataError);
}

TEST_CASE("doubled-angle concentration distinguishes one breather from two") {
    const std::vector<double> w4(4, 1.0);
    CHECK_EQ(phase_dispersion({0.3, 0.3, 0.3, 0.3}, w4), doctest::Approx(1.0).epsilon(1e-12));
    // An antipodal split is what a single breather produces across channels.
    CHECK_EQ(phase_dispersion({0.3, 0.3 + std::numbers::pi, 0.3, 0.3 + std::numbers::pi}, w4),
             doctest::Approx(1.0).epsilon(1e-12));
    // A quarter-turn split doubles to opposite directions and cancels.
    CHECK_EQ(phase_dispersion({0.3, 0.3, 0.3 + std::numbers::pi / 2, 0.3 + std::numbers::pi / 2},
                              w4),
             doctest::Approx(0.0).epsilon(1e-12));

    // Rotating every phase or flipping a subset by pi changes nothing.
    const std::vector<double> phases{0.1, 1.2, -2.0, 0.7};
    const std::vector<double> weights{0.2, 1.0, 0.5, 0.8};
    const double base = phase_dispersion(phases, weights);
    std::vector<double> rotated = phases;
    for (double& p : rotated) p += 0.9;
    CHECK_EQ(phase_dispersion(rotated, weights), doctest::Approx(base).epsilon(1e-12));
    std::vector<double> flipped = phases;
    flipped[1] += std::numbers::pi;
    flipped[3] -= std::numbers::pi;
    CHECK_EQ(phase_dispersion(flipped, weights), doctest::Approx(base).epsilon(1e-12));

    // Zero-weight channels drop out entirely.
    CHECK_EQ(phase_dispersion({0.2, 0.2, 2.7}, {1.0, 1.0, 0.0}),
             doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(phase_dispersion({0.1}, {1.0}), ConfigError);
    CHECK_THROWS_AS(phase_dispersion({0.1, 0.2}, {1.0}), ConfigError);
    CHECK_THROWS_AS(phase_dispersion({0.1, 0.2}, {0.0, 0.0}), ConfigError);
    CHECK_THROWS_AS(phase_dispersion({0.1, 0.2}, {1.0, -1.0}), ConfigError);
}

TEST_CASE("random phases keep the concentration low on average") {
    synth::Rng rng(21);
    const std::vector<double> weights(16, 1.0);
    double sum = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> phases;
        for (int c = 0; c < 16; ++c) {
            phases.push_back(rng.uniform(-std::numbers::pi, std::numbers::pi));
        }
        sum += phase_dispersion(phases, weights);
    }
    CHECK_LT(sum / trials, 0.3);
}

TEST_CASE("KS test accepts matching Gaussians and rejects wrong scales") {
    int accept_right = 0, reject_wrong = 0;
    for (int seed = 1; seed <= 100; ++seed) {
        synth::Rng rng(static_cast<std::uint64_t>(seed));
        std::vector<double> xs;
        for (int i = 0; i < 1000; ++i) xs.push_back(0.7 * rng.gaussian());
        if (ks_statistic(xs, 0.7).accepted) ++accept_right;
        if (!ks_statistic(xs, 2.1).accepted) ++reject_wrong;
    }
    CHECK_GE(accept_right, 90);
    CHECK_GE(reject_wrong, 99);

    CHECK_THROWS_AS(ks_statistic(std::vector<double>(49, 0.0), 1.0), ConfigError);
    CHECK_THROWS_AS(ks_statistic(std::vector<double>(100, 0.5), 0.0), ConfigError);
}

TEST_CASE("KS distance is tiny on quantile-midpoint samples") {
    // Samples placed at the quantile midpoints make the empirical CDF hug
    // the reference within half a step.
    const std::size_t n = 100;
    std::vector<double> xs;
    for (std::size_t i = 0; i < n; ++i) {
        xs.push_back(2.5 * gaussian_quantile((static_cast<double>(i) + 0.5) / n));
    }
    const KsResult res = ks_statistic(xs, 2.5);
    CHECK_LE(res.d, 1.0 / static_cast<double>(n));
    CHECK_UNARY(res.accepted);
    CHECK_EQ(res.critical, doctest::Approx(0.1358).epsilon(1e-12));
    CHECK_EQ(res.n, n);
}

TEST_CASE("model residuals of a clean fit read as Gaussian noise") {
    const std::size_t n = 3000;
    const double step_s = 0.16;
    BreathingParams params;
    params.freq_hz = 0.3125;
    params.amplitudes = {0.35, 0.2};
    params.phases = {0.4, -1.1};
    const std::vector<double> sigmas{0.2, 0.5};
    estimator::EstimationWindow w;
    w.length = n;
    w.num_channels = 2;
    w.step_s = step_s;
    synth::Rng rng(9);
    for (std::size_t k = 0; k < n; ++k) {
        for (int c = 0; c < 2; ++c) {
            const double model = params.amplitudes[static_cast<std::size_t>(c)]
                                 * std::cos(kTau * params.freq_hz * step_s
                                                * static_cast<double>(k)
                                            + params.phases[static_cast<std::size_t>(c)]);
            w.data.push_back(model + sigmas[static_cast<std::size_t>(c)] * rng.gaussian());
        }
    }
    const std::vector<ChannelKs> report = residual_gaussianity(w, params);
    REQUIRE_EQ(report.size(), 2);
    for (int c = 0; c < 2; ++c) {
        CHECK_EQ(report[static_cast<std::size_t>(c)].channel, c);
        CHECK_EQ(report[static_cast<std::size_t>(c)].sigma_hat,
                 doctest::Approx(sigmas[static_cast<std::size_t>(c)]).epsilon(0.05));
        CHECK_UNARY(report[static_cast<std::size_t>(c)].ks.accepted);
    }
    // Subsampling shrinks n but the verdict stands on iid noise.
    const std::vector<ChannelKs> strided = residual_gaussianity(w, params, 3);
    CHECK_EQ(strided[0].ks.n, 1000);
    CHECK_UNARY(strided[0].ks.accepted);

    CHECK_THROWS_AS(residual_gaussianity(w, params, 0), ConfigError);
    BreathingParams wrong = params;
    wrong.amplitudes.pop_back();
    CHECK_THROWS_AS(residual_gaussianity(w, wrong), DataError);
}

TEST_CASE("axis names parse to the three sweep kinds") {
    CHECK_EQ(parse_axis("M"), SweepAxis::kDecimation);
    CHECK_EQ(parse_axis("m"), SweepAxis::kDecimation);
    CHECK_EQ(parse_axis("decimation"), SweepAxis::kDecimation);
    CHECK_EQ(parse_axis("delta"), SweepAxis::kDownsample);
    CHECK_EQ(parse_axis("downsample"), SweepAxis::kDownsample);
    CHECK_EQ(parse_axis("channels"), SweepAxis::kChannelCount);
    CHECK_EQ(parse_axis("channel_count"), SweepAxis::kChannelCount);
    CHECK_THROWS_AS(parse_axis("taps"), ConfigError);
}

TEST_CASE("keeping every channel reproduces the straight pipeline run") {
    const synth::SynthScenario scenario = still_scenario(4, {0.3, 0.15, 0.25, 0.2});
    const synth::SynthResult data = synth::generate(scenario);
    const pipeline::RunReport direct = pipeline::run_trace(data.trace, scenario.config);
    std::vector<double> freqs;
    for (const pipeline::Estimate& e : direct.estimates) freqs.push_back(e.params.freq_hz);
    const ErrorStats direct_stats = error_stats(freqs, 0.25);

    const std::vector<SweepPoint> points =
        run_sweep(scenario, SweepAxis::kChannelCount, {4.0});
    REQUIRE_EQ(points.size(), 1);
    CHECK_EQ(points[0].value, 4.0);
    CHECK_EQ(points[0].estimates, direct.estimates.size());
    CHECK_EQ(points[0].mean_error_bpm, direct_stats.mean_abs_bpm);
    CHECK_EQ(points[0].failure_rate, direct_stats.failure_rate);
}

TEST_CASE("single-channel sweep tracks the one channel that breathes") {
    // All breathing energy on channel 2; keeping the top-1 channel must hold
    // the estimate together.
    const synth::SynthScenario scenario = still_scenario(4, {0.0, 0.0, 0.35, 0.0});
    const std::vector<SweepPoint> points =
        run_sweep(scenario, SweepAxis::kChannelCount, {1.0, 4.0});
    REQUIRE_EQ(points.size(), 2);
    CHECK_LT(points[0].mean_error_bpm, 0.5);
    CHECK_GT(points[0].estimates, 0);
}

TEST_CASE("decimation and downsample axes stay accurate on clean traces") {
    const synth::SynthScenario scenario = still_scenario(3, {0.3, 0.25, 0.2});
    const std::vector<SweepPoint> dec =
        run_sweep(scenario, SweepAxis::kDecimation, {1.0, 10.0, 40.0});
    REQUIRE_EQ(dec.size(), 3);
    for (const SweepPoint& p : dec) {
        CAPTURE(p.value);
        CHECK_LT(p.mean_error_bpm, 0.5);
        CHECK_EQ(p.failure_rate, 0.0);
    }
    const std::vector<SweepPoint> down = run_sweep(scenario, SweepAxis::kDownsample, {1.0, 10.0});
    REQUIRE_EQ(down.size(), 2);
    for (const SweepPoint& p : down) {
        CAPTURE(p.value);
        CHECK_LT(p.mean_error_bpm, 0.5);
    }
}

TEST_CASE("sweep argument errors") {
    const synth::SynthScenario scenario = still_scenario(2, {0.3, 0.2});
    CHECK_THROWS_AS(run_sweep(scenario, SweepAxis::kDecimation, {}), ConfigError);
    CHECK_THROWS_AS(run_sweep(scenario, SweepAxis::kDecimation, {2.5}), ConfigError);
    CHECK_THROWS_AS(run_sweep(scenario, SweepAxis::kChannelCount, {3.0}), ConfigError);

    synth::SynthScenario no_breather = scenario;
    no_breather.segments[0].persons.clear();
    CHECK_THROWS_AS(run_sweep(no_breather, SweepAxis::kDecimation, {1.0}), ConfigError);
}

TEST_CASE("sweep CSV carries one line per point") {
    const std::vector<SweepPoint> points{{1.0, 0.125, 0.0, 42}, {10.0, 0.25, 0.5, 7}};
    const char* path = "tmp_sweep_test.csv";
    write_sweep_csv(path, points);
    std::ifstream in(path);
    REQUIRE_UNARY(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    in.close();
    std::remove(path);
    CHECK_EQ(buffer.str(), "value,mean_error_bpm,failure_rate\n1,0.125,0\n10,0.25,0.5\n");
}
