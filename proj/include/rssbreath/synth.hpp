#pragma once

// Synthetic RSS trace generator. Produces ground-truth-labelled traces that
// exercise the full chain: per-channel sinusoidal breathing components on a
// random dBm baseline, state-dependent noise, optional phase bimodality
// across channels, dB-domain quantization, and scripted still/motion
// segments.
//
// Noise correlation differs by state on purpose. Still segments carry
// receiver electronics noise, drawn independently per channel. Motion
// segments model shared-path fading, which hits every channel of the link at
// once, so one dB-domain draw per cycle is applied to all channels. The
// channel-averaged observation the motion detector consumes therefore has
// spread ~sigma/sqrt(C) while still and ~sigma while moving, which is what
// separates the two detector densities.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "rssbreath/core.hpp"

namespace rssbreath::synth {

// One breathing (or breathing-like) sinusoidal source.
struct PersonSignal {
    double freq_hz = 0.2;
    std::vector<double> amplitudes_db;  // per channel
    std::vector<double> phases_rad;     // per channel
    // Std of the random walk the instantaneous phase accumulates over one
    // breath period. 0 = pure sinusoid.
    double phase_jitter_rad = 0.0;
};

struct Segment {
    MotionState state = MotionState::kStill;
    double duration_s = 0.0;
    double noise_sigma_db = 0.0;  // electronics noise (still) / fading (motion)
    std::vector<PersonSignal> persons;
};

struct SynthScenario {
    PipelineConfig config;
    double quant_step_db = 1.0;  // 0 = no quantization
    std::uint64_t seed = 0;
    std::vector<Segment> segments;

    void validate() const;  // throws ConfigError
    double duration_s() const;
};

// Per-cycle labels emitted alongside a generated trace.
struct GroundTruth {
    std::vector<MotionState> state;
    std::vector<std::vector<double>> breath_hz;  // one entry per person present
    std::vector<double> channel_mean_dbm;        // baseline drawn per channel
};

struct SynthResult {
    RssTrace trace;
    GroundTruth truth;
};

// Deterministic given scenario.seed: identical scenarios reproduce traces
// bit-for-bit across platforms.
SynthResult generate(const SynthScenario& scenario);

// Keeps rows 0, delta, 2*delta, ... and divides the sampling rate by delta.
RssTrace downsample_trace(const RssTrace& trace, int delta);
GroundTruth downsample_truth(const GroundTruth& truth, int delta);

// Scenario file: the pipeline config keys plus `seed` and `quant_step_db`,
// followed by [segment] blocks, each optionally holding [person] blocks.
// Person amplitude specs: value:<a> | list:<a1,..,aC> | uniform:<lo>:<hi> |
// channels:<i,j,..>:<a>. Phase specs: value:<p> | list:<..> | random |
// bimodal:<p> (alternate channels get p and p+pi). Random draws resolve at
// load time from the scenario seed, so a file names one concrete scenario.
SynthScenario load_scenario(const std::string& path);
SynthScenario parse_scenario(std::istream& in, const std::string& origin);

// Ground-truth sidecar CSV: rows `cycle,state[,f_person1[,f_person2...]]`.
void write_truth(const GroundTruth& truth, const std::string& path);
void write_truth(const GroundTruth& truth, std::ostream& out);
GroundTruth read_truth(const std::string& path);  // channel_mean_dbm left empty
GroundTruth read_truth(std::istream& in, const std::string& origin);

// mt19937_64 core with explicit uniform/Gaussian draws (Marsaglia polar), so
// the stream does not depend on libstdc++'s distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double gaussian();  // N(0, 1)

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Round-to-nearest with exact halves to the even multiple; step 0 passes the
// value through.
double quantize(double value_db, double step_db);

}  // namespace rssbreath::synth
