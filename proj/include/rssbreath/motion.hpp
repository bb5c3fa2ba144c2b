#pragma once

// Two-state motion detector over the channel-averaged, mean-removed RSS
// observation. A hidden Markov chain with Gaussian emission densities is
// filtered causally; the per-cycle state decision is the argmax of the scaled
// forward probabilities. Still periods have a narrow density (electronics
// noise shrunk by channel averaging), movement a wide one (shared-path
// fading), so the observation magnitude carries nearly all the information.

#include <cstddef>

#include "rssbreath/analysis.hpp"
#include "rssbreath/core.hpp"

namespace rssbreath::motion {

// Index 0 = still, 1 = motion throughout.
struct HmmParams {
    double transition[2][2] = {{0.9, 0.1}, {0.9, 0.1}};  // row = from-state
    double prior[2] = {0.9, 0.1};
    double sigma[2] = {0.197, 2.385};

    void validate() const;  // throws ConfigError
    static HmmParams from_config(const PipelineConfig& config);
    void apply_to_config(PipelineConfig* config) const;
};

// The scalar observation the detector consumes: mean across channels of one
// mean-removed sample.
double observe(const ChannelVector& sample);

double gaussian_pdf(double x, double sigma);

struct StepResult {
    MotionState state = MotionState::kStill;
    double p_motion = 0.0;  // filtered probability of the motion state
};

class HmmFilter {
  public:
    explicit HmmFilter(const HmmParams& params);

    StepResult step(double x);
    // Same recursion with caller-supplied emission densities. Exposed for
    // tests; step() is equivalent to passing the two Gaussian pdfs.
    StepResult step_with_densities(double density_still, double density_motion);

    void reset();
    // Times the forward pass lost all probability mass (both densities
    // underflowed) and fell back to the prior.
    std::size_t degenerate_resets() const { return degenerate_; }

  private:
    HmmParams params_;
    double alpha_[2] = {0.0, 0.0};
    bool first_ = true;
    std::size_t degenerate_ = 0;
};

struct DensityFit {
    HmmParams params;  // sigmas fitted, transition/prior from defaults
    analysis::KsResult ks_still;
    analysis::KsResult ks_motion;
    std::size_t n_still = 0;
    std::size_t n_motion = 0;
};

// Fits the two emission sigmas from labelled calibration traces: each trace
// is mean-removed (window derived from its own sampling rate), reduced to the
// channel-averaged observation, and the sample standard deviation taken after
// discarding the mean-removal warm-up. The KS reports test a spread-out
// subsample of each observation sequence against the fitted density.
// Transition matrix and prior are copied from `defaults`. Throws ConfigError
// when either trace yields fewer than min_samples observations.
DensityFit fit_densities(const RssTrace& still_trace, const RssTrace& motion_trace,
                         const PipelineConfig& defaults, std::size_t min_samples = 1000);

}  // namespace rssbreath::motion
