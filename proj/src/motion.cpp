#include "rssbreath/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rssbreath/log.hpp"
#include "rssbreath/preprocess.hpp"

namespace rssbreath::motion {

void HmmParams::validate() const {
    for (int i = 0; i < 2; ++i) {
        double row = 0.0;
        for (int j = 0; j < 2; ++j) {
            if (transition[i][j] < 0.0) {
                throw ConfigError("motion detector: negative transition probability");
            }
            row += transition[i][j];
        }
        if (std::abs(row - 1.0) > 1e-9) {
            throw ConfigError("motion detector: transition row " + std::to_string(i + 1)
                              + " sums to " + format_double(row) + ", expected 1");
        }
    }
    if (prior[0] < 0.0 || prior[1] < 0.0 || std::abs(prior[0] + prior[1] - 1.0) > 1e-9) {
        throw ConfigError("motion detector: initial state weights must be >= 0 and sum to 1");
    }
    if (!(sigma[0] > 0.0) || !(sigma[1] > 0.0)) {
        throw ConfigError("motion detector: observation sigmas must be positive");
    }
}

HmmParams HmmParams::from_config(const PipelineConfig& config) {
    HmmParams p;
    p.transition[0][0] = config.p11;
    p.transition[0][1] = config.p12;
    p.transition[1][0] = config.p21;
    p.transition[1][1] = config.p22;
    p.prior[0] = config.pi1;
    p.prior[1] = config.pi2;
    p.sigma[0] = config.sigma1;
    p.sigma[1] = config.sigma2;
    p.validate();
    return p;
}

void HmmParams::apply_to_config(PipelineConfig* config) const {
    config->p11 = transition[0][0];
    config->p12 = transition[0][1];
    config->p21 = transition[1][0];
    config->p22 = transition[1][1];
    config->pi1 = prior[0];
    config->pi2 = prior[1];
    config->sigma1 = sigma[0];
    config->sigma2 = sigma[1];
}

double observe(const ChannelVector& sample) {
    if (sample.values.empty()) throw DataError("motion observation needs at least one channel");
    const double sum = std::accumulate(sample.values.begin(), sample.values.end(), 0.0);
    return sum / static_cast<double>(sample.values.size());
}

double gaussian_pdf(double x, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian_pdf: sigma must be positive");
    static const double kInvSqrtTwoPi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double z = x / sigma;
    return kInvSqrtTwoPi / sigma * std::exp(-0.5 * z * z);
}

HmmFilter::HmmFilter(const HmmParams& params) : params_(params) {
    params_.validate();
    reset();
}

void HmmFilter::reset() {
    alpha_[0] = alpha_[1] = 0.0;
    first_ = true;
}

StepResult HmmFilter::step(double x) {
    return step_with_densities(gaussian_pdf(x, params_.sigma[0]),
                               gaussian_pdf(x, params_.sigma[1]));
}

StepResult HmmFilter::step_with_densities(double density_still, double density_motion) {
    double next[2];
    if (first_) {
        next[0] = params_.prior[0] * density_still;
        next[1] = params_.prior[1] * density_motion;
        first_ = false;
    } else {
        const double into_still = alpha_[0] * params_.transition[0][0]
                                  + alpha_[1] * params_.transition[1][0];
        const double into_motion = alpha_[0] * params_.transition[0][1]
                                   + alpha_[1] * params_.transition[1][1];
        next[0] = into_still * density_still;
        next[1] = into_motion * density_motion;
    }
    const double norm = next[0] + next[1];
    if (norm > 0.0 && std::isfinite(norm)) {
        alpha_[0] = next[0] / norm;
        alpha_[1] = next[1] / norm;
    } else {
        // Both densities underflowed (observation absurdly far out in dB).
        // Restart the chain from the prior rather than propagating NaNs.
        ++degenerate_;
        log::warnf("motion filter: zero probability mass, resetting to prior (count %zu)",
                   degenerate_);
        alpha_[0] = params_.prior[0];
        alpha_[1] = params_.prior[1];
    }
    StepResult result;
    result.p_motion = alpha_[1];
    result.state = alpha_[1] >= alpha_[0] ? MotionState::kMotion : MotionState::kStill;
    return result;
}

namespace {

// Channel-averaged mean-removed observations of one calibration trace, with
// the warm-up (first mean window) dropped.
std::vector<double> observations(const RssTrace& trace, const PipelineConfig& defaults) {
    PipelineConfig cfg = defaults;
    cfg.fs_hz = trace.fs_hz;
    cfg.num_channels = trace.num_channels;
    const int window = cfg.resolved_mean_window();
    preprocess::MeanRemover remover(trace.num_channels, window);
    std::vector<double> xs;
    const std::size_t rows = trace.rows();
    xs.reserve(rows > static_cast<std::size_t>(window) ? rows - window : 0);
    ChannelVector sample;
    sample.values.resize(static_cast<std::size_t>(trace.num_channels));
    for (std::size_t k = 0; k < rows; ++k) {
        const double* row = trace.row(k);
        std::copy(row, row + trace.num_channels, sample.values.begin());
        sample.kind = SampleKind::kRaw;
        const ChannelVector removed = remover.push(sample);
        if (k >= static_cast<std::size_t>(window)) xs.push_back(observe(removed));
    }
    return xs;
}

double sample_std(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0));
}

// At most `cap` observations spread evenly over the sequence. The KS test
// wants roughly independent draws; adjacent observations share most of their
// mean-removal window, so spacing them out also decorrelates them.
std::vector<double> spread_subsample(const std::vector<double>& xs, std::size_t cap) {
    if (xs.size() <= cap) return xs;
    const std::size_t stride = (xs.size() + cap - 1) / cap;
    std::vector<double> out;
    out.reserve(cap);
    for (std::size_t i = 0; i < xs.size(); i += stride) out.push_back(xs[i]);
    return out;
}

}  // namespace

DensityFit fit_densities(const RssTrace& still_trace, const RssTrace& motion_trace,
                         const PipelineConfig& defaults, std::size_t min_samples) {
    const std::vector<double> xs_still = observations(still_trace, defaults);
    const std::vector<double> xs_motion = observations(motion_trace, defaults);
    if (xs_still.size() < min_samples || xs_motion.size() < min_samples) {
        throw ConfigError("density fit needs at least " + std::to_string(min_samples)
                          + " observations per trace after warm-up, got "
                          + std::to_string(xs_still.size()) + " still / "
                          + std::to_string(xs_motion.size()) + " motion");
    }
    DensityFit fit;
    fit.params = HmmParams::from_config(defaults);
    fit.params.sigma[0] = sample_std(xs_still);
    fit.params.sigma[1] = sample_std(xs_motion);
    fit.n_still = xs_still.size();
    fit.n_motion = xs_motion.size();
    fit.params.validate();
    fit.ks_still = analysis::ks_statistic(spread_subsample(xs_still, 1000), fit.params.sigma[0]);
    fit.ks_motion = analysis::ks_statistic(spread_subsample(xs_motion, 1000), fit.params.sigma[1]);
    return fit;
}

}  // namespace rssbreath::motion
