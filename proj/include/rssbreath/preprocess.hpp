#pragma once

// Sliding-window mean removal. Strips the slowly varying per-channel RSS
// baseline so only short-term structure (breathing ripple, motion swings)
// survives for the detector and estimator.

#include <cstddef>
#include <vector>

#include "rssbreath/core.hpp"

namespace rssbreath::preprocess {

class MeanRemover {
  public:
    // window: samples in the trailing mean, newest sample included. During
    // warm-up the mean runs over however many samples have arrived, so a
    // constant input maps to exactly 0 from the first push.
    MeanRemover(int num_channels, int window);

    ChannelVector push(const ChannelVector& raw);
    void reset();

    int window() const { return window_; }
    std::size_t count() const { return count_; }
    const std::vector<double>& running_sum() const { return sum_; }
    // Fresh elementwise sum of the buffer contents, for drift checks.
    std::vector<double> recomputed_sum() const;

  private:
    int channels_;
    int window_;
    std::size_t count_ = 0;  // total samples pushed
    std::size_t head_ = 0;   // next ring slot to overwrite
    std::vector<double> ring_;  // window_ rows of channels_ values
    std::vector<double> sum_;
};

}  // namespace rssbreath::preprocess
