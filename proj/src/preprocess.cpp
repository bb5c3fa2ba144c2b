#include "rssbreath/preprocess.hpp"

#include <algorithm>

namespace rssbreath::preprocess {

MeanRemover::MeanRemover(int num_channels, int window)
    : channels_(num_channels), window_(window) {
    if (num_channels < 1) throw ConfigError("mean remover: need at least one channel");
    if (window < 1) throw ConfigError("mean remover: window must be at least 1 sample");
    ring_.assign(static_cast<std::size_t>(window_) * channels_, 0.0);
    sum_.assign(channels_, 0.0);
}

void MeanRemover::reset() {
    std::fill(ring_.begin(), ring_.end(), 0.0);
    std::fill(sum_.begin(), sum_.end(), 0.0);
    count_ = 0;
    head_ = 0;
}

ChannelVector MeanRemover::push(const ChannelVector& raw) {
    if (static_cast<int>(raw.values.size()) != channels_) {
        throw ConfigError("mean remover: sample has " + std::to_string(raw.values.size())
                          + " channels, expected " + std::to_string(channels_));
    }
    double* slot = ring_.data() + head_ * channels_;
    const bool full = count_ >= static_cast<std::size_t>(window_);
    for (int c = 0; c < channels_; ++c) {
        if (full) sum_[c] -= slot[c];  // retire the evicted sample
        slot[c] = raw.values[c];
        sum_[c] += raw.values[c];
    }
    head_ = (head_ + 1) % static_cast<std::size_t>(window_);
    ++count_;

    const double denom = static_cast<double>(std::min(count_, static_cast<std::size_t>(window_)));
    ChannelVector out;
    out.kind = SampleKind::kMeanRemoved;
    out.values.resize(channels_);
    for (int c = 0; c < channels_; ++c) {
        out.values[c] = raw.values[c] - sum_[c] / denom;
    }
    return out;
}

std::vector<double> MeanRemover::recomputed_sum() const {
    std::vector<double> fresh(channels_, 0.0);
    const std::size_t used = std::min(count_, static_cast<std::size_t>(window_));
    for (std::size_t i = 0; i < used; ++i) {
        const double* row = ring_.data() + i * channels_;
        for (int c = 0; c < channels_; ++c) fresh[c] += row[c];
    }
    return fresh;
}

}  // namespace rssbreath::preprocess
