#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ser/audio.hpp"

namespace ser {

struct FrameConfig {
    std::size_t frame_length = 2048;
    std::size_t hop_length = 512;
};

struct SilenceConfig {
    double alpha = 0.3;
    FrameConfig frames;
};

// Per-utterance silence measurement. fraction == n_silence / n_total exactly.
struct SilenceResult {
    double fraction = 0.0;
    std::size_t n_silence = 0;
    std::size_t n_total = 0;
    double threshold = 0.0;
    double mean_rms = 0.0;
};

// Non-centered framing with partial tail frames dropped. When the signal is
// shorter than one frame, a single pseudo-frame covers the whole signal.
// Frame count is max(1, floor((L - frame) / hop) + 1).
std::vector<std::size_t> frame_starts(std::size_t signal_length, const FrameConfig& cfg);

std::size_t frame_count(std::size_t signal_length, const FrameConfig& cfg);

// sqrt((1/n) * sum(x[i]^2)); the frame must be non-empty.
double frame_rms(std::span<const double> frame);

// th = alpha * mean of all per-frame RMS values of the utterance.
double silence_threshold(double mean_rms, double alpha);

// A frame is silent iff its RMS is strictly below the threshold. An all-zero
// signal (mean RMS 0) is reported as fully silent.
SilenceResult silence_fraction(const AudioBuffer& buf, const SilenceConfig& cfg);

SilenceResult silence_fraction(std::span<const double> samples, const SilenceConfig& cfg);

}  // namespace ser
