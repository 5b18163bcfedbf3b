#include "ser/silence.hpp"

#include <cmath>
#include <stdexcept>

namespace ser {

std::size_t frame_count(std::size_t signal_length, const FrameConfig& cfg) {
    if (signal_length == 0) throw std::invalid_argument("signal must be non-empty");
    if (cfg.frame_length == 0 || cfg.hop_length == 0) {
        throw std::invalid_argument("frame_length and hop_length must be >= 1");
    }
    if (signal_length < cfg.frame_length) return 1;
    return (signal_length - cfg.frame_length) / cfg.hop_length + 1;
}

std::vector<std::size_t> frame_starts(std::size_t signal_length, const FrameConfig& cfg) {
    const std::size_t count = frame_count(signal_length, cfg);
    std::vector<std::size_t> starts(count);
    for (std::size_t i = 0; i < count; ++i) starts[i] = i * cfg.hop_length;
    if (signal_length < cfg.frame_length) starts = {0};
    return starts;
}

double frame_rms(std::span<const double> frame) {
    if (frame.empty()) throw std::invalid_argument("frame must be non-empty");
    double sum_sq = 0.0;
    for (double x : frame) sum_sq += x * x;
    return std::sqrt(sum_sq / static_cast<double>(frame.size()));
}

double silence_threshold(double mean_rms, double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("alpha must be > 0");
    if (mean_rms < 0.0) throw std::invalid_argument("mean_rms must be >= 0");
    return alpha * mean_rms;
}

SilenceResult silence_fraction(std::span<const double> samples, const SilenceConfig& cfg) {
    const std::size_t n = samples.size();
    const auto starts = frame_starts(n, cfg.frames);
    const bool pseudo = n < cfg.frames.frame_length;

    std::vector<double> rms(starts.size());
    double rms_sum = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const std::size_t len = pseudo ? n : cfg.frames.frame_length;
        rms[i] = frame_rms(samples.subspan(starts[i], len));
        rms_sum += rms[i];
    }

    SilenceResult result;
    result.n_total = starts.size();
    result.mean_rms = rms_sum / static_cast<double>(starts.size());
    result.threshold = silence_threshold(result.mean_rms, cfg.alpha);

    if (result.mean_rms == 0.0) {
        // All-zero signal: strict < would report no silence; by decision the
        // degenerate case is fully silent.
        result.n_silence = result.n_total;
        result.fraction = 1.0;
        return result;
    }

    for (double r : rms) {
        if (r < result.threshold) ++result.n_silence;
    }
    result.fraction = static_cast<double>(result.n_silence) / static_cast<double>(result.n_total);
    return result;
}

SilenceResult silence_fraction(const AudioBuffer& buf, const SilenceConfig& cfg) {
    return silence_fraction(std::span<const double>(buf.samples), cfg);
}

}  // namespace ser
