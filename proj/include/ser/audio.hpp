#pragma once

#include <string>
#include <vector>

namespace ser {

// Mono sample sequence, nominal range [-1, 1].
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 0;

    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Decodes a RIFF/WAVE file. Accepts PCM 16-bit and IEEE float32, 1 or 2
// channels. Integer samples are scaled by 1/32768; stereo is averaged to mono
// sample-wise. Throws std::runtime_error on IO failure, unsupported encoding
// (the offending format code is reported) or an empty data chunk.
AudioBuffer load_wav(const std::string& path);

// Writes mono PCM 16-bit little-endian. Samples are clamped to [-1, 1] and
// rounded; reloading reproduces them within 1/32768.
void save_wav_pcm16(const std::string& path, const AudioBuffer& buf);

// In-memory PCM16 encode, used by the writer and by round-trip checks.
std::vector<std::uint8_t> encode_wav_pcm16(const AudioBuffer& buf);
AudioBuffer decode_wav(const std::uint8_t* data, std::size_t size);

// Linear-interpolation resampling. Identity (bit-exact pass-through) when the
// rates already match. Output length is round(n * target/source).
AudioBuffer resample(const AudioBuffer& buf, int target_rate);

}  // namespace ser
