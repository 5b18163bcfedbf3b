#include "ser/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ser {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

}  // namespace

AudioBuffer decode_wav(const std::uint8_t* data, std::size_t size) {
    if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("not a RIFF/WAVE file");
    }

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;
    const std::uint8_t* payload = nullptr;
    std::uint32_t payload_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= size) {
        const char* id = reinterpret_cast<const char*>(data + pos);
        const std::uint32_t chunk_size = read_u32(data + pos + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_size > size) {
            throw std::runtime_error("truncated WAV chunk");
        }
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw std::runtime_error("malformed fmt chunk");
            format = read_u16(data + body);
            channels = read_u16(data + body + 2);
            sample_rate = read_u32(data + body + 4);
            bits = read_u16(data + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            payload = data + body;
            payload_size = chunk_size;
        }
        pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }

    if (!have_fmt) throw std::runtime_error("missing fmt chunk");
    if (payload == nullptr) throw std::runtime_error("missing data chunk");
    if (payload_size == 0) throw std::runtime_error("empty data chunk");
    if (channels < 1 || channels > 2) {
        throw std::runtime_error("unsupported channel count: " + std::to_string(channels));
    }
    if (sample_rate == 0) throw std::runtime_error("invalid sample rate 0");

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32) {
        throw std::runtime_error("unsupported WAV encoding: format code " + std::to_string(format) +
                                 ", " + std::to_string(bits) + " bits");
    }

    const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t n_frames = payload_size / frame_bytes;
    if (n_frames == 0) throw std::runtime_error("empty data chunk");

    AudioBuffer buf;
    buf.sample_rate = static_cast<int>(sample_rate);
    buf.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t* sp = payload + i * frame_bytes + c * bytes_per_sample;
            if (pcm16) {
                const std::int16_t v = static_cast<std::int16_t>(read_u16(sp));
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float v;
                std::memcpy(&v, sp, 4);
                acc += static_cast<double>(v);
            }
        }
        buf.samples[i] = acc / channels;
    }
    return buf;
}

AudioBuffer load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open WAV file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw std::runtime_error("read failed: " + path);
    return decode_wav(bytes.data(), bytes.size());
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioBuffer& buf) {
    if (buf.sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(buf.samples.size() * 2);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    append_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    append_u32(out, 16);
    append_u16(out, kFormatPcm);
    append_u16(out, 1);  // mono
    append_u32(out, static_cast<std::uint32_t>(buf.sample_rate));
    append_u32(out, static_cast<std::uint32_t>(buf.sample_rate) * 2);
    append_u16(out, 2);   // block align
    append_u16(out, 16);  // bits per sample
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    append_u32(out, data_bytes);

    for (double x : buf.samples) {
        double clamped = x;
        if (clamped > 1.0) clamped = 1.0;
        if (clamped < -1.0) clamped = -1.0;
        long v = std::lround(clamped * 32768.0);
        if (v > 32767) v = 32767;
        if (v < -32768) v = -32768;
        append_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }
    return out;
}

void save_wav_pcm16(const std::string& path, const AudioBuffer& buf) {
    const auto bytes = encode_wav_pcm16(buf);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write WAV file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

AudioBuffer resample(const AudioBuffer& buf, int target_rate) {
    if (target_rate <= 0) throw std::invalid_argument("target_rate must be positive");
    if (buf.sample_rate <= 0) throw std::invalid_argument("source sample rate must be positive");
    if (target_rate == buf.sample_rate) return buf;

    const double ratio = static_cast<double>(target_rate) / buf.sample_rate;
    const std::size_t n_in = buf.samples.size();
    std::size_t n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));
    if (n_out == 0) n_out = 1;

    AudioBuffer out;
    out.sample_rate = target_rate;
    out.samples.resize(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
        const double src = static_cast<double>(i) / ratio;
        const std::size_t lo = std::min(static_cast<std::size_t>(src), n_in - 1);
        const std::size_t hi = std::min(lo + 1, n_in - 1);
        const double frac = src - static_cast<double>(lo);
        out.samples[i] = buf.samples[lo] * (1.0 - frac) + buf.samples[hi] * frac;
    }
    return out;
}

}  // namespace ser
