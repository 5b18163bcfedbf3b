#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ser/audio.hpp"

namespace ser {

// One corpus entry. Labels are stored already scaled to [-1, 1]. The source
// is a WAV path, a precomputed descriptor CSV, or both (silence needs audio).
struct UtteranceRecord {
    std::string utt_id;
    std::string wav_path;
    std::string lld_csv;
    double valence = 0.0;
    double arousal = 0.0;
    double dominance = 0.0;
    std::string session;
};

struct Corpus {
    std::vector<UtteranceRecord> records;

    std::size_t size() const { return records.size(); }
};

// (raw - 3) / 2: linear, order-preserving map of the 1-5 rating scale onto
// [-1, 1]. Raw values outside [1, 5] are rejected.
double scale_label(double raw);

// Arithmetic mean per dimension over raters, on the raw scale.
std::array<double, 3> average_raters(std::span<const std::array<double, 3>> ratings);

// Manifest CSV: utt_id, wav_path and/or lld_csv, one or more
// (v_raw, a_raw, d_raw) rater column groups, optional session. Relative
// source paths resolve against the manifest directory. Duplicate ids,
// missing files and unparsable labels are rejected with the offending
// utterance named.
Corpus load_manifest(const std::string& path, bool check_files = true);

struct SplitSpec {
    enum class Grouping { none, by_session };
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    Grouping grouping = Grouping::none;
};

// Index partition: seeded shuffle, then train_fraction / half remainder /
// half remainder. Deterministic under seed; by-session keeps each session in
// one partition.
struct SplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

SplitResult split(const Corpus& corpus, const SplitSpec& spec);

// Synthetic corpus construction. Utterances are tone bursts separated by
// low-level noise pauses; the arousal label decreases with the realized pause
// proportion, valence follows tone frequency and dominance follows speech
// amplitude. Soft-speech segments and a per-utterance pause floor place the
// matched_alpha threshold between the floors it should reject and the soft
// speech it should keep.
struct CorpusPlan {
    std::size_t n = 100;
    std::uint64_t seed = 0;
    double label_noise = 0.25;        // uniform half-width on the raw 1-5 scale
    bool labels_independent = false;  // draw labels unrelated to the audio
    double matched_alpha = 0.3;
    int sample_rate = 16000;
    double min_seconds = 1.2;
    double max_seconds = 2.4;
    std::array<double, 2> silence_span{0.2, 0.6};
    std::array<double, 2> soft_span{0.08, 0.35};
    std::array<double, 2> amplitude_span{0.25, 1.0};
    std::array<double, 2> tone_hz_span{120.0, 380.0};
    std::array<double, 2> pause_floor_span{0.12, 0.28};  // pause RMS / mean frame RMS
    std::array<double, 2> soft_level_span{0.32, 0.38};   // soft RMS / mean frame RMS
};

// Ground truth retained for verification.
struct SynthTruth {
    double pause_fraction = 0.0;  // realized silent-sample proportion
    double tone_hz = 0.0;
    double amplitude = 0.0;
};

struct SynthUtterance {
    AudioBuffer audio;
    std::array<double, 3> raw_labels{};  // v, a, d on the 1-5 scale
    SynthTruth truth;
};

// Deterministic per (plan.seed, index); independent of generation order.
SynthUtterance synth_utterance(const CorpusPlan& plan, std::size_t index);

struct SynthResult {
    Corpus corpus;
    std::string manifest_path;
    std::vector<SynthTruth> truths;
};

// Writes out_dir/wav/*.wav and out_dir/manifest.csv. Fixture generation is
// parallel per utterance with derived seeds, so any thread count produces
// byte-identical output.
SynthResult synth_corpus(const CorpusPlan& plan, const std::string& out_dir,
                         unsigned threads = 1);

}  // namespace ser
