#include "ser/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>

#include "ser/csv.hpp"
#include "ser/parallel.hpp"
#include "ser/rng.hpp"

namespace fs = std::filesystem;

namespace ser {

double scale_label(double raw) {
    if (!(raw >= 1.0 && raw <= 5.0)) {
        throw std::out_of_range("label " + format_double(raw) + " outside the 1-5 rating scale");
    }
    return (raw - 3.0) / 2.0;
}

std::array<double, 3> average_raters(std::span<const std::array<double, 3>> ratings) {
    if (ratings.empty()) throw std::invalid_argument("average_raters: no ratings");
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    for (const auto& r : ratings) {
        for (int d = 0; d < 3; ++d) acc[d] += r[d];
    }
    for (int d = 0; d < 3; ++d) acc[d] /= static_cast<double>(ratings.size());
    return acc;
}

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path candidate(p);
    if (candidate.is_absolute()) return candidate.string();
    return (base / candidate).string();
}

}  // namespace

Corpus load_manifest(const std::string& path, bool check_files) {
    const CsvTable table = read_csv(path);
    const fs::path base = fs::path(path).parent_path();

    const int id_col = table.column("utt_id");
    if (id_col < 0) throw std::runtime_error(path + ": manifest is missing the utt_id column");
    const int wav_col = table.column("wav_path");
    const int lld_col = table.column("lld_csv");
    if (wav_col < 0 && lld_col < 0) {
        throw std::runtime_error(path + ": manifest needs a wav_path or lld_csv column");
    }
    const int session_col = table.column("session");

    // Every (v_raw, a_raw, d_raw) column triple is one rater group.
    std::vector<std::array<int, 3>> rater_groups;
    {
        std::vector<int> v_cols, a_cols, d_cols;
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (table.header[c] == "v_raw") v_cols.push_back(static_cast<int>(c));
            if (table.header[c] == "a_raw") a_cols.push_back(static_cast<int>(c));
            if (table.header[c] == "d_raw") d_cols.push_back(static_cast<int>(c));
        }
        if (v_cols.empty() || v_cols.size() != a_cols.size() || v_cols.size() != d_cols.size()) {
            throw std::runtime_error(path +
                                     ": manifest needs matching v_raw/a_raw/d_raw column groups");
        }
        for (std::size_t g = 0; g < v_cols.size(); ++g) {
            rater_groups.push_back({v_cols[g], a_cols[g], d_cols[g]});
        }
    }

    Corpus corpus;
    corpus.records.reserve(table.rows.size());
    std::set<std::string> seen_ids;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size()) {
            throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " width mismatch");
        }
        UtteranceRecord rec;
        rec.utt_id = row[static_cast<std::size_t>(id_col)];
        if (rec.utt_id.empty()) {
            throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " has an empty utt_id");
        }
        if (!seen_ids.insert(rec.utt_id).second) {
            throw std::runtime_error(path + ": duplicate utt_id '" + rec.utt_id + "'");
        }

        if (wav_col >= 0) rec.wav_path = resolve(base, row[static_cast<std::size_t>(wav_col)]);
        if (lld_col >= 0) rec.lld_csv = resolve(base, row[static_cast<std::size_t>(lld_col)]);
        if (rec.wav_path.empty() && rec.lld_csv.empty()) {
            throw std::runtime_error(path + ": utterance '" + rec.utt_id +
                                     "' has neither wav_path nor lld_csv");
        }
        if (check_files) {
            if (!rec.wav_path.empty() && !fs::exists(rec.wav_path)) {
                throw std::runtime_error(path + ": utterance '" + rec.utt_id + "': missing file " +
                                         rec.wav_path);
            }
            if (!rec.lld_csv.empty() && !fs::exists(rec.lld_csv)) {
                throw std::runtime_error(path + ": utterance '" + rec.utt_id + "': missing file " +
                                         rec.lld_csv);
            }
        }

        std::vector<std::array<double, 3>> ratings;
        for (const auto& group : rater_groups) {
            std::array<double, 3> rating{};
            for (int d = 0; d < 3; ++d) {
                const std::string& cell = row[static_cast<std::size_t>(group[d])];
                if (!parse_double(cell, rating[d])) {
                    throw std::runtime_error(path + ": utterance '" + rec.utt_id +
                                             "': unparsable label '" + cell + "'");
                }
            }
            ratings.push_back(rating);
        }
        const auto avg = average_raters(ratings);
        try {
            rec.valence = scale_label(avg[0]);
            rec.arousal = scale_label(avg[1]);
            rec.dominance = scale_label(avg[2]);
        } catch (const std::out_of_range& e) {
            throw std::runtime_error(path + ": utterance '" + rec.utt_id + "': " + e.what());
        }

        if (session_col >= 0) rec.session = row[static_cast<std::size_t>(session_col)];
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

namespace {

struct PartitionSizes {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

PartitionSizes partition_sizes(std::size_t n, double fraction) {
    PartitionSizes sizes;
    auto train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    train = std::clamp<std::size_t>(train, 1, n - 1);
    const std::size_t rest = n - train;
    sizes.train = train;
    sizes.validation = rest / 2;
    sizes.test = rest - sizes.validation;
    return sizes;
}

}  // namespace

SplitResult split(const Corpus& corpus, const SplitSpec& spec) {
    const std::size_t n = corpus.size();
    if (n < 2) throw std::invalid_argument("split: need at least 2 records");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
    }

    const PartitionSizes sizes = partition_sizes(n, spec.train_fraction);
    Rng rng(spec.seed);
    SplitResult result;

    if (spec.grouping == SplitSpec::Grouping::none) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        result.train.assign(order.begin(), order.begin() + sizes.train);
        result.validation.assign(order.begin() + sizes.train,
                                 order.begin() + sizes.train + sizes.validation);
        result.test.assign(order.begin() + sizes.train + sizes.validation, order.end());
    } else {
        // Group indices per session (records without a tag form singleton
        // groups keyed by id), shuffle groups, then fill partitions whole
        // groups at a time.
        std::vector<std::string> group_keys;
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rec = corpus.records[i];
            const std::string key =
                rec.session.empty() ? "utt:" + rec.utt_id : "session:" + rec.session;
            auto [it, inserted] = groups.try_emplace(key);
            if (inserted) group_keys.push_back(key);
            it->second.push_back(i);
        }
        if (groups.size() < 3) {
            throw std::invalid_argument("split: a partition would be empty (" +
                                        std::to_string(groups.size()) +
                                        " session groups for 3 partitions)");
        }
        rng.shuffle(group_keys);
        std::size_t assigned = 0;
        for (const auto& key : group_keys) {
            const auto& members = groups[key];
            std::vector<std::size_t>* target;
            if (assigned < sizes.train || result.train.empty()) {
                target = &result.train;
            } else if (assigned < sizes.train + sizes.validation || result.validation.empty()) {
                target = &result.validation;
            } else {
                target = &result.test;
            }
            target->insert(target->end(), members.begin(), members.end());
            assigned += members.size();
        }
        if (result.test.empty() || result.validation.empty()) {
            throw std::invalid_argument("split: a partition would be empty under by-session grouping");
        }
    }

    if (result.train.empty()) throw std::invalid_argument("split: train partition is empty");
    return result;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 of (seed + index); decorrelates the per-utterance streams.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double span_pick(Rng& rng, const std::array<double, 2>& span) {
    return rng.uniform(span[0], span[1]);
}

double unit_pos(double v, const std::array<double, 2>& span) {
    if (span[1] <= span[0]) return 0.5;
    return std::clamp((v - span[0]) / (span[1] - span[0]), 0.0, 1.0);
}

constexpr std::size_t kFadeSamples = 160;  // 10 ms edge ramp on tone bursts

void add_tone_burst(std::vector<double>& out, std::size_t length, double amplitude, double hz,
                    int sample_rate, Rng& rng) {
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const std::size_t fade = std::min(kFadeSamples, length / 4);
    const std::size_t start = out.size();
    for (std::size_t i = 0; i < length; ++i) {
        double env = 1.0;
        if (i < fade) env = static_cast<double>(i) / fade;
        const std::size_t remaining = length - 1 - i;
        if (remaining < fade) env = std::min(env, static_cast<double>(remaining) / fade);
        out.push_back(amplitude * env *
                      std::sin(phase + 2.0 * M_PI * hz * static_cast<double>(start + i) /
                               sample_rate));
    }
}

void add_noise_pause(std::vector<double>& out, std::size_t length, double rms, Rng& rng) {
    const double half_width = rms * std::sqrt(3.0);  // uniform noise RMS = b/sqrt(3)
    for (std::size_t i = 0; i < length; ++i) out.push_back(rng.uniform(-half_width, half_width));
}

}  // namespace

SynthUtterance synth_utterance(const CorpusPlan& plan, std::size_t index) {
    if (plan.n < 2) throw std::invalid_argument("synth_corpus: need n >= 2");
    Rng rng(derive_seed(plan.seed, index));

    const double seconds = rng.uniform(plan.min_seconds, plan.max_seconds);
    const std::size_t total = static_cast<std::size_t>(seconds * plan.sample_rate);
    const double s_target = span_pick(rng, plan.silence_span);
    const double q_target = span_pick(rng, plan.soft_span);
    const double amplitude = span_pick(rng, plan.amplitude_span);
    const double tone_hz = span_pick(rng, plan.tone_hz_span);
    const double pause_floor = span_pick(rng, plan.pause_floor_span);
    const double soft_level = span_pick(rng, plan.soft_level_span);
    const double chunk_scale = rng.uniform(0.7, 1.8);

    // Solve for the expected mean frame RMS so pause and soft levels can be
    // placed at fixed fractions of it.
    const double speech_rms = amplitude / std::sqrt(2.0);
    const double mean_rms = (1.0 - s_target - q_target) * speech_rms /
                            (1.0 - q_target * soft_level - s_target * pause_floor);
    const double pause_rms = pause_floor * mean_rms;
    const double soft_amplitude = soft_level * mean_rms * std::sqrt(2.0);

    const std::size_t voiced_total =
        total - static_cast<std::size_t>(s_target * static_cast<double>(total));
    const std::size_t soft_total = static_cast<std::size_t>(q_target * static_cast<double>(total));
    const std::size_t pause_total = total - voiced_total;

    const std::size_t n_chunks = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::lround(static_cast<double>(total) / (4500.0 * chunk_scale))));

    // Voiced chunk lengths by normalized random weights.
    std::vector<double> weights(n_chunks);
    double weight_sum = 0.0;
    for (auto& w : weights) {
        w = rng.uniform(0.5, 1.5);
        weight_sum += w;
    }
    std::vector<std::size_t> voiced_lengths(n_chunks);
    std::size_t voiced_used = 0;
    for (std::size_t i = 0; i < n_chunks; ++i) {
        if (i + 1 == n_chunks) {
            voiced_lengths[i] = voiced_total - voiced_used;
        } else {
            voiced_lengths[i] =
                static_cast<std::size_t>(weights[i] / weight_sum * static_cast<double>(voiced_total));
            voiced_used += voiced_lengths[i];
        }
    }

    // Mark chunks soft until the soft budget is spent.
    std::vector<std::size_t> order(n_chunks);
    for (std::size_t i = 0; i < n_chunks; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<bool> is_soft(n_chunks, false);
    std::size_t soft_used = 0;
    for (std::size_t idx : order) {
        if (soft_used + voiced_lengths[idx] / 2 <= soft_total) {
            is_soft[idx] = true;
            soft_used += voiced_lengths[idx];
        }
    }

    // Pause chunk lengths: n_chunks + 1 gaps around the voiced chunks.
    const std::size_t n_pauses = n_chunks + 1;
    std::vector<double> pause_weights(n_pauses);
    double pause_weight_sum = 0.0;
    for (auto& w : pause_weights) {
        w = rng.uniform(0.5, 1.5);
        pause_weight_sum += w;
    }
    std::vector<std::size_t> pause_lengths(n_pauses);
    std::size_t pause_used = 0;
    for (std::size_t i = 0; i < n_pauses; ++i) {
        if (i + 1 == n_pauses) {
            pause_lengths[i] = pause_total - pause_used;
        } else {
            pause_lengths[i] = static_cast<std::size_t>(pause_weights[i] / pause_weight_sum *
                                                        static_cast<double>(pause_total));
            pause_used += pause_lengths[i];
        }
    }

    SynthUtterance utt;
    utt.audio.sample_rate = plan.sample_rate;
    utt.audio.samples.reserve(total);
    std::size_t pause_samples = 0;
    for (std::size_t i = 0; i < n_chunks; ++i) {
        add_noise_pause(utt.audio.samples, pause_lengths[i], pause_rms, rng);
        pause_samples += pause_lengths[i];
        const double burst_gain = std::pow(10.0, rng.uniform(-2.0, 2.0) / 20.0);
        const double a = (is_soft[i] ? soft_amplitude : amplitude * burst_gain);
        const double hz = tone_hz * rng.uniform(0.95, 1.05);
        add_tone_burst(utt.audio.samples, voiced_lengths[i], a, hz, plan.sample_rate, rng);
    }
    add_noise_pause(utt.audio.samples, pause_lengths[n_chunks], pause_rms, rng);
    pause_samples += pause_lengths[n_chunks];

    utt.truth.pause_fraction =
        static_cast<double>(pause_samples) / static_cast<double>(utt.audio.samples.size());
    utt.truth.tone_hz = tone_hz;
    utt.truth.amplitude = amplitude;

    auto noisy = [&](double base) {
        const double v = base + plan.label_noise * rng.uniform(-1.0, 1.0);
        return std::clamp(v, 1.0, 5.0);
    };
    if (plan.labels_independent) {
        utt.raw_labels = {rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0)};
    } else {
        const double s_norm = unit_pos(utt.truth.pause_fraction, plan.silence_span);
        utt.raw_labels[0] = noisy(1.0 + 4.0 * unit_pos(tone_hz, plan.tone_hz_span));
        utt.raw_labels[1] = noisy(5.0 - 4.0 * s_norm);
        utt.raw_labels[2] = noisy(1.0 + 4.0 * unit_pos(amplitude, plan.amplitude_span));
    }
    return utt;
}

SynthResult synth_corpus(const CorpusPlan& plan, const std::string& out_dir, unsigned threads) {
    if (plan.n < 2) throw std::invalid_argument("synth_corpus: need n >= 2");
    const fs::path root(out_dir);
    fs::create_directories(root / "wav");

    const int id_width = std::max<int>(4, static_cast<int>(std::to_string(plan.n - 1).size()));
    auto utt_name = [&](std::size_t i) {
        std::string digits = std::to_string(i);
        return "utt_" + std::string(static_cast<std::size_t>(id_width) - digits.size(), '0') + digits;
    };

    std::vector<std::array<double, 3>> labels(plan.n);
    std::vector<SynthTruth> truths(plan.n);
    parallel_for(plan.n, threads, [&](std::size_t i) {
        SynthUtterance utt = synth_utterance(plan, i);
        save_wav_pcm16((root / "wav" / (utt_name(i) + ".wav")).string(), utt.audio);
        labels[i] = utt.raw_labels;
        truths[i] = utt.truth;
    });

    CsvTable manifest;
    manifest.header = {"utt_id", "wav_path", "v_raw", "a_raw", "d_raw", "session"};
    for (std::size_t i = 0; i < plan.n; ++i) {
        const std::string name = utt_name(i);
        manifest.rows.push_back({name, "wav/" + name + ".wav", format_double(labels[i][0]),
                                 format_double(labels[i][1]), format_double(labels[i][2]),
                                 "s" + std::to_string(i % 5 + 1)});
    }
    const std::string manifest_path = (root / "manifest.csv").string();
    write_csv(manifest_path, manifest);

    SynthResult result;
    result.manifest_path = manifest_path;
    result.truths = std::move(truths);
    result.corpus = load_manifest(manifest_path);
    return result;
}

}  // namespace ser
