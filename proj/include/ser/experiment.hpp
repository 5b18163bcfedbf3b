#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ser/dataset.hpp"
#include "ser/hsf.hpp"
#include "ser/lld.hpp"
#include "ser/metrics.hpp"
#include "ser/model.hpp"
#include "ser/silence.hpp"

namespace ser {

enum class FeatureSet { lld_sequence, mean_std, mean_std_silence };

std::string feature_set_name(FeatureSet fs);
FeatureSet feature_set_from_name(const std::string& name);

struct ExperimentPlan {
    std::string manifest_path;
    std::vector<FeatureSet> feature_sets = {FeatureSet::mean_std, FeatureSet::mean_std_silence};
    std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4};
    double alpha = 0.3;  // silence factor for comparison runs
    std::uint64_t seed = 0;
    FrameConfig silence_frames;
    LldConfig lld;
    std::vector<int> hidden = {64, 64, 64};
    LayerKind layer_kind = LayerKind::dense;
    TrainConfig train;
    SplitSpec split;
    std::size_t max_seq_frames = 300;  // sequence-mode truncation
    bool require_full_gemaps = false;
    unsigned threads = 1;
    std::string invocation;  // exact CLI line, echoed into reports
};

struct ResultRow {
    std::string label;  // feature set name, or "alpha=<x>"
    double alpha = 0.0;
    CccReport report;
};

struct ExperimentResult {
    std::string kind;  // "comparison" or "alpha_sweep"
    std::vector<ResultRow> rows;
    int best_row = -1;  // sweep only: arg-max of mean CCC
    std::uint64_t seed = 0;
    std::string invocation;
    std::string config_echo;  // JSON text of the effective plan
};

// Per-utterance extraction products shared by every training cycle of a run.
struct ExtractedCorpus {
    Corpus corpus;
    std::vector<std::string> utterance_ids;
    std::vector<FeatureVector> base_vectors;         // mean||std, no silence
    std::vector<std::vector<double>> silence_by_alpha;  // [alpha index][utterance]
    std::vector<double> alphas;
    std::vector<Eigen::MatrixXd> sequences;          // lld-sequence mode only
    Eigen::MatrixXd truths;                          // N x 3 scaled labels
};

// Loads the manifest and extracts everything the requested feature sets and
// alphas need, fanning out across utterances.
ExtractedCorpus extract_corpus(const ExperimentPlan& plan, bool need_sequences,
                               const std::vector<double>& alphas);

// Called after each completed cycle with the partial result so far; a crash
// mid-run leaves the last snapshot behind.
using ProgressSink = std::function<void(const ExperimentResult&)>;

// One train/eval cycle per feature set, same seed and same split everywhere.
// The with- and without-silence matrices differ only by the trailing column.
ExperimentResult run_feature_comparison(const ExperimentPlan& plan,
                                        const ProgressSink& progress = {});

// One train/eval cycle per alpha over mean+std+silence input; only the
// silence column varies between rows. Marks the arg-max of mean CCC.
ExperimentResult run_alpha_sweep(const ExperimentPlan& plan, const ProgressSink& progress = {});

// Writes <stem>.json, <stem>.csv and <stem>_long.csv under out_dir and
// returns the file paths. Output is byte-stable for identical results.
std::vector<std::string> emit_report(const ExperimentResult& result, const std::string& out_dir,
                                     const std::string& stem);

ExperimentResult load_report(const std::string& json_path);

// Renders a result as an aligned text table; reference scores from the
// original IEMOCAP study are printed alongside for comparison, never
// asserted.
std::string render_report(const ExperimentResult& result, bool include_reference = true);

struct ReferenceRow {
    const char* label;
    double valence, arousal, dominance, mean;
};

// Published full-corpus CCC scores (IEMOCAP): desk-scale runs on synthetic
// corpora are not expected to match them.
std::span<const ReferenceRow> reference_comparison_rows();
std::span<const ReferenceRow> reference_alpha_rows();

}  // namespace ser
