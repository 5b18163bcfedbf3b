#include "ser/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ser/csv.hpp"
#include "ser/parallel.hpp"

namespace fs = std::filesystem;

namespace ser {

std::string feature_set_name(FeatureSet fs) {
    switch (fs) {
        case FeatureSet::lld_sequence: return "lld-sequence";
        case FeatureSet::mean_std: return "mean-std";
        case FeatureSet::mean_std_silence: return "mean-std-silence";
    }
    throw std::logic_error("unknown feature set");
}

FeatureSet feature_set_from_name(const std::string& name) {
    if (name == "lld-sequence") return FeatureSet::lld_sequence;
    if (name == "mean-std") return FeatureSet::mean_std;
    if (name == "mean-std-silence") return FeatureSet::mean_std_silence;
    throw std::invalid_argument("unknown feature set '" + name +
                                "' (expected lld-sequence, mean-std or mean-std-silence)");
}

namespace {

std::string alpha_label(double alpha) { return "alpha=" + format_double(alpha); }

nlohmann::ordered_json plan_echo(const ExperimentPlan& plan) {
    nlohmann::ordered_json j;
    j["manifest"] = plan.manifest_path;
    std::vector<std::string> sets;
    for (FeatureSet fs : plan.feature_sets) sets.push_back(feature_set_name(fs));
    j["feature_sets"] = sets;
    j["alphas"] = plan.alphas;
    j["alpha"] = plan.alpha;
    j["seed"] = plan.seed;
    j["frame_length"] = plan.silence_frames.frame_length;
    j["hop_length"] = plan.silence_frames.hop_length;
    j["hidden"] = plan.hidden;
    j["layer_kind"] = plan.layer_kind == LayerKind::dense ? "dense" : "gated";
    j["learning_rate"] = plan.train.learning_rate;
    j["max_epochs"] = plan.train.max_epochs;
    j["patience"] = plan.train.patience;
    j["weights"] = {plan.train.weights.valence, plan.train.weights.arousal,
                    plan.train.weights.dominance};
    j["train_fraction"] = plan.split.train_fraction;
    j["grouping"] = plan.split.grouping == SplitSpec::Grouping::by_session ? "by-session" : "none";
    j["max_seq_frames"] = plan.max_seq_frames;
    j["require_full_gemaps"] = plan.require_full_gemaps;
    return j;
}

}  // namespace

ExtractedCorpus extract_corpus(const ExperimentPlan& plan, bool need_sequences,
                               const std::vector<double>& alphas) {
    ExtractedCorpus out;
    out.corpus = load_manifest(plan.manifest_path);
    const std::size_t n = out.corpus.size();
    if (n < 4) throw std::runtime_error("corpus too small for an experiment (need >= 4 utterances)");

    out.alphas = alphas;
    out.utterance_ids.resize(n);
    out.base_vectors.resize(n);
    out.silence_by_alpha.assign(alphas.size(), std::vector<double>(n, 0.0));
    if (need_sequences) out.sequences.resize(n);
    out.truths.resize(static_cast<Eigen::Index>(n), 3);

    const bool need_silence = !alphas.empty();
    parallel_for(n, plan.threads, [&](std::size_t i) {
        const UtteranceRecord& rec = out.corpus.records[i];
        out.utterance_ids[i] = rec.utt_id;
        out.truths(static_cast<Eigen::Index>(i), 0) = rec.valence;
        out.truths(static_cast<Eigen::Index>(i), 1) = rec.arousal;
        out.truths(static_cast<Eigen::Index>(i), 2) = rec.dominance;

        std::optional<AudioBuffer> audio;
        if (!rec.wav_path.empty()) {
            AudioBuffer raw = load_wav(rec.wav_path);
            audio = resample(raw, plan.lld.sample_rate);
        }

        LldMatrix lld;
        if (!rec.lld_csv.empty()) {
            lld = import_lld_csv(rec.lld_csv, plan.require_full_gemaps);
        } else if (audio.has_value()) {
            lld = extract_lld(*audio, plan.lld);
        } else {
            throw std::runtime_error("utterance '" + rec.utt_id + "' has no feature source");
        }
        out.base_vectors[i] = aggregate_mean_std(lld);

        if (need_sequences) {
            const Eigen::Index keep =
                std::min<Eigen::Index>(lld.frames(), static_cast<Eigen::Index>(plan.max_seq_frames));
            out.sequences[i] = lld.values.topRows(keep);
        }

        if (need_silence) {
            if (!audio.has_value()) {
                throw std::runtime_error("utterance '" + rec.utt_id +
                                         "': the silence feature needs a wav_path source");
            }
            for (std::size_t a = 0; a < alphas.size(); ++a) {
                SilenceConfig sc;
                sc.alpha = alphas[a];
                sc.frames = plan.silence_frames;
                out.silence_by_alpha[a][i] = silence_fraction(*audio, sc).fraction;
            }
        }
    });
    return out;
}

namespace {

FeatureMatrix matrix_for(const ExtractedCorpus& corpus, bool with_silence,
                         std::size_t alpha_index) {
    std::vector<FeatureVector> vectors;
    vectors.reserve(corpus.base_vectors.size());
    for (std::size_t i = 0; i < corpus.base_vectors.size(); ++i) {
        if (with_silence) {
            SilenceResult s;
            s.fraction = corpus.silence_by_alpha[alpha_index][i];
            vectors.push_back(append_silence(corpus.base_vectors[i], s));
        } else {
            vectors.push_back(corpus.base_vectors[i]);
        }
    }
    return assemble_matrix(corpus.utterance_ids, vectors);
}

struct CycleData {
    DataView train, validation, test;
};

CycleData make_views(const Eigen::MatrixXd& features, const std::vector<Eigen::MatrixXd>* seqs,
                     const Eigen::MatrixXd& truths, const SplitResult& parts) {
    CycleData d;
    auto fill = [&](DataView& view, const std::vector<std::size_t>& idx) {
        view.y.resize(static_cast<Eigen::Index>(idx.size()), 3);
        if (seqs == nullptr) {
            view.x.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
            for (std::size_t r = 0; r < idx.size(); ++r) {
                view.x.row(static_cast<Eigen::Index>(r)) =
                    features.row(static_cast<Eigen::Index>(idx[r]));
                view.y.row(static_cast<Eigen::Index>(r)) =
                    truths.row(static_cast<Eigen::Index>(idx[r]));
            }
        } else {
            for (std::size_t r = 0; r < idx.size(); ++r) {
                view.sequences.push_back((*seqs)[idx[r]]);
                view.y.row(static_cast<Eigen::Index>(r)) =
                    truths.row(static_cast<Eigen::Index>(idx[r]));
            }
        }
    };
    fill(d.train, parts.train);
    fill(d.validation, parts.validation);
    fill(d.test, parts.test);
    return d;
}

CccReport run_cycle_vector(const ExperimentPlan& plan, const Eigen::MatrixXd& features,
                           const Eigen::MatrixXd& truths, const SplitResult& parts) {
    const CycleData data = make_views(features, nullptr, truths, parts);
    ModelConfig mc;
    mc.input_dim = static_cast<int>(features.cols());
    mc.hidden = plan.hidden;
    mc.layer_kind = plan.layer_kind;
    mc.mode = ModelMode::vector;
    mc.seed = plan.seed;
    Model model = Model::init(mc);
    model.standardizer().fit(data.train.x);
    TrainResult tr = train(std::move(model), data.train, data.validation, plan.train);
    return predict_and_evaluate(tr.best_model, data.test);
}

CccReport run_cycle_sequence(const ExperimentPlan& plan, const std::vector<Eigen::MatrixXd>& seqs,
                             const Eigen::MatrixXd& truths, const SplitResult& parts) {
    const CycleData data = make_views(Eigen::MatrixXd(), &seqs, truths, parts);
    ModelConfig mc;
    mc.input_dim = static_cast<int>(seqs.front().cols());
    mc.hidden = plan.hidden;
    mc.layer_kind = LayerKind::gated;
    mc.mode = ModelMode::sequence;
    mc.seed = plan.seed;
    Model model = Model::init(mc);
    Eigen::Index total_frames = 0;
    for (const auto& idx : parts.train) total_frames += seqs[idx].rows();
    Eigen::MatrixXd train_frames(total_frames, seqs.front().cols());
    Eigen::Index row = 0;
    for (const auto& idx : parts.train) {
        train_frames.middleRows(row, seqs[idx].rows()) = seqs[idx];
        row += seqs[idx].rows();
    }
    model.standardizer().fit(train_frames);
    TrainResult tr = train(std::move(model), data.train, data.validation, plan.train);
    return predict_and_evaluate(tr.best_model, data.test);
}

SplitResult plan_split(const ExperimentPlan& plan, const Corpus& corpus) {
    SplitSpec spec = plan.split;
    spec.seed = plan.seed;
    return split(corpus, spec);
}

}  // namespace

ExperimentResult run_feature_comparison(const ExperimentPlan& plan, const ProgressSink& progress) {
    if (plan.feature_sets.empty()) throw std::invalid_argument("no feature sets requested");

    const bool need_sequences =
        std::find(plan.feature_sets.begin(), plan.feature_sets.end(), FeatureSet::lld_sequence) !=
        plan.feature_sets.end();
    const bool need_silence =
        std::find(plan.feature_sets.begin(), plan.feature_sets.end(),
                  FeatureSet::mean_std_silence) != plan.feature_sets.end();

    std::vector<double> alphas;
    if (need_silence) alphas.push_back(plan.alpha);
    const ExtractedCorpus corpus = extract_corpus(plan, need_sequences, alphas);
    const SplitResult parts = plan_split(plan, corpus.corpus);

    ExperimentResult result;
    result.kind = "comparison";
    result.seed = plan.seed;
    result.invocation = plan.invocation;
    result.config_echo = plan_echo(plan).dump();

    for (FeatureSet fs : plan.feature_sets) {
        ResultRow row;
        row.label = feature_set_name(fs);
        row.alpha = fs == FeatureSet::mean_std_silence ? plan.alpha : 0.0;
        switch (fs) {
            case FeatureSet::mean_std: {
                const FeatureMatrix m = matrix_for(corpus, false, 0);
                row.report = run_cycle_vector(plan, m.values, corpus.truths, parts);
                break;
            }
            case FeatureSet::mean_std_silence: {
                const FeatureMatrix m = matrix_for(corpus, true, 0);
                row.report = run_cycle_vector(plan, m.values, corpus.truths, parts);
                break;
            }
            case FeatureSet::lld_sequence: {
                row.report = run_cycle_sequence(plan, corpus.sequences, corpus.truths, parts);
                break;
            }
        }
        result.rows.push_back(std::move(row));
        if (progress) progress(result);
    }
    return result;
}

ExperimentResult run_alpha_sweep(const ExperimentPlan& plan, const ProgressSink& progress) {
    if (plan.alphas.empty()) throw std::invalid_argument("alpha sweep needs at least one factor");
    for (double a : plan.alphas) {
        if (!(a > 0.0)) throw std::invalid_argument("alpha factors must be > 0");
    }

    const ExtractedCorpus corpus = extract_corpus(plan, false, plan.alphas);
    const SplitResult parts = plan_split(plan, corpus.corpus);

    ExperimentResult result;
    result.kind = "alpha_sweep";
    result.seed = plan.seed;
    result.invocation = plan.invocation;
    result.config_echo = plan_echo(plan).dump();

    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < plan.alphas.size(); ++a) {
        ResultRow row;
        row.alpha = plan.alphas[a];
        row.label = alpha_label(plan.alphas[a]);
        const FeatureMatrix m = matrix_for(corpus, true, a);
        row.report = run_cycle_vector(plan, m.values, corpus.truths, parts);
        if (row.report.mean > best_mean) {
            best_mean = row.report.mean;
            result.best_row = static_cast<int>(a);
        }
        result.rows.push_back(std::move(row));
        if (progress) progress(result);
    }
    return result;
}

namespace {

nlohmann::ordered_json result_to_json(const ExperimentResult& result) {
    nlohmann::ordered_json j;
    j["kind"] = result.kind;
    j["invocation"] = result.invocation;
    j["seed"] = result.seed;
    j["config"] = nlohmann::ordered_json::parse(
        result.config_echo.empty() ? "{}" : result.config_echo);
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : result.rows) {
        nlohmann::ordered_json r;
        r["label"] = row.label;
        r["alpha"] = row.alpha;
        r["valence"] = row.report.valence;
        r["arousal"] = row.report.arousal;
        r["dominance"] = row.report.dominance;
        r["mean"] = row.report.mean;
        r["degenerate_flags"] = row.report.degenerate;
        j["rows"].push_back(std::move(r));
    }
    if (result.best_row >= 0) j["best_row"] = result.best_row;
    return j;
}

}  // namespace

std::vector<std::string> emit_report(const ExperimentResult& result, const std::string& out_dir,
                                     const std::string& stem) {
    fs::create_directories(out_dir);
    const fs::path base = fs::path(out_dir) / stem;
    std::vector<std::string> written;

    {
        const std::string path = base.string() + ".json";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << result_to_json(result).dump(2) << '\n';
        written.push_back(path);
    }
    {
        CsvTable table;
        table.header = {"label", "alpha", "valence", "arousal", "dominance", "mean"};
        for (const auto& row : result.rows) {
            table.rows.push_back({row.label, format_double(row.alpha),
                                  format_double(row.report.valence),
                                  format_double(row.report.arousal),
                                  format_double(row.report.dominance),
                                  format_double(row.report.mean)});
        }
        const std::string path = base.string() + ".csv";
        write_csv(path, table);
        written.push_back(path);
    }
    {
        // Long format, one (row, dimension) pair per line; plot-ready.
        CsvTable table;
        table.header = {"label", "alpha", "dimension", "ccc"};
        for (const auto& row : result.rows) {
            const std::pair<const char*, double> dims[4] = {{"valence", row.report.valence},
                                                            {"arousal", row.report.arousal},
                                                            {"dominance", row.report.dominance},
                                                            {"mean", row.report.mean}};
            for (const auto& [dim, value] : dims) {
                table.rows.push_back(
                    {row.label, format_double(row.alpha), dim, format_double(value)});
            }
        }
        const std::string path = base.string() + "_long.csv";
        write_csv(path, table);
        written.push_back(path);
    }
    return written;
}

ExperimentResult load_report(const std::string& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open report " + json_path);
    nlohmann::ordered_json j;
    in >> j;

    ExperimentResult result;
    result.kind = j.at("kind").get<std::string>();
    result.invocation = j.at("invocation").get<std::string>();
    result.seed = j.at("seed").get<std::uint64_t>();
    result.config_echo = j.at("config").dump();
    for (const auto& r : j.at("rows")) {
        ResultRow row;
        row.label = r.at("label").get<std::string>();
        row.alpha = r.at("alpha").get<double>();
        row.report.valence = r.at("valence").get<double>();
        row.report.arousal = r.at("arousal").get<double>();
        row.report.dominance = r.at("dominance").get<double>();
        row.report.mean = r.at("mean").get<double>();
        const auto& flags = r.at("degenerate_flags");
        for (std::size_t i = 0; i < 3 && i < flags.size(); ++i) {
            row.report.degenerate[i] = flags[i].get<bool>();
        }
        result.rows.push_back(std::move(row));
    }
    if (j.contains("best_row")) result.best_row = j.at("best_row").get<int>();
    return result;
}

namespace {

const ReferenceRow kReferenceComparison[] = {
    {"mean-std", 0.201, 0.476, 0.435, 0.371},
    {"mean-std-silence", 0.214, 0.561, 0.448, 0.408},
};

const ReferenceRow kReferenceAlpha[] = {
    {"alpha=0.1", 0.21, 0.51, 0.43, 0.389},
    {"alpha=0.2", 0.21, 0.52, 0.43, 0.392},
    {"alpha=0.3", 0.214, 0.561, 0.448, 0.408},
    {"alpha=0.4", 0.0, 0.0, 0.0, 0.373},
};

void append_table_row(std::ostringstream& out, const std::string& label, double v, double a,
                      double d, double mean, const char* note) {
    out << "  " << std::left << std::setw(22) << label << std::right << std::fixed
        << std::setprecision(3) << std::setw(8) << v << std::setw(8) << a << std::setw(8) << d
        << std::setw(8) << mean;
    if (note != nullptr && note[0] != '\0') out << "  " << note;
    out << '\n';
}

}  // namespace

std::span<const ReferenceRow> reference_comparison_rows() { return kReferenceComparison; }
std::span<const ReferenceRow> reference_alpha_rows() { return kReferenceAlpha; }

std::string render_report(const ExperimentResult& result, bool include_reference) {
    std::ostringstream out;
    out << (result.kind == "comparison" ? "Feature-set comparison" : "Silence threshold sweep")
        << " (seed " << result.seed << ")\n";
    out << "  " << std::left << std::setw(22) << "input" << std::right << std::setw(8) << "V"
        << std::setw(8) << "A" << std::setw(8) << "D" << std::setw(8) << "mean" << '\n';
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& row = result.rows[i];
        const bool best = static_cast<int>(i) == result.best_row;
        append_table_row(out, row.label, row.report.valence, row.report.arousal,
                         row.report.dominance, row.report.mean, best ? "<- best mean CCC" : "");
    }
    if (include_reference) {
        out << "\nReference scores from the original IEMOCAP study (full corpus; "
               "not comparable to synthetic desk-scale runs):\n";
        const auto rows = result.kind == "comparison" ? reference_comparison_rows()
                                                      : reference_alpha_rows();
        for (const auto& r : rows) {
            if (r.valence == 0.0 && r.arousal == 0.0 && r.dominance == 0.0) {
                out << "  " << std::left << std::setw(22) << r.label << "mean CCC "
                    << std::fixed << std::setprecision(3) << r.mean << '\n';
            } else {
                append_table_row(out, r.label, r.valence, r.arousal, r.dominance, r.mean, "");
            }
        }
    }
    return out.str();
}

}  // namespace ser
