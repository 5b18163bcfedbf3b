// Command-line front end: feature extraction, synthetic corpora, training,
// evaluation and the two experiment protocols (feature-set comparison and
// silence-threshold sweep).

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "ser/audio.hpp"
#include "ser/csv.hpp"
#include "ser/dataset.hpp"
#include "ser/experiment.hpp"
#include "ser/hsf.hpp"
#include "ser/lld.hpp"
#include "ser/metrics.hpp"
#include "ser/model.hpp"
#include "ser/silence.hpp"

namespace fs = std::filesystem;
using namespace ser;

namespace {

std::string join_invocation(int argc, char** argv) {
    std::string line;
    for (int i = 0; i < argc; ++i) {
        if (i > 0) line += ' ';
        line += argv[i];
    }
    return line;
}

unsigned default_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Options shared by every pipeline-driving subcommand.
struct CommonOpts {
    std::string manifest;
    std::string out_dir = "out";
    double alpha = 0.3;
    std::size_t frame_length = 2048;
    std::size_t hop_length = 512;
    std::uint64_t seed = 0;
    std::vector<double> weights = {0.1, 0.5, 0.4};
    std::vector<int> hidden = {64, 64, 64};
    std::string layer_kind = "dense";
    int epochs = 100;
    int patience = 10;
    double learning_rate = 1e-3;
    double train_fraction = 0.8;
    bool by_session = false;
    std::size_t max_seq_frames = 300;
    bool require_full_gemaps = false;
    unsigned threads = default_threads();
};

void add_extraction_flags(CLI::App* cmd, CommonOpts& o, bool manifest_required = true) {
    auto* m = cmd->add_option("--manifest", o.manifest, "Corpus manifest CSV");
    if (manifest_required) m->required();
    cmd->add_option("--alpha", o.alpha, "Silence threshold factor")->check(CLI::PositiveNumber);
    cmd->add_option("--frame-length", o.frame_length, "Silence frame length, samples");
    cmd->add_option("--hop-length", o.hop_length, "Silence hop length, samples");
    cmd->add_flag("--require-full-gemaps", o.require_full_gemaps,
                  "Validate that imported descriptor CSVs carry all 23 names");
    cmd->add_option("--threads", o.threads, "Worker threads for per-utterance extraction");
}

void add_training_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "Seed for init, split and any synthesis");
    cmd->add_option("--weights", o.weights, "Multitask weights v,a,d")
        ->delimiter(',')
        ->expected(3);
    cmd->add_option("--hidden", o.hidden, "Hidden layer sizes")->delimiter(',');
    cmd->add_option("--layer-kind", o.layer_kind, "Hidden layer kind")
        ->check(CLI::IsMember({"dense", "gated"}));
    cmd->add_option("--epochs", o.epochs, "Maximum training epochs");
    cmd->add_option("--patience", o.patience, "Early-stopping patience, epochs");
    cmd->add_option("--lr", o.learning_rate, "Optimizer step size");
    cmd->add_option("--train-fraction", o.train_fraction, "Training split fraction");
    cmd->add_flag("--by-session", o.by_session, "Group the split by session tag");
    cmd->add_option("--max-seq-frames", o.max_seq_frames,
                    "Frame truncation for lld-sequence input");
}

ExperimentPlan make_plan(const CommonOpts& o, const std::string& invocation) {
    ExperimentPlan plan;
    plan.manifest_path = o.manifest;
    plan.alpha = o.alpha;
    plan.seed = o.seed;
    plan.silence_frames.frame_length = o.frame_length;
    plan.silence_frames.hop_length = o.hop_length;
    plan.hidden = o.hidden;
    plan.layer_kind = o.layer_kind == "gated" ? LayerKind::gated : LayerKind::dense;
    plan.train.max_epochs = o.epochs;
    plan.train.patience = o.patience;
    plan.train.learning_rate = o.learning_rate;
    plan.train.weights = TaskWeights{o.weights[0], o.weights[1], o.weights[2]};
    plan.split.train_fraction = o.train_fraction;
    plan.split.seed = o.seed;
    plan.split.grouping =
        o.by_session ? SplitSpec::Grouping::by_session : SplitSpec::Grouping::none;
    plan.max_seq_frames = o.max_seq_frames;
    plan.require_full_gemaps = o.require_full_gemaps;
    plan.threads = o.threads;
    plan.invocation = invocation;
    return plan;
}

int cmd_extract(const CommonOpts& o, const std::string& feature_set_name_str, bool emit_lld) {
    ExperimentPlan plan = make_plan(o, "");
    const FeatureSet fs = feature_set_from_name(feature_set_name_str);
    const bool with_silence = fs == FeatureSet::mean_std_silence;

    std::vector<double> alphas;
    if (with_silence) alphas.push_back(o.alpha);
    const ExtractedCorpus corpus = extract_corpus(plan, false, alphas);

    fs::create_directories(o.out_dir);
    std::vector<FeatureVector> vectors;
    for (std::size_t i = 0; i < corpus.base_vectors.size(); ++i) {
        if (with_silence) {
            SilenceResult s;
            s.fraction = corpus.silence_by_alpha[0][i];
            vectors.push_back(append_silence(corpus.base_vectors[i], s));
        } else {
            vectors.push_back(corpus.base_vectors[i]);
        }
    }
    const FeatureMatrix matrix = assemble_matrix(corpus.utterance_ids, vectors);
    const std::string features_path = (fs::path(o.out_dir) / "features.csv").string();
    write_feature_csv(features_path, matrix);
    std::cout << "wrote " << features_path << " (" << matrix.rows() << " x " << matrix.cols()
              << ")\n";

    if (with_silence) {
        CsvTable table;
        table.header = {"utt_id", "fraction"};
        for (std::size_t i = 0; i < corpus.utterance_ids.size(); ++i) {
            table.rows.push_back(
                {corpus.utterance_ids[i], format_double(corpus.silence_by_alpha[0][i])});
        }
        const std::string silence_path = (fs::path(o.out_dir) / "silence.csv").string();
        write_csv(silence_path, table);
        std::cout << "wrote " << silence_path << '\n';
    }

    if (emit_lld) {
        const fs::path lld_dir = fs::path(o.out_dir) / "lld";
        fs::create_directories(lld_dir);
        for (const auto& rec : corpus.corpus.records) {
            AudioBuffer audio = resample(load_wav(rec.wav_path), plan.lld.sample_rate);
            const LldMatrix lld = extract_lld(audio, plan.lld);
            write_lld_csv((lld_dir / (rec.utt_id + ".csv")).string(), lld);
        }
        std::cout << "wrote per-utterance descriptor CSVs under " << lld_dir.string() << '\n';
    }
    return 0;
}

int cmd_synth(const CorpusPlan& plan, const std::string& out_dir, unsigned threads) {
    const SynthResult result = synth_corpus(plan, out_dir, threads);
    std::cout << "wrote " << result.corpus.size() << " utterances under " << out_dir << '\n'
              << "manifest: " << result.manifest_path << '\n';
    return 0;
}

struct TrainedCycle {
    Model model;
    std::vector<EpochStats> history;
    CccReport test_report;
};

TrainedCycle run_training(const ExperimentPlan& plan, FeatureSet fs) {
    const bool sequences = fs == FeatureSet::lld_sequence;
    std::vector<double> alphas;
    if (fs == FeatureSet::mean_std_silence) alphas.push_back(plan.alpha);
    const ExtractedCorpus corpus = extract_corpus(plan, sequences, alphas);

    SplitSpec spec = plan.split;
    spec.seed = plan.seed;
    const SplitResult parts = split(corpus.corpus, spec);

    auto gather = [&](const std::vector<std::size_t>& idx, const Eigen::MatrixXd& features,
                      DataView& view) {
        view.y.resize(static_cast<Eigen::Index>(idx.size()), 3);
        if (sequences) {
            for (std::size_t r = 0; r < idx.size(); ++r) {
                view.sequences.push_back(corpus.sequences[idx[r]]);
                view.y.row(static_cast<Eigen::Index>(r)) =
                    corpus.truths.row(static_cast<Eigen::Index>(idx[r]));
            }
        } else {
            view.x.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
            for (std::size_t r = 0; r < idx.size(); ++r) {
                view.x.row(static_cast<Eigen::Index>(r)) =
                    features.row(static_cast<Eigen::Index>(idx[r]));
                view.y.row(static_cast<Eigen::Index>(r)) =
                    corpus.truths.row(static_cast<Eigen::Index>(idx[r]));
            }
        }
    };

    Eigen::MatrixXd features;
    if (!sequences) {
        std::vector<FeatureVector> vectors;
        for (std::size_t i = 0; i < corpus.base_vectors.size(); ++i) {
            if (fs == FeatureSet::mean_std_silence) {
                SilenceResult s;
                s.fraction = corpus.silence_by_alpha[0][i];
                vectors.push_back(append_silence(corpus.base_vectors[i], s));
            } else {
                vectors.push_back(corpus.base_vectors[i]);
            }
        }
        features = assemble_matrix(corpus.utterance_ids, vectors).values;
    }

    DataView train_view, val_view, test_view;
    gather(parts.train, features, train_view);
    gather(parts.validation, features, val_view);
    gather(parts.test, features, test_view);

    ModelConfig mc;
    mc.hidden = plan.hidden;
    mc.seed = plan.seed;
    if (sequences) {
        mc.mode = ModelMode::sequence;
        mc.layer_kind = LayerKind::gated;
        mc.input_dim = static_cast<int>(corpus.sequences.front().cols());
    } else {
        mc.mode = ModelMode::vector;
        mc.layer_kind = plan.layer_kind;
        mc.input_dim = static_cast<int>(features.cols());
    }
    Model model = Model::init(mc);
    if (sequences) {
        Eigen::Index total = 0;
        for (const auto& idx : parts.train) total += corpus.sequences[idx].rows();
        Eigen::MatrixXd frames(total, mc.input_dim);
        Eigen::Index row = 0;
        for (const auto& idx : parts.train) {
            frames.middleRows(row, corpus.sequences[idx].rows()) = corpus.sequences[idx];
            row += corpus.sequences[idx].rows();
        }
        model.standardizer().fit(frames);
    } else {
        model.standardizer().fit(train_view.x);
    }

    TrainResult tr = train(std::move(model), train_view, val_view, plan.train);
    TrainedCycle cycle{std::move(tr.best_model), std::move(tr.history), CccReport{}};
    cycle.test_report = predict_and_evaluate(cycle.model, test_view);
    return cycle;
}

int cmd_train(const CommonOpts& o, const std::string& feature_set_name_str,
              const std::string& invocation) {
    const ExperimentPlan plan = make_plan(o, invocation);
    const FeatureSet fs = feature_set_from_name(feature_set_name_str);
    TrainedCycle cycle = run_training(plan, fs);

    fs::create_directories(o.out_dir);
    const std::string model_path = (fs::path(o.out_dir) / "model.json").string();
    {
        std::ofstream out(model_path, std::ios::binary);
        out << cycle.model.to_json() << '\n';
    }
    const std::string history_path = (fs::path(o.out_dir) / "history.csv").string();
    write_history_csv(history_path, cycle.history);
    const std::string report_path = (fs::path(o.out_dir) / "report.json").string();
    {
        std::ofstream out(report_path, std::ios::binary);
        out << cycle.test_report.to_json() << '\n';
    }
    std::cout << "model:   " << model_path << '\n'
              << "history: " << history_path << " (" << cycle.history.size() << " epochs)\n"
              << "test CCC report: " << report_path << '\n'
              << cycle.test_report.to_json() << '\n';
    return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& model_path,
             const std::string& feature_set_name_str, const std::string& out_path) {
    std::ifstream in(model_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model " + model_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const Model model = Model::from_json(text);

    const ExperimentPlan plan = make_plan(o, "");
    const FeatureSet fs = feature_set_from_name(feature_set_name_str);
    const bool sequences = fs == FeatureSet::lld_sequence;
    std::vector<double> alphas;
    if (fs == FeatureSet::mean_std_silence) alphas.push_back(o.alpha);
    const ExtractedCorpus corpus = extract_corpus(plan, sequences, alphas);

    DataView view;
    view.y = corpus.truths;
    if (sequences) {
        view.sequences = corpus.sequences;
    } else {
        std::vector<FeatureVector> vectors;
        for (std::size_t i = 0; i < corpus.base_vectors.size(); ++i) {
            if (fs == FeatureSet::mean_std_silence) {
                SilenceResult s;
                s.fraction = corpus.silence_by_alpha[0][i];
                vectors.push_back(append_silence(corpus.base_vectors[i], s));
            } else {
                vectors.push_back(corpus.base_vectors[i]);
            }
        }
        view.x = assemble_matrix(corpus.utterance_ids, vectors).values;
    }

    const CccReport report = predict_and_evaluate(model, view);
    std::cout << report.to_json() << '\n';
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        out << report.to_json() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Silence-aware dimensional speech emotion recognition pipeline"};
    app.set_config("--config", "", "Config file (key=value, UTF-8); command-line flags win");
    app.require_subcommand(1);
    const std::string invocation = join_invocation(argc, argv);

    CommonOpts opts;

    // extract
    auto* extract_cmd =
        app.add_subcommand("extract", "Extract per-utterance feature vectors to CSV");
    std::string extract_fs = "mean-std-silence";
    bool emit_lld = false;
    add_extraction_flags(extract_cmd, opts);
    extract_cmd->add_option("--feature-set", extract_fs, "Feature set to assemble")
        ->check(CLI::IsMember({"mean-std", "mean-std-silence"}));
    extract_cmd->add_flag("--emit-lld", emit_lld, "Also write per-utterance descriptor CSVs");
    extract_cmd->add_option("--out-dir", opts.out_dir, "Output directory");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with known labels");
    CorpusPlan corpus_plan;
    std::string synth_out = "corpus";
    unsigned synth_threads = default_threads();
    synth_cmd->add_option("--n", corpus_plan.n, "Number of utterances")->required();
    synth_cmd->add_option("--seed", corpus_plan.seed, "Corpus seed");
    synth_cmd->add_option("--noise", corpus_plan.label_noise,
                          "Label noise half-width on the raw 1-5 scale");
    synth_cmd->add_option("--matched-alpha", corpus_plan.matched_alpha,
                          "Threshold factor the construction separates best at");
    synth_cmd->add_flag("--null-labels", corpus_plan.labels_independent,
                        "Draw labels independent of the audio");
    synth_cmd->add_option("--min-seconds", corpus_plan.min_seconds, "Shortest utterance");
    synth_cmd->add_option("--max-seconds", corpus_plan.max_seconds, "Longest utterance");
    synth_cmd->add_option("--out-dir", synth_out, "Output directory");
    synth_cmd->add_option("--threads", synth_threads, "Parallel fixture generation");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a multitask regressor on one feature set");
    std::string train_fs = "mean-std-silence";
    add_extraction_flags(train_cmd, opts);
    add_training_flags(train_cmd, opts);
    train_cmd->add_option("--feature-set", train_fs, "Input feature set")
        ->check(CLI::IsMember({"lld-sequence", "mean-std", "mean-std-silence"}));
    train_cmd->add_option("--out-dir", opts.out_dir, "Run output directory");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over a manifest");
    std::string eval_model, eval_fs = "mean-std-silence", eval_out;
    add_extraction_flags(eval_cmd, opts);
    eval_cmd->add_option("--model", eval_model, "Model checkpoint JSON")->required();
    eval_cmd->add_option("--feature-set", eval_fs, "Input feature set")
        ->check(CLI::IsMember({"lld-sequence", "mean-std", "mean-std-silence"}));
    eval_cmd->add_option("--out", eval_out, "Write the CCC report JSON here too");

    // compare
    auto* compare_cmd =
        app.add_subcommand("compare", "Feature-set comparison: one training cycle per input kind");
    std::vector<std::string> compare_sets = {"mean-std", "mean-std-silence"};
    add_extraction_flags(compare_cmd, opts);
    add_training_flags(compare_cmd, opts);
    compare_cmd->add_option("--feature-sets", compare_sets, "Feature sets to compare")
        ->delimiter(',');
    compare_cmd->add_option("--out-dir", opts.out_dir, "Report output directory");

    // sweep-alpha
    auto* sweep_cmd =
        app.add_subcommand("sweep-alpha", "Train mean+std+silence once per threshold factor");
    std::vector<double> sweep_alphas = {0.1, 0.2, 0.3, 0.4};
    add_extraction_flags(sweep_cmd, opts);
    add_training_flags(sweep_cmd, opts);
    sweep_cmd->add_option("--alphas", sweep_alphas, "Threshold factors to sweep")->delimiter(',');
    sweep_cmd->add_option("--out-dir", opts.out_dir, "Report output directory");

    // report
    auto* report_cmd = app.add_subcommand("report", "Render a result JSON as a table");
    std::string report_in;
    bool no_reference = false;
    report_cmd->add_option("--in", report_in, "Result JSON file")->required();
    report_cmd->add_flag("--no-reference", no_reference, "Skip the published reference rows");

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract_cmd->parsed()) return cmd_extract(opts, extract_fs, emit_lld);
        if (synth_cmd->parsed()) return cmd_synth(corpus_plan, synth_out, synth_threads);
        if (train_cmd->parsed()) return cmd_train(opts, train_fs, invocation);
        if (eval_cmd->parsed()) return cmd_eval(opts, eval_model, eval_fs, eval_out);
        if (compare_cmd->parsed()) {
            ExperimentPlan plan = make_plan(opts, invocation);
            plan.feature_sets.clear();
            for (const auto& name : compare_sets) {
                plan.feature_sets.push_back(feature_set_from_name(name));
            }
            const auto sink = [&](const ExperimentResult& partial) {
                emit_report(partial, opts.out_dir, "comparison");
            };
            const ExperimentResult result = run_feature_comparison(plan, sink);
            for (const auto& path : emit_report(result, opts.out_dir, "comparison")) {
                std::cout << "wrote " << path << '\n';
            }
            std::cout << '\n' << render_report(result) << '\n';
            return 0;
        }
        if (sweep_cmd->parsed()) {
            ExperimentPlan plan = make_plan(opts, invocation);
            plan.alphas = sweep_alphas;
            const auto sink = [&](const ExperimentResult& partial) {
                emit_report(partial, opts.out_dir, "sweep");
            };
            const ExperimentResult result = run_alpha_sweep(plan, sink);
            for (const auto& path : emit_report(result, opts.out_dir, "sweep")) {
                std::cout << "wrote " << path << '\n';
            }
            std::cout << '\n' << render_report(result) << '\n';
            return 0;
        }
        if (report_cmd->parsed()) {
            const ExperimentResult result = load_report(report_in);
            std::cout << render_report(result, !no_reference) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
