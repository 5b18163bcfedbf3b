#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ser/metrics.hpp"

namespace ser {

enum class LayerKind { dense, gated };
enum class ModelMode { vector, sequence };

// Architecture description. Vector mode takes one feature row per utterance;
// sequence mode unrolls the gated recurrent stack over frame-level input and
// feeds the final hidden state to the heads. A gated layer over a length-1
// input reduces to a gated dense layer, which is how the paper-shape vector
// configuration reaches its parameter count.
struct ModelConfig {
    int input_dim = 0;
    std::vector<int> hidden = {64, 64, 64};
    LayerKind layer_kind = LayerKind::dense;
    ModelMode mode = ModelMode::vector;
    std::uint64_t seed = 0;

    static constexpr int heads = 3;  // V, A, D
};

struct TrainConfig {
    int max_epochs = 100;
    int patience = 10;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    TaskWeights weights;
};

// Train-split z-scoring with a std floor of 1e-8. Replaces a batch-norm
// input layer: at inference batch norm is a fixed affine map, and fitting on
// the training split keeps it deterministic.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    bool fitted() const { return mean.size() > 0; }
    void fit(const Eigen::MatrixXd& train_rows);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
};

// Closed-form trainable-parameter count for a configuration.
std::size_t parameter_count(const ModelConfig& cfg);

class Model {
public:
    static Model init(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    Standardizer& standardizer() { return standardizer_; }
    const Standardizer& standardizer() const { return standardizer_; }

    std::size_t parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    // Vector mode: batch is N x input_dim, output N x 3.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& batch) const;
    // Sequence mode: one frames x input_dim matrix per utterance.
    Eigen::MatrixXd forward(const std::vector<Eigen::MatrixXd>& sequences) const;

    // Reverse-mode gradient of the multitask loss over the batch, flattened
    // in parameter order. loss_out (when given) receives the loss value.
    Eigen::VectorXd gradient(const Eigen::MatrixXd& batch, const Eigen::MatrixXd& truths,
                             const TaskWeights& w, double* loss_out = nullptr) const;
    Eigen::VectorXd gradient(const std::vector<Eigen::MatrixXd>& sequences,
                             const Eigen::MatrixXd& truths, const TaskWeights& w,
                             double* loss_out = nullptr) const;

    std::string to_json() const;
    static Model from_json(const std::string& text);

private:
    friend struct ModelAccess;
    ModelConfig cfg_;
    Standardizer standardizer_;

    struct DenseLayer {
        Eigen::MatrixXd weight;  // out x in
        Eigen::VectorXd bias;    // out
    };
    struct GatedLayer {
        // Gate row blocks ordered input, forget, cell, output.
        Eigen::MatrixXd w_input;      // 4h x in
        Eigen::MatrixXd w_recurrent;  // 4h x h
        Eigen::VectorXd bias;         // 4h
        int units = 0;
    };
    std::vector<DenseLayer> dense_;
    std::vector<GatedLayer> gated_;
    Eigen::MatrixXd head_weight;  // 3 x h_last
    Eigen::VectorXd head_bias;    // 3
};

// Features + targets for one partition.
struct DataView {
    Eigen::MatrixXd x;                     // vector mode, N x D
    std::vector<Eigen::MatrixXd> sequences;  // sequence mode
    Eigen::MatrixXd y;                     // N x 3

    Eigen::Index size() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    CccReport val_report;
};

struct TrainResult {
    Model best_model;
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

// Full-batch adaptive-moment descent with early stopping: runs at most
// max_epochs, stops after `patience` epochs without validation improvement
// and returns the best-validation snapshot. Throws on a non-finite loss with
// epoch and batch diagnostics.
TrainResult train(Model model, const DataView& train_set, const DataView& val_set,
                  const TrainConfig& tc);

CccReport predict_and_evaluate(const Model& model, const DataView& test_set);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace ser
