#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>

namespace ser {

// Per-dimension concordance correlation with population moments. A dimension
// is flagged degenerate when either the prediction or the truth column is
// constant; its CCC is reported as 0.
struct CccReport {
    double valence = 0.0;
    double arousal = 0.0;
    double dominance = 0.0;
    double mean = 0.0;
    std::array<bool, 3> degenerate{false, false, false};

    std::string to_json() const;
    static CccReport from_json(const std::string& text);
};

struct TaskWeights {
    double valence = 0.1;
    double arousal = 0.5;
    double dominance = 0.4;
};

// CCC = 2*cov(p,t) / (var(p) + var(t) + (mean(p) - mean(t))^2), all moments
// divided by N. Returns 0 when either input is constant; *degenerate (when
// given) reports that case.
double ccc(std::span<const double> pred, std::span<const double> truth,
           bool* degenerate = nullptr);

// Column-wise CCC of N x 3 prediction/truth matrices (V, A, D order).
CccReport evaluate(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& truths);

// L = w_v*(1 - CCC_v) + w_a*(1 - CCC_a) + w_d*(1 - CCC_d). A degenerate
// column contributes w * 1.
double multitask_loss(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& truths,
                      const TaskWeights& w);

// Analytic d(multitask_loss)/d(preds). Degenerate columns propagate a zero
// gradient.
Eigen::MatrixXd multitask_loss_gradient(const Eigen::MatrixXd& preds,
                                        const Eigen::MatrixXd& truths, const TaskWeights& w);

}  // namespace ser
