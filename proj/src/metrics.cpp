#include "ser/metrics.hpp"

#include <json.hpp>
#include <stdexcept>

namespace ser {

namespace {

struct ColumnStats {
    double mean_p = 0.0;
    double mean_t = 0.0;
    double var_p = 0.0;
    double var_t = 0.0;
    double cov = 0.0;
    std::size_t n = 0;

    bool degenerate() const { return var_p == 0.0 || var_t == 0.0; }

    double denominator() const {
        const double shift = mean_p - mean_t;
        return var_p + var_t + shift * shift;
    }

    double value() const {
        if (degenerate()) return 0.0;
        return 2.0 * cov / denominator();
    }
};

ColumnStats column_stats(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("ccc: length mismatch");
    if (pred.size() < 2) throw std::invalid_argument("ccc: need at least 2 samples");

    ColumnStats s;
    s.n = pred.size();
    for (std::size_t i = 0; i < s.n; ++i) {
        s.mean_p += pred[i];
        s.mean_t += truth[i];
    }
    s.mean_p /= static_cast<double>(s.n);
    s.mean_t /= static_cast<double>(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double dp = pred[i] - s.mean_p;
        const double dt = truth[i] - s.mean_t;
        s.var_p += dp * dp;
        s.var_t += dt * dt;
        s.cov += dp * dt;
    }
    s.var_p /= static_cast<double>(s.n);
    s.var_t /= static_cast<double>(s.n);
    s.cov /= static_cast<double>(s.n);
    return s;
}

ColumnStats column_stats(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& truths, int col) {
    return column_stats(std::span<const double>(preds.col(col).data(), preds.rows()),
                        std::span<const double>(truths.col(col).data(), truths.rows()));
}

}  // namespace

double ccc(std::span<const double> pred, std::span<const double> truth, bool* degenerate) {
    const ColumnStats s = column_stats(pred, truth);
    if (degenerate != nullptr) *degenerate = s.degenerate();
    return s.value();
}

CccReport evaluate(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& truths) {
    if (preds.rows() != truths.rows() || preds.cols() != 3 || truths.cols() != 3) {
        throw std::invalid_argument("evaluate: expected matching N x 3 matrices");
    }
    CccReport report;
    double* values[3] = {&report.valence, &report.arousal, &report.dominance};
    for (int c = 0; c < 3; ++c) {
        const ColumnStats s = column_stats(preds, truths, c);
        *values[c] = s.value();
        report.degenerate[c] = s.degenerate();
    }
    report.mean = (report.valence + report.arousal + report.dominance) / 3.0;
    return report;
}

double multitask_loss(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& truths,
                      const TaskWeights& w) {
    const CccReport r = evaluate(preds, truths);
    return w.valence * (1.0 - r.valence) + w.arousal * (1.0 - r.arousal) +
           w.dominance * (1.0 - r.dominance);
}

Eigen::MatrixXd multitask_loss_gradient(const Eigen::MatrixXd& preds,
                                        const Eigen::MatrixXd& truths, const TaskWeights& w) {
    if (preds.rows() != truths.rows() || preds.cols() != 3 || truths.cols() != 3) {
        throw std::invalid_argument("loss gradient: expected matching N x 3 matrices");
    }
    const double weights[3] = {w.valence, w.arousal, w.dominance};
    const double n = static_cast<double>(preds.rows());
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(preds.rows(), 3);

    for (int c = 0; c < 3; ++c) {
        const ColumnStats s = column_stats(preds, truths, c);
        if (s.degenerate()) continue;
        const double denom = s.denominator();
        const double shift = s.mean_p - s.mean_t;
        // dCCC/dp_i = 2/(N*D^2) * [(t_i - mean_t)*D - 2*cov*((p_i - mean_p) + shift)]
        for (Eigen::Index i = 0; i < preds.rows(); ++i) {
            const double dp = preds(i, c) - s.mean_p;
            const double dt = truths(i, c) - s.mean_t;
            const double dccc = 2.0 / (n * denom * denom) * (dt * denom - 2.0 * s.cov * (dp + shift));
            grad(i, c) = -weights[c] * dccc;
        }
    }
    return grad;
}

std::string CccReport::to_json() const {
    nlohmann::ordered_json j;
    j["valence"] = valence;
    j["arousal"] = arousal;
    j["dominance"] = dominance;
    j["mean"] = mean;
    j["degenerate_flags"] = degenerate;
    return j.dump();
}

CccReport CccReport::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    CccReport r;
    r.valence = j.at("valence").get<double>();
    r.arousal = j.at("arousal").get<double>();
    r.dominance = j.at("dominance").get<double>();
    r.mean = j.at("mean").get<double>();
    const auto& flags = j.at("degenerate_flags");
    for (std::size_t i = 0; i < 3 && i < flags.size(); ++i) r.degenerate[i] = flags[i].get<bool>();
    return r;
}

}  // namespace ser
