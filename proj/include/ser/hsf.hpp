#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ser/lld.hpp"
#include "ser/silence.hpp"

namespace ser {

// Per-utterance functional vector. Layout is the ordered tag list
// mean:<name> x D, std:<name> x D, then optionally "silence" last, so the
// with- and without-silence variants differ only by the trailing column.
struct FeatureVector {
    std::vector<double> values;
    std::vector<std::string> layout;

    std::size_t size() const { return values.size(); }
    bool has_silence() const { return !layout.empty() && layout.back() == "silence"; }
};

// Column-wise arithmetic mean and population standard deviation (divide by N).
FeatureVector aggregate_mean_std(const LldMatrix& lld);

// Returns a copy with the silence fraction appended last. Appending twice is
// an error.
FeatureVector append_silence(const FeatureVector& fv, const SilenceResult& silence);

// Row-per-utterance matrix plus the shared layout manifest.
struct FeatureMatrix {
    std::vector<std::string> utterance_ids;
    Eigen::MatrixXd values;
    std::vector<std::string> layout;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// Stacks vectors that share one layout; mixed layouts raise an error naming
// the first mismatching utterance.
FeatureMatrix assemble_matrix(const std::vector<std::string>& utterance_ids,
                              const std::vector<FeatureVector>& vectors);

// CSV form: header is utt_id followed by the layout tags.
void write_feature_csv(const std::string& path, const FeatureMatrix& matrix);
FeatureMatrix read_feature_csv(const std::string& path);

}  // namespace ser
