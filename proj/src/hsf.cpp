#include "ser/hsf.hpp"

#include <cmath>
#include <stdexcept>

#include "ser/csv.hpp"

namespace ser {

FeatureVector aggregate_mean_std(const LldMatrix& lld) {
    const Eigen::Index n = lld.frames();
    const Eigen::Index d = lld.dims();
    if (n < 1 || d < 1) throw std::invalid_argument("aggregate_mean_std: empty matrix");

    FeatureVector fv;
    fv.values.resize(static_cast<std::size_t>(2 * d));
    fv.layout.reserve(static_cast<std::size_t>(2 * d));

    for (Eigen::Index c = 0; c < d; ++c) {
        double mean = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) mean += lld.values(r, c);
        mean /= static_cast<double>(n);
        fv.values[static_cast<std::size_t>(c)] = mean;
        fv.layout.push_back("mean:" + lld.descriptor_names[static_cast<std::size_t>(c)]);
    }
    for (Eigen::Index c = 0; c < d; ++c) {
        const double mean = fv.values[static_cast<std::size_t>(c)];
        double var = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const double diff = lld.values(r, c) - mean;
            var += diff * diff;
        }
        var /= static_cast<double>(n);
        fv.values[static_cast<std::size_t>(d + c)] = std::sqrt(var);
    }
    for (Eigen::Index c = 0; c < d; ++c) {
        fv.layout.push_back("std:" + lld.descriptor_names[static_cast<std::size_t>(c)]);
    }
    return fv;
}

FeatureVector append_silence(const FeatureVector& fv, const SilenceResult& silence) {
    if (fv.has_silence()) {
        throw std::invalid_argument("append_silence: vector already carries a silence slot");
    }
    FeatureVector out = fv;
    out.values.push_back(silence.fraction);
    out.layout.push_back("silence");
    return out;
}

FeatureMatrix assemble_matrix(const std::vector<std::string>& utterance_ids,
                              const std::vector<FeatureVector>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("assemble_matrix: no utterances");
    if (utterance_ids.size() != vectors.size()) {
        throw std::invalid_argument("assemble_matrix: id/vector count mismatch");
    }

    const auto& layout = vectors.front().layout;
    for (std::size_t i = 1; i < vectors.size(); ++i) {
        if (vectors[i].layout != layout) {
            throw std::invalid_argument("assemble_matrix: layout mismatch at utterance '" +
                                        utterance_ids[i] + "' (" +
                                        std::to_string(vectors[i].values.size()) + " vs " +
                                        std::to_string(layout.size()) + " features)");
        }
    }

    FeatureMatrix m;
    m.utterance_ids = utterance_ids;
    m.layout = layout;
    m.values.resize(static_cast<Eigen::Index>(vectors.size()),
                    static_cast<Eigen::Index>(layout.size()));
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        for (std::size_t c = 0; c < layout.size(); ++c) {
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                vectors[r].values[c];
        }
    }
    return m;
}

void write_feature_csv(const std::string& path, const FeatureMatrix& matrix) {
    CsvTable table;
    table.header.push_back("utt_id");
    table.header.insert(table.header.end(), matrix.layout.begin(), matrix.layout.end());
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(matrix.cols()) + 1);
        row.push_back(matrix.utterance_ids[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
            row.push_back(format_double(matrix.values(r, c)));
        }
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

FeatureMatrix read_feature_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header.empty() || table.header.front() != "utt_id") {
        throw std::runtime_error(path + ": feature CSV must start with an utt_id column");
    }
    FeatureMatrix m;
    m.layout.assign(table.header.begin() + 1, table.header.end());
    m.values.resize(static_cast<Eigen::Index>(table.rows.size()),
                    static_cast<Eigen::Index>(m.layout.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size()) {
            throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " width mismatch");
        }
        m.utterance_ids.push_back(row[0]);
        for (std::size_t c = 1; c < row.size(); ++c) {
            double v;
            if (!parse_double(row[c], v)) {
                throw std::runtime_error(path + ": non-numeric cell at row " +
                                         std::to_string(r + 1) + ", column " + std::to_string(c + 1));
            }
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = v;
        }
    }
    return m;
}

}  // namespace ser
