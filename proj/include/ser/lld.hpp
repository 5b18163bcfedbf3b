#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "ser/audio.hpp"

namespace ser {

// Frame-level descriptor matrix: one row per frame, one column per named
// descriptor. Cells are finite after extraction; unvoiced frames carry 0 in
// the F0 family rather than NaN.
struct LldMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> descriptor_names;
    double frame_hop = 0.010;
    double frame_window = 0.025;

    Eigen::Index frames() const { return values.rows(); }
    Eigen::Index dims() const { return values.cols(); }
    int column(const std::string& name) const;
};

namespace descriptors {
// 14 natively computed descriptors, in extraction column order.
const std::vector<std::string>& native();
// The 9 remaining names, available only through CSV import.
const std::vector<std::string>& imported_only();
// native + imported_only, 23 names.
const std::vector<std::string>& full_set();
}  // namespace descriptors

struct LldConfig {
    int sample_rate = 16000;
    std::size_t window_length = 400;  // 25 ms
    std::size_t hop_length = 160;     // 10 ms
    std::size_t fft_size = 512;

    // Mel filterbank for the 4 MFCCs.
    int mel_filters = 26;
    double mel_low_hz = 20.0;
    double mel_high_hz = 8000.0;
    int mfcc_count = 4;

    // Autocorrelation pitch search with a harmonicity gate.
    double f0_min_hz = 60.0;
    double f0_max_hz = 500.0;
    double voicing_threshold = 0.45;

    // Saturation for log-ratio measures, keeps the matrix free of infinities.
    double db_cap = 120.0;
};

struct BandMeasures {
    double alpha_ratio = 0.0;      // dB, energy 50-1000 Hz vs 1-5 kHz
    double hammarberg = 0.0;       // dB, peak 0-2 kHz vs 2-5 kHz
    double slope_0_500 = 0.0;      // dB/Hz least-squares slope
    double slope_500_1500 = 0.0;   // dB/Hz
};

// Band algebra over a magnitude spectrum (DC bin included, size fft/2+1).
// Empty bands saturate: one-sided energy caps at +/-db_cap, both sides empty
// give 0.
BandMeasures spectral_band_measures(std::span<const double> magnitude, double sample_rate,
                                    double db_cap = 120.0);

// Extracts the 14 native descriptors over 25 ms Hann-windowed frames hopped
// by 10 ms. The buffer must already be at cfg.sample_rate and at least one
// window long.
LldMatrix extract_lld(const AudioBuffer& buf, const LldConfig& cfg = {});

// Reads a descriptor matrix from CSV (header row of names, one frame per
// line). With require_full_gemaps the header must carry exactly the 23
// canonical names.
LldMatrix import_lld_csv(const std::string& path, bool require_full_gemaps = false);

void write_lld_csv(const std::string& path, const LldMatrix& matrix);

}  // namespace ser
