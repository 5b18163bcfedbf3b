#include "ser/lld.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ser/csv.hpp"
#include "ser/fft.hpp"

namespace ser {

namespace descriptors {

const std::vector<std::string>& native() {
    static const std::vector<std::string> names = {
        "loudness",   "alpha_ratio", "hammarberg", "slope_0_500", "slope_500_1500",
        "spectral_flux", "mfcc1",    "mfcc2",      "mfcc3",       "mfcc4",
        "f0",         "jitter",      "shimmer",    "hnr"};
    return names;
}

const std::vector<std::string>& imported_only() {
    static const std::vector<std::string> names = {
        "h1_h2",        "h1_a3",        "f1_frequency", "f1_bandwidth", "f1_amplitude",
        "f2_frequency", "f2_amplitude", "f3_frequency", "f3_amplitude"};
    return names;
}

const std::vector<std::string>& full_set() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> all = native();
        const auto& rest = imported_only();
        all.insert(all.end(), rest.begin(), rest.end());
        return all;
    }();
    return names;
}

}  // namespace descriptors

int LldMatrix::column(const std::string& name) const {
    for (std::size_t i = 0; i < descriptor_names.size(); ++i) {
        if (descriptor_names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

double clamp_db(double v, double cap) { return std::clamp(v, -cap, cap); }

double band_energy(std::span<const double> magnitude, double bin_hz, double lo, double hi,
                   bool exclusive_lo) {
    double e = 0.0;
    for (std::size_t k = 0; k < magnitude.size(); ++k) {
        const double f = bin_hz * static_cast<double>(k);
        const bool in = exclusive_lo ? (f > lo && f <= hi) : (f >= lo && f <= hi);
        if (in) e += magnitude[k] * magnitude[k];
    }
    return e;
}

double band_peak(std::span<const double> magnitude, double bin_hz, double lo, double hi,
                 bool exclusive_lo) {
    double p = 0.0;
    for (std::size_t k = 0; k < magnitude.size(); ++k) {
        const double f = bin_hz * static_cast<double>(k);
        const bool in = exclusive_lo ? (f > lo && f <= hi) : (f >= lo && f <= hi);
        if (in) p = std::max(p, magnitude[k]);
    }
    return p;
}

double log_ratio_db(double num, double den, double scale, double cap) {
    if (num <= 0.0 && den <= 0.0) return 0.0;
    if (den <= 0.0) return cap;
    if (num <= 0.0) return -cap;
    return clamp_db(scale * std::log10(num / den), cap);
}

// Least-squares slope of dB power against frequency over one band.
double band_slope(std::span<const double> magnitude, double bin_hz, double lo, double hi) {
    constexpr double kPowerFloor = 1e-30;
    double sum_f = 0.0, sum_y = 0.0;
    std::size_t count = 0;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < magnitude.size(); ++k) {
        const double f = bin_hz * static_cast<double>(k);
        if (f < lo || f > hi) continue;
        const double power = magnitude[k] * magnitude[k];
        const double y = 10.0 * std::log10(std::max(power, kPowerFloor));
        pts.emplace_back(f, y);
        sum_f += f;
        sum_y += y;
        ++count;
    }
    if (count < 2) return 0.0;
    const double mean_f = sum_f / static_cast<double>(count);
    const double mean_y = sum_y / static_cast<double>(count);
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [f, y] : pts) {
        sxy += (f - mean_f) * (y - mean_y);
        sxx += (f - mean_f) * (f - mean_f);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

struct MelFilterbank {
    // weights[i] holds (bin, weight) pairs of filter i.
    std::vector<std::vector<std::pair<std::size_t, double>>> weights;

    static double to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
    static double to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

    MelFilterbank(int n_filters, double lo_hz, double hi_hz, std::size_t fft_size,
                  double sample_rate) {
        const double lo = to_mel(lo_hz);
        const double hi = to_mel(hi_hz);
        std::vector<double> centers_hz(n_filters + 2);
        for (int i = 0; i < n_filters + 2; ++i) {
            centers_hz[i] = to_hz(lo + (hi - lo) * i / (n_filters + 1));
        }
        weights.resize(n_filters);
        const std::size_t n_bins = fft_size / 2 + 1;
        for (int i = 0; i < n_filters; ++i) {
            const double left = centers_hz[i];
            const double center = centers_hz[i + 1];
            const double right = centers_hz[i + 2];
            for (std::size_t k = 0; k < n_bins; ++k) {
                const double f = sample_rate * static_cast<double>(k) / fft_size;
                double w = 0.0;
                if (f > left && f < center) {
                    w = (f - left) / (center - left);
                } else if (f >= center && f < right) {
                    w = (right - f) / (right - center);
                }
                if (w > 0.0) weights[i].emplace_back(k, w);
            }
        }
    }

    void apply(std::span<const double> magnitude, std::vector<double>& energies) const {
        energies.assign(weights.size(), 0.0);
        for (std::size_t i = 0; i < weights.size(); ++i) {
            double e = 0.0;
            for (const auto& [bin, w] : weights[i]) e += w * magnitude[bin] * magnitude[bin];
            energies[i] = e;
        }
    }
};

// Normalized cross-correlation pitch detector. Returns the peak lag (with
// parabolic refinement) and its correlation value.
struct PitchResult {
    double f0 = 0.0;
    double correlation = 0.0;
    bool voiced = false;
};

PitchResult detect_pitch(std::span<const double> frame, const LldConfig& cfg, const Fft& acf_fft) {
    PitchResult result;
    const std::size_t n = frame.size();

    double mean = 0.0;
    for (double x : frame) mean += x;
    mean /= static_cast<double>(n);

    std::vector<double> centered(n);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = frame[i] - mean;
        energy += centered[i] * centered[i];
    }
    if (energy <= 0.0) return result;

    // Raw autocorrelation via FFT of the zero-padded frame.
    std::vector<std::complex<double>> buf(acf_fft.size(), {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) buf[i] = {centered[i], 0.0};
    acf_fft.forward(buf);
    for (auto& c : buf) c = {std::norm(c), 0.0};
    acf_fft.inverse(buf);

    // Prefix sums of squares for the normalization terms.
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + centered[i] * centered[i];

    const std::size_t lag_min =
        std::max<std::size_t>(2, static_cast<std::size_t>(cfg.sample_rate / cfg.f0_max_hz));
    const std::size_t lag_max = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(cfg.sample_rate / cfg.f0_min_hz));
    if (lag_min >= lag_max) return result;

    std::vector<double> nccf(lag_max + 1, 0.0);
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
        const double e_head = prefix[n - lag];
        const double e_tail = prefix[n] - prefix[lag];
        const double denom = std::sqrt(e_head * e_tail);
        if (denom > 0.0) nccf[lag] = buf[lag].real() / denom;
    }

    double best_value = 0.0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) best_value = std::max(best_value, nccf[lag]);
    if (best_value < cfg.voicing_threshold) return result;

    // Pick the smallest local maximum close to the global one; this prefers
    // the fundamental over its octave-down twin in periodic signals.
    std::size_t best_lag = 0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
        const double v = nccf[lag];
        const bool local_max = (lag == lag_min || v >= nccf[lag - 1]) &&
                               (lag == lag_max || v >= nccf[lag + 1]);
        if (local_max && v >= 0.9 * best_value) {
            best_lag = lag;
            break;
        }
    }
    if (best_lag == 0) return result;

    double refined = static_cast<double>(best_lag);
    if (best_lag > lag_min && best_lag < lag_max) {
        const double y0 = nccf[best_lag - 1];
        const double y1 = nccf[best_lag];
        const double y2 = nccf[best_lag + 1];
        const double denom = y0 - 2.0 * y1 + y2;
        if (std::abs(denom) > 1e-12) {
            const double delta = 0.5 * (y0 - y2) / denom;
            if (std::abs(delta) < 1.0) refined += delta;
        }
    }

    result.f0 = cfg.sample_rate / refined;
    result.correlation = nccf[best_lag];
    result.voiced = true;
    return result;
}

// Period-mark walk used for jitter and shimmer: locate waveform peaks spaced
// roughly one pitch period apart.
struct PerturbationMeasures {
    double jitter = 0.0;
    double shimmer = 0.0;
};

PerturbationMeasures jitter_shimmer(std::span<const double> frame, double f0, int sample_rate) {
    PerturbationMeasures out;
    if (f0 <= 0.0) return out;
    const std::size_t n = frame.size();
    const std::size_t period = static_cast<std::size_t>(std::lround(sample_rate / f0));
    if (period == 0 || period >= n) return out;

    std::vector<std::size_t> marks;
    std::size_t p = 0;
    double best = frame[0];
    for (std::size_t i = 0; i < std::min(period, n); ++i) {
        if (frame[i] > best) {
            best = frame[i];
            p = i;
        }
    }
    marks.push_back(p);
    const std::size_t radius = std::max<std::size_t>(1, period / 4);
    while (true) {
        const std::size_t expected = marks.back() + period;
        if (expected + radius >= n) break;
        const std::size_t lo = expected - radius;
        const std::size_t hi = expected + radius;
        std::size_t arg = lo;
        for (std::size_t i = lo; i <= hi; ++i) {
            if (frame[i] > frame[arg]) arg = i;
        }
        marks.push_back(arg);
    }
    if (marks.size() < 3) return out;

    std::vector<double> periods;
    std::vector<double> amplitudes;
    for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
        periods.push_back(static_cast<double>(marks[i + 1] - marks[i]));
        double a = 0.0;
        for (std::size_t j = marks[i]; j < marks[i + 1]; ++j) a = std::max(a, std::abs(frame[j]));
        amplitudes.push_back(a);
    }

    double mean_period = 0.0;
    for (double v : periods) mean_period += v;
    mean_period /= static_cast<double>(periods.size());
    double dp = 0.0;
    for (std::size_t i = 0; i + 1 < periods.size(); ++i) dp += std::abs(periods[i + 1] - periods[i]);
    if (periods.size() > 1 && mean_period > 0.0) {
        out.jitter = dp / static_cast<double>(periods.size() - 1) / mean_period;
    }

    double mean_amp = 0.0;
    for (double v : amplitudes) mean_amp += v;
    mean_amp /= static_cast<double>(amplitudes.size());
    double da = 0.0;
    for (std::size_t i = 0; i + 1 < amplitudes.size(); ++i) {
        da += std::abs(amplitudes[i + 1] - amplitudes[i]);
    }
    if (amplitudes.size() > 1 && mean_amp > 0.0) {
        out.shimmer = da / static_cast<double>(amplitudes.size() - 1) / mean_amp;
    }
    return out;
}

}  // namespace

BandMeasures spectral_band_measures(std::span<const double> magnitude, double sample_rate,
                                    double db_cap) {
    if (magnitude.size() < 2) throw std::invalid_argument("spectrum too short");
    const std::size_t fft_size = 2 * (magnitude.size() - 1);
    const double bin_hz = sample_rate / static_cast<double>(fft_size);

    BandMeasures m;
    const double e_low = band_energy(magnitude, bin_hz, 50.0, 1000.0, false);
    const double e_high = band_energy(magnitude, bin_hz, 1000.0, 5000.0, true);
    m.alpha_ratio = log_ratio_db(e_low, e_high, 10.0, db_cap);

    const double p_low = band_peak(magnitude, bin_hz, 0.0, 2000.0, false);
    const double p_high = band_peak(magnitude, bin_hz, 2000.0, 5000.0, true);
    m.hammarberg = log_ratio_db(p_low, p_high, 20.0, db_cap);

    m.slope_0_500 = band_slope(magnitude, bin_hz, 0.0, 500.0);
    m.slope_500_1500 = band_slope(magnitude, bin_hz, 500.0, 1500.0);
    return m;
}

LldMatrix extract_lld(const AudioBuffer& buf, const LldConfig& cfg) {
    if (buf.sample_rate != cfg.sample_rate) {
        throw std::invalid_argument("extract_lld expects a buffer at " +
                                    std::to_string(cfg.sample_rate) + " Hz; resample first");
    }
    const std::size_t n = buf.samples.size();
    if (n < cfg.window_length) {
        throw std::invalid_argument("buffer shorter than one analysis window");
    }

    const std::size_t n_frames = (n - cfg.window_length) / cfg.hop_length + 1;
    const auto& names = descriptors::native();

    LldMatrix out;
    out.descriptor_names = names;
    out.frame_hop = static_cast<double>(cfg.hop_length) / cfg.sample_rate;
    out.frame_window = static_cast<double>(cfg.window_length) / cfg.sample_rate;
    out.values.resize(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(names.size()));

    const Fft spec_fft(cfg.fft_size);
    std::size_t acf_size = 1;
    while (acf_size < 2 * cfg.window_length) acf_size <<= 1;
    const Fft acf_fft(acf_size);

    std::vector<double> hann(cfg.window_length);
    for (std::size_t i = 0; i < cfg.window_length; ++i) {
        hann[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (cfg.window_length - 1)));
    }

    const MelFilterbank mel(cfg.mel_filters, cfg.mel_low_hz, cfg.mel_high_hz, cfg.fft_size,
                            cfg.sample_rate);
    constexpr double kLogFloor = 1e-10;

    std::vector<double> windowed(cfg.window_length);
    std::vector<double> mel_energies;
    std::vector<double> prev_magnitude;

    for (std::size_t fi = 0; fi < n_frames; ++fi) {
        const std::size_t start = fi * cfg.hop_length;
        const std::span<const double> frame(buf.samples.data() + start, cfg.window_length);

        double sum_sq = 0.0;
        for (double x : frame) sum_sq += x * x;
        const double rms = std::sqrt(sum_sq / static_cast<double>(cfg.window_length));
        const double loudness = rms > 0.0 ? std::max(0.0, cfg.db_cap + 20.0 * std::log10(rms)) : 0.0;

        for (std::size_t i = 0; i < cfg.window_length; ++i) windowed[i] = frame[i] * hann[i];
        const std::vector<double> magnitude = spec_fft.magnitude(windowed);

        const BandMeasures bands = spectral_band_measures(magnitude, cfg.sample_rate, cfg.db_cap);

        double flux = 0.0;
        if (fi > 0) {
            double acc = 0.0;
            for (std::size_t k = 0; k < magnitude.size(); ++k) {
                const double d = magnitude[k] - prev_magnitude[k];
                acc += d * d;
            }
            flux = std::sqrt(acc);
        }
        prev_magnitude = magnitude;

        mel.apply(magnitude, mel_energies);
        const int n_mel = cfg.mel_filters;
        std::vector<double> log_mel(n_mel);
        for (int i = 0; i < n_mel; ++i) log_mel[i] = std::log(std::max(mel_energies[i], kLogFloor));
        std::vector<double> mfcc(cfg.mfcc_count, 0.0);
        const double dct_scale = std::sqrt(2.0 / n_mel);
        for (int j = 1; j <= cfg.mfcc_count; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n_mel; ++i) {
                acc += log_mel[i] * std::cos(M_PI * j * (i + 0.5) / n_mel);
            }
            mfcc[j - 1] = dct_scale * acc;
        }

        const PitchResult pitch = detect_pitch(frame, cfg, acf_fft);
        double f0 = 0.0, jitter = 0.0, shimmer = 0.0, hnr = 0.0;
        if (pitch.voiced) {
            f0 = pitch.f0;
            const double r = std::clamp(pitch.correlation, 1e-12, 1.0 - 1e-12);
            hnr = clamp_db(10.0 * std::log10(r / (1.0 - r)), cfg.db_cap);
            const PerturbationMeasures p = jitter_shimmer(frame, f0, cfg.sample_rate);
            jitter = p.jitter;
            shimmer = p.shimmer;
        }

        const Eigen::Index r = static_cast<Eigen::Index>(fi);
        out.values(r, 0) = loudness;
        out.values(r, 1) = bands.alpha_ratio;
        out.values(r, 2) = bands.hammarberg;
        out.values(r, 3) = bands.slope_0_500;
        out.values(r, 4) = bands.slope_500_1500;
        out.values(r, 5) = flux;
        out.values(r, 6) = mfcc[0];
        out.values(r, 7) = mfcc[1];
        out.values(r, 8) = mfcc[2];
        out.values(r, 9) = mfcc[3];
        out.values(r, 10) = f0;
        out.values(r, 11) = jitter;
        out.values(r, 12) = shimmer;
        out.values(r, 13) = hnr;
    }
    return out;
}

LldMatrix import_lld_csv(const std::string& path, bool require_full_gemaps) {
    const CsvTable table = read_csv(path);
    if (table.header.empty()) {
        throw std::runtime_error(path + ": missing header row");
    }
    for (const auto& cell : table.header) {
        double ignored;
        if (parse_double(cell, ignored)) {
            throw std::runtime_error(path + ": missing header row (numeric first line)");
        }
    }

    if (require_full_gemaps) {
        const auto& expected = descriptors::full_set();
        const std::set<std::string> have(table.header.begin(), table.header.end());
        std::vector<std::string> missing;
        for (const auto& name : expected) {
            if (have.find(name) == have.end()) missing.push_back(name);
        }
        if (!missing.empty()) {
            std::ostringstream msg;
            msg << path << ": full-GeMAPS import is missing descriptor";
            if (missing.size() > 1) msg << 's';
            for (std::size_t i = 0; i < missing.size(); ++i) {
                msg << (i == 0 ? ": " : ", ") << missing[i];
            }
            throw std::runtime_error(msg.str());
        }
        if (table.header.size() != expected.size()) {
            throw std::runtime_error(path + ": descriptor count mismatch, expected " +
                                     std::to_string(expected.size()) + " columns, found " +
                                     std::to_string(table.header.size()));
        }
    }

    LldMatrix out;
    out.descriptor_names = table.header;
    out.values.resize(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size()) {
            throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " has " +
                                     std::to_string(row.size()) + " cells, expected " +
                                     std::to_string(table.header.size()));
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            double v;
            if (!parse_double(row[c], v)) {
                throw std::runtime_error(path + ": non-numeric cell at row " +
                                         std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                                         " (" + table.header[c] + "): '" + row[c] + "'");
            }
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return out;
}

void write_lld_csv(const std::string& path, const LldMatrix& matrix) {
    CsvTable table;
    table.header = matrix.descriptor_names;
    table.rows.reserve(static_cast<std::size_t>(matrix.frames()));
    for (Eigen::Index r = 0; r < matrix.frames(); ++r) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(matrix.dims()));
        for (Eigen::Index c = 0; c < matrix.dims(); ++c) {
            row.push_back(format_double(matrix.values(r, c)));
        }
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

}  // namespace ser
