#include "ser/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace ser {

Fft::Fft(std::size_t size) : n_(size) {
    if (n_ == 0 || (n_ & (n_ - 1)) != 0) {
        throw std::invalid_argument("FFT size must be a power of two");
    }
    reversed_.resize(n_);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n_) ++bits;
    for (std::size_t i = 0; i < n_; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b) {
            if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
        }
        reversed_[i] = r;
    }
    twiddle_.resize(n_ / 2);
    for (std::size_t k = 0; k < n_ / 2; ++k) {
        const double angle = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n_);
        twiddle_[k] = {std::cos(angle), std::sin(angle)};
    }
}

void Fft::transform(std::vector<std::complex<double>>& data, bool inverse_dir) const {
    if (data.size() != n_) throw std::invalid_argument("FFT input size mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j = reversed_[i];
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len >> 1;
        const std::size_t step = n_ / len;
        for (std::size_t start = 0; start < n_; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                std::complex<double> w = twiddle_[k * step];
                if (inverse_dir) w = std::conj(w);
                const std::complex<double> u = data[start + k];
                const std::complex<double> v = data[start + k + half] * w;
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
    }
    if (inverse_dir) {
        const double scale = 1.0 / static_cast<double>(n_);
        for (auto& x : data) x *= scale;
    }
}

void Fft::forward(std::vector<std::complex<double>>& data) const { transform(data, false); }

void Fft::inverse(std::vector<std::complex<double>>& data) const { transform(data, true); }

std::vector<double> Fft::magnitude(const std::vector<double>& frame) const {
    std::vector<std::complex<double>> buf(n_, {0.0, 0.0});
    const std::size_t m = std::min(frame.size(), n_);
    for (std::size_t i = 0; i < m; ++i) buf[i] = {frame[i], 0.0};
    transform(buf, false);
    std::vector<double> mag(n_ / 2 + 1);
    for (std::size_t k = 0; k <= n_ / 2; ++k) mag[k] = std::abs(buf[k]);
    return mag;
}

}  // namespace ser
