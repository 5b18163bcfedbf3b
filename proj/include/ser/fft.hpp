#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace ser {

// Iterative radix-2 FFT for power-of-two sizes. Twiddles and the bit-reversal
// permutation are precomputed at construction so one plan can be reused across
// many frames.
class Fft {
public:
    explicit Fft(std::size_t size);

    std::size_t size() const { return n_; }

    // In-place forward transform; data.size() must equal size().
    void forward(std::vector<std::complex<double>>& data) const;

    // In-place inverse transform (includes the 1/N scale).
    void inverse(std::vector<std::complex<double>>& data) const;

    // Magnitude spectrum of a real frame, bins 0..n/2 inclusive. The frame is
    // zero-padded (or truncated) to the plan size.
    std::vector<double> magnitude(const std::vector<double>& frame) const;

private:
    std::size_t n_;
    std::vector<std::size_t> reversed_;
    std::vector<std::complex<double>> twiddle_;

    void transform(std::vector<std::complex<double>>& data, bool inverse_dir) const;
};

}  // namespace ser
