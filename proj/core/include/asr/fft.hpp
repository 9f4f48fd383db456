#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace asr::fft {

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 DIT transform; size must be a power of two.
void transform(std::span<std::complex<double>> data);

// |X[k]|^2 for k in [0, n/2], input zero-padded to n.
std::vector<double> power_spectrum(std::span<const double> frame, std::size_t n);

}  // namespace asr::fft
