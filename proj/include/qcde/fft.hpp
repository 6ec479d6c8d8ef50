#pragma once

#include <complex>
#include <span>

namespace qcde::fft {

//! In-place unnormalized 2-d DFT of an n x n row-major array.
//! `sign` is -1 for the forward transform and +1 for the backward one.
//! Plans are cached per size; execution is safe from several threads.
void transform(std::span<std::complex<double>> data, int n, int sign);

inline void forward(std::span<std::complex<double>> data, int n)
{
  transform(data, n, -1);
}

inline void backward(std::span<std::complex<double>> data, int n)
{
  transform(data, n, +1);
}

} // namespace qcde::fft
