#pragma once

#include <complex>
#include <vector>

#include "svpsf/image.hpp"

namespace svpsf::fft {

// Smallest integer >= n whose prime factors are all in {2, 3, 5, 7}.
int fast_size(int n);

// Half-complex spectrum of a real field of size width x height, as produced by a
// real-to-complex transform: (width / 2 + 1) * height coefficients, row-major.
struct Spectrum {
  int width = 0;
  int height = 0;
  std::vector<std::complex<double>> data;
};

Spectrum forward(const Image& field);
// Unnormalized inverse scaled by 1 / (width * height), so inverse(forward(f)) == f.
Image inverse(Spectrum spectrum);

// Spectrum of a centered odd-sized kernel embedded into a field_w x field_h torus with
// its center at the origin, so multiplication implements "same"-aligned convolution.
Spectrum kernel_spectrum(const Image& kernel, int field_w, int field_h);

// a *= b (or a *= conj(b), i.e. correlation with the kernel of b).
void multiply(Spectrum& a, const Spectrum& b, bool conjugate_b = false);
// acc += a * b
void multiply_add(Spectrum& acc, const Spectrum& a, const Spectrum& b, bool conjugate_b = false);

// Full complex 2D transform of a square or rectangular grid (used for pupil -> PSF).
std::vector<std::complex<double>> forward_complex(std::vector<std::complex<double>> field, int width,
                                                  int height);

}  // namespace svpsf::fft
