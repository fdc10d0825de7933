// Fourier amplitude mixing: novel-domain samples built by interpolating
// amplitude spectra while keeping the phase of one parent.
#pragma once

#include <complex>
#include <vector>

#include "dcg/rng.hpp"
#include "dcg/sample.hpp"

namespace dcg {

// Per-channel modulus/argument of the unnormalized forward 2-D DFT.
struct SpectrumPair {
    ImageShape shape;
    std::vector<double> amplitude;  // non-negative
    std::vector<double> phase;      // atan2 convention, atan2(0,0) = 0
};

// In-place forward/inverse 1-D transform; radix-2 when n is a power of
// two, naive O(n^2) DFT otherwise. Unnormalized forward; inverse
// divides by n.
void fft1d(std::vector<std::complex<double>>& a, bool inverse);

SpectrumPair dft2(const std::vector<double>& features, const ImageShape& shape);

// Reconstruct image pixels from (amplitude, phase); real part of the
// inverse transform, no clipping.
std::vector<double> idft2(const SpectrumPair& spectrum);

// output = idft2((1-lambda)*A_i + lambda*A_j, phase_i), clipped to
// [0,1]; label and semantics follow the phase parent x_i.
Sample amplitude_mix(const Sample& x_i, const Sample& x_j, double lambda,
                     std::int64_t new_sample_id, int new_domain_id);

// Random disjoint pairing; each pair (i,j) yields amplitude_mix(i,j)
// and amplitude_mix(j,i) with lambda ~ Uniform(0, eta). Every output
// receives a fresh domain id starting at `first_domain_id`.
std::vector<Sample> augment_batch(const std::vector<Sample>& batch, Rng& rng, double eta,
                                  std::int64_t first_sample_id, int first_domain_id);

}  // namespace dcg
