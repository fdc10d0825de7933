#include "dcg/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dcg/tensor.hpp"

namespace dcg {

namespace {

bool is_pow2(size_t n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

void dft_naive(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t t = 0; t < n; ++t) {
            double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k * t) /
                         static_cast<double>(n);
            acc += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    a = std::move(out);
}

// Forward/inverse 2-D transform of one channel, in place over a
// row-major H x W complex grid.
void fft2d(std::vector<std::complex<double>>& grid, int h, int w, bool inverse) {
    std::vector<std::complex<double>> line;
    line.resize(static_cast<size_t>(w));
    for (int r = 0; r < h; ++r) {
        std::copy_n(grid.begin() + static_cast<size_t>(r) * w, w, line.begin());
        fft1d(line, inverse);
        std::copy_n(line.begin(), w, grid.begin() + static_cast<size_t>(r) * w);
    }
    line.resize(static_cast<size_t>(h));
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) line[static_cast<size_t>(r)] = grid[static_cast<size_t>(r) * w + c];
        fft1d(line, inverse);
        for (int r = 0; r < h; ++r) grid[static_cast<size_t>(r) * w + c] = line[static_cast<size_t>(r)];
    }
}

}  // namespace

void fft1d(std::vector<std::complex<double>>& a, bool inverse) {
    if (a.empty()) throw ContractError("fft1d: empty signal");
    if (is_pow2(a.size()))
        fft_radix2(a, inverse);
    else
        dft_naive(a, inverse);
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(a.size());
        for (auto& x : a) x *= inv;
    }
}

SpectrumPair dft2(const std::vector<double>& features, const ImageShape& shape) {
    if (shape.numel() <= 0 || features.size() != static_cast<size_t>(shape.numel()))
        throw ContractError("dft2: empty image or feature/shape mismatch");
    SpectrumPair sp;
    sp.shape = shape;
    sp.amplitude.resize(features.size());
    sp.phase.resize(features.size());
    const size_t plane = static_cast<size_t>(shape.height) * shape.width;
    std::vector<std::complex<double>> grid(plane);
    for (int ch = 0; ch < shape.channels; ++ch) {
        const size_t base = static_cast<size_t>(ch) * plane;
        for (size_t i = 0; i < plane; ++i) grid[i] = {features[base + i], 0.0};
        fft2d(grid, shape.height, shape.width, /*inverse=*/false);
        for (size_t i = 0; i < plane; ++i) {
            sp.amplitude[base + i] = std::abs(grid[i]);
            sp.phase[base + i] =
                (grid[i].real() == 0.0 && grid[i].imag() == 0.0)
                    ? 0.0
                    : std::atan2(grid[i].imag(), grid[i].real());
        }
    }
    return sp;
}

std::vector<double> idft2(const SpectrumPair& spectrum) {
    const auto& shape = spectrum.shape;
    std::vector<double> out(static_cast<size_t>(shape.numel()));
    const size_t plane = static_cast<size_t>(shape.height) * shape.width;
    std::vector<std::complex<double>> grid(plane);
    for (int ch = 0; ch < shape.channels; ++ch) {
        const size_t base = static_cast<size_t>(ch) * plane;
        for (size_t i = 0; i < plane; ++i)
            grid[i] = std::polar(spectrum.amplitude[base + i], spectrum.phase[base + i]);
        fft2d(grid, shape.height, shape.width, /*inverse=*/true);
        for (size_t i = 0; i < plane; ++i) out[base + i] = grid[i].real();
    }
    return out;
}

Sample amplitude_mix(const Sample& x_i, const Sample& x_j, double lambda,
                     std::int64_t new_sample_id, int new_domain_id) {
    if (!(x_i.shape == x_j.shape)) throw ContractError("amplitude_mix: shape mismatch");
    if (lambda < 0.0 || lambda > 1.0) throw ContractError("amplitude_mix: lambda outside [0,1]");
    SpectrumPair si = dft2(x_i.features, x_i.shape);
    SpectrumPair sj = dft2(x_j.features, x_j.shape);
    for (size_t k = 0; k < si.amplitude.size(); ++k)
        si.amplitude[k] = (1.0 - lambda) * si.amplitude[k] + lambda * sj.amplitude[k];
    std::vector<double> pixels = idft2(si);
    for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);

    Sample out;
    out.id = new_sample_id;
    out.shape = x_i.shape;
    out.features = std::move(pixels);
    out.label = x_i.label;
    out.domain_id = new_domain_id;
    out.origin = Origin::Augmented;
    out.provenance = Provenance{x_i.id, x_j.id, lambda};
    return out;
}

std::vector<Sample> augment_batch(const std::vector<Sample>& batch, Rng& rng, double eta,
                                  std::int64_t first_sample_id, int first_domain_id) {
    if (batch.size() < 2) throw ContractError("augment_batch: need at least 2 samples");
    if (eta < 0.0 || eta > 1.0) throw ContractError("augment_batch: eta outside [0,1]");
    std::vector<size_t> perm(batch.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);

    std::vector<Sample> out;
    out.reserve(batch.size());
    std::int64_t sid = first_sample_id;
    int did = first_domain_id;
    for (size_t p = 0; p + 1 < perm.size(); p += 2) {
        const Sample& a = batch[perm[p]];
        const Sample& b = batch[perm[p + 1]];
        double lambda = rng.uniform(0.0, eta);
        out.push_back(amplitude_mix(a, b, lambda, sid++, did++));
        out.push_back(amplitude_mix(b, a, lambda, sid++, did++));
    }
    return out;
}

}  // namespace dcg
