#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqflow/error.hpp"
#include "freqflow/field.hpp"
#include "freqflow/util.hpp"

namespace freqflow {

// Convention used throughout: forward DFT is unnormalized,
// X[k] = sum_m x[m] e^{-2 pi i k m / n}, and the inverse carries the full
// 1/n. Every loss magnitude in this library is defined under this scaling.

// Unnormalized forward 2D DFT of a Field, one transform per channel. Bin
// (ky, kx) of channel c lives at the same flat index as Field entry
// (y, x, c); bin 0 is DC.
struct Spectrum {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::complex<double>> data;

    Spectrum() = default;
    Spectrum(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c) {}

    std::size_t index(int ky, int kx, int c) const {
        return (static_cast<std::size_t>(ky) * width + kx) * channels + c;
    }
    std::complex<double>& at(int ky, int kx, int c) { return data[index(ky, kx, c)]; }
    const std::complex<double>& at(int ky, int kx, int c) const { return data[index(ky, kx, c)]; }

    bool same_shape(const Spectrum& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

inline void require_same_shape(const Spectrum& a, const Spectrum& b, const char* what) {
    if (!a.same_shape(b))
        throw invalid_input(std::string(what) + ": spectrum shapes differ, " +
                            std::to_string(a.height) + "x" + std::to_string(a.width) + "x" +
                            std::to_string(a.channels) + " vs " + std::to_string(b.height) + "x" +
                            std::to_string(b.width) + "x" + std::to_string(b.channels));
}

// Signed centered frequency for index k of an n-point transform,
// in [-n/2, n/2).
inline int centered_freq(int k, int n) { return k < n / 2 ? k : k - n; }

namespace detail {

// In-place forward transform, iterative radix-2. Twiddles come from polar()
// per butterfly instead of a running product, which keeps the error near
// machine level for the lengths used here.
inline void dft_pow2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

// O(n^2) fallback for even non-power-of-two lengths. k*m is reduced mod n
// before the angle is formed so the twiddle argument never grows.
inline void dft_naive(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t m = 0; m < n; ++m) {
            const std::size_t r = (k * m) % n;
            acc += a[m] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(r) /
                                              static_cast<double>(n));
        }
        out[k] = acc;
    }
    a = std::move(out);
}

inline void dft_1d(std::vector<std::complex<double>>& a) {
    if (a.size() >= 2 && (a.size() & (a.size() - 1)) == 0)
        dft_pow2(a);
    else
        dft_naive(a);
}

// Forward 2D transform of one channel held as a row-major complex grid.
inline void dft_2d_inplace(std::vector<std::complex<double>>& g, int h, int w) {
    std::vector<std::complex<double>> line;
    line.resize(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) line[static_cast<std::size_t>(x)] = g[static_cast<std::size_t>(y) * w + x];
        dft_1d(line);
        for (int x = 0; x < w; ++x) g[static_cast<std::size_t>(y) * w + x] = line[static_cast<std::size_t>(x)];
    }
    line.resize(static_cast<std::size_t>(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) line[static_cast<std::size_t>(y)] = g[static_cast<std::size_t>(y) * w + x];
        dft_1d(line);
        for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = line[static_cast<std::size_t>(y)];
    }
}

}  // namespace detail

inline Spectrum dft(const Field& f) {
    validate_field(f);
    Spectrum s(f.height, f.width, f.channels);
    std::vector<std::complex<double>> g(static_cast<std::size_t>(f.height) * f.width);
    for (int c = 0; c < f.channels; ++c) {
        for (int y = 0; y < f.height; ++y)
            for (int x = 0; x < f.width; ++x)
                g[static_cast<std::size_t>(y) * f.width + x] = {f.at(y, x, c), 0.0};
        detail::dft_2d_inplace(g, f.height, f.width);
        for (int ky = 0; ky < f.height; ++ky)
            for (int kx = 0; kx < f.width; ++kx)
                s.at(ky, kx, c) = g[static_cast<std::size_t>(ky) * f.width + kx];
    }
    return s;
}

inline double max_modulus(const Spectrum& s) {
    double m = 0.0;
    for (const auto& z : s.data) m = std::max(m, std::abs(z));
    return m;
}

// Largest violation of S[ky,kx] = conj(S[-ky mod H, -kx mod W]) over all
// bins and channels.
inline double conjugate_symmetry_residue(const Spectrum& s) {
    double worst = 0.0;
    for (int ky = 0; ky < s.height; ++ky) {
        const int my = (s.height - ky) % s.height;
        for (int kx = 0; kx < s.width; ++kx) {
            const int mx = (s.width - kx) % s.width;
            for (int c = 0; c < s.channels; ++c)
                worst = std::max(worst, std::abs(s.at(ky, kx, c) - std::conj(s.at(my, mx, c))));
        }
    }
    return worst;
}

// Inverse transform back to a real Field (the 1/(H*W) scaling happens
// here). The spectrum must be conjugate-symmetric; the tiny imaginary
// residue left by rounding is discarded after that check. symmetry_scale
// overrides the magnitude the residue is compared against — band_filter
// passes the pre-filter maximum, since zeroing whole annuli can leave only
// rounding noise behind while preserving symmetry at the original scale.
inline Field idft(const Spectrum& s, double symmetry_scale = -1.0) {
    if (s.height < 4 || s.width < 4 || s.channels < 1 ||
        s.data.size() != static_cast<std::size_t>(s.height) * s.width * s.channels)
        throw invalid_input("malformed spectrum");
    const double scale = symmetry_scale >= 0.0 ? symmetry_scale : max_modulus(s);
    if (conjugate_symmetry_residue(s) > 1e-6 * scale)
        throw numeric_error("spectrum is not conjugate-symmetric; inverse would not be real");

    Field f(s.height, s.width, s.channels);
    const double inv_n = 1.0 / (static_cast<double>(s.height) * s.width);
    std::vector<std::complex<double>> g(static_cast<std::size_t>(s.height) * s.width);
    for (int c = 0; c < s.channels; ++c) {
        // idft(S) = conj(dft(conj(S))) / n, so the forward kernel serves
        // both directions.
        for (int ky = 0; ky < s.height; ++ky)
            for (int kx = 0; kx < s.width; ++kx)
                g[static_cast<std::size_t>(ky) * s.width + kx] = std::conj(s.at(ky, kx, c));
        detail::dft_2d_inplace(g, s.height, s.width);
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x)
                f.at(y, x, c) = g[static_cast<std::size_t>(y) * s.width + x].real() * inv_n;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Radial band partition. Each frequency bin belongs to the fine band
// floor(sqrt(kx'^2 + ky'^2)) of its centered radius; a coarser layer of G
// contiguous groups (the searched weight parameters) sits on top.

struct BandPartition {
    int height = 0;
    int width = 0;
    int fine_bands = 0;               // B_fine
    std::vector<int> band_of;         // per bin ky*W + kx
    std::vector<int> bin_count;       // p_b, length B_fine
    std::vector<int> boundaries;      // group g covers fine bands [boundaries[g-1], boundaries[g])
    std::vector<int> group_of;        // fine band -> group, length B_fine

    int total_bins() const { return height * width; }
    int group_count() const { return static_cast<int>(boundaries.size()); }
    int band_at(int ky, int kx) const { return band_of[static_cast<std::size_t>(ky) * width + kx]; }

    bool matches(const Field& f) const { return f.height == height && f.width == width; }
    bool matches(const Spectrum& s) const { return s.height == height && s.width == width; }
};

inline int fine_band_count(int h, int w) {
    // Largest centered radius is at (-H/2, -W/2).
    const double r = std::sqrt(static_cast<double>(h) * h / 4.0 + static_cast<double>(w) * w / 4.0);
    return static_cast<int>(std::floor(r)) + 1;
}

// Default 5-group layout: {5, 15, 25, 32, 46} at 64x64, scaled to other
// sizes by the ratio of fine band counts.
inline std::vector<int> default_group_boundaries(int h, int w) {
    const int bf = fine_band_count(h, w);
    const int ref[4] = {5, 15, 25, 32};
    std::vector<int> out;
    int prev = 0;
    for (int r : ref) {
        int b = static_cast<int>(std::ceil(static_cast<double>(bf) * r / 46.0));
        b = std::min(b, bf - 1);
        if (b > prev) {
            out.push_back(b);
            prev = b;
        }
    }
    out.push_back(bf);
    return out;
}

inline BandPartition make_partition(int h, int w, const std::vector<int>& boundaries) {
    if (h < 4 || w < 4 || h % 2 != 0 || w % 2 != 0)
        throw invalid_input("partition dimensions must be even and >= 4, got " +
                            std::to_string(h) + "x" + std::to_string(w));
    const int bf = fine_band_count(h, w);
    if (boundaries.empty()) throw invalid_input("group boundaries must not be empty");
    int prev = 0;
    for (int b : boundaries) {
        if (b <= prev)
            throw invalid_input("group boundaries must be strictly increasing and positive");
        prev = b;
    }
    if (boundaries.back() < bf)
        throw invalid_input("last group boundary " + std::to_string(boundaries.back()) +
                            " must cover all " + std::to_string(bf) + " fine bands");

    BandPartition p;
    p.height = h;
    p.width = w;
    p.fine_bands = bf;
    p.boundaries = boundaries;
    p.band_of.resize(static_cast<std::size_t>(h) * w);
    p.bin_count.assign(static_cast<std::size_t>(bf), 0);
    for (int ky = 0; ky < h; ++ky) {
        const double fy = static_cast<double>(centered_freq(ky, h));
        for (int kx = 0; kx < w; ++kx) {
            const double fx = static_cast<double>(centered_freq(kx, w));
            const int band = static_cast<int>(std::floor(std::sqrt(fx * fx + fy * fy)));
            p.band_of[static_cast<std::size_t>(ky) * w + kx] = band;
            ++p.bin_count[static_cast<std::size_t>(band)];
        }
    }
    p.group_of.resize(static_cast<std::size_t>(bf));
    int g = 0;
    for (int b = 0; b < bf; ++b) {
        while (b >= boundaries[static_cast<std::size_t>(g)]) ++g;
        p.group_of[static_cast<std::size_t>(b)] = g;
    }
    return p;
}

inline BandPartition make_default_partition(int h, int w) {
    return make_partition(h, w, default_group_boundaries(h, w));
}

// Evenly sized contiguous groups over the fine bands (last takes the
// remainder), for group counts other than the default layout's.
inline std::vector<int> uniform_group_boundaries(int h, int w, int groups) {
    const int bf = fine_band_count(h, w);
    if (groups < 1 || groups > bf)
        throw invalid_input("group count must be between 1 and " + std::to_string(bf));
    std::vector<int> out(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g)
        out[static_cast<std::size_t>(g)] = (bf * (g + 1) + groups - 1) / groups;
    return out;
}

// Number of bins covered by weight group g (P_g).
inline int group_bin_count(const BandPartition& p, int g) {
    int total = 0;
    for (int b = 0; b < p.fine_bands; ++b)
        if (p.group_of[static_cast<std::size_t>(b)] == g) total += p.bin_count[static_cast<std::size_t>(b)];
    return total;
}

// Zero every bin above max_fine_band and transform back.
inline Field band_filter(const Field& f, const BandPartition& p, int max_fine_band) {
    validate_field(f);
    if (!p.matches(f))
        throw invalid_input("partition is " + std::to_string(p.height) + "x" +
                            std::to_string(p.width) + " but field is " +
                            std::to_string(f.height) + "x" + std::to_string(f.width));
    if (max_fine_band < 0) throw invalid_input("max fine band must be non-negative");
    if (max_fine_band >= p.fine_bands - 1) return f;  // nothing to remove: exact identity
    Spectrum s = dft(f);
    const double scale = max_modulus(s);
    for (int ky = 0; ky < s.height; ++ky)
        for (int kx = 0; kx < s.width; ++kx)
            if (p.band_at(ky, kx) > max_fine_band)
                for (int c = 0; c < s.channels; ++c) s.at(ky, kx, c) = {0.0, 0.0};
    return idft(s, scale);
}

// Per-fine-band l1 distance between two spectra: for each band,
// (1/n) * sum over its bins and all channels of |S_a - S_b|, where n = H*W.
// Dividing by n (not the band's own bin count) keeps the sum over bands
// equal to the whole-spectrum averaged l1.
inline std::vector<double> band_l1(const Spectrum& a, const Spectrum& b, const BandPartition& p) {
    require_same_shape(a, b, "band_l1");
    if (!p.matches(a))
        throw invalid_input("partition dimensions do not match spectra");
    std::vector<double> out(static_cast<std::size_t>(p.fine_bands), 0.0);
    for (int ky = 0; ky < a.height; ++ky)
        for (int kx = 0; kx < a.width; ++kx) {
            const int band = p.band_at(ky, kx);
            double acc = 0.0;
            for (int c = 0; c < a.channels; ++c) acc += std::abs(a.at(ky, kx, c) - b.at(ky, kx, c));
            out[static_cast<std::size_t>(band)] += acc;
        }
    const double inv_n = 1.0 / static_cast<double>(p.total_bins());
    for (double& v : out) v *= inv_n;
    return out;
}

inline nlohmann::json partition_to_json(const BandPartition& p) {
    return {{"H", p.height},
            {"W", p.width},
            {"boundaries", p.boundaries},
            {"p_b", p.bin_count}};
}

}  // namespace freqflow
