#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqflow/error.hpp"
#include "freqflow/field.hpp"
#include "freqflow/spectral.hpp"

namespace freqflow {

// One weight per band group, tied to the grouping (boundaries) it indexes.
struct BandWeights {
    std::vector<double> values;
    std::vector<int> boundaries;

    int size() const { return static_cast<int>(values.size()); }
    bool empty() const { return values.empty(); }
};

inline void validate_weights(const BandWeights& w, const BandPartition& p) {
    if (w.size() != p.group_count())
        throw invalid_input("weight count " + std::to_string(w.size()) +
                            " does not match partition group count " +
                            std::to_string(p.group_count()));
    if (w.boundaries != p.boundaries)
        throw invalid_input("weights were built for a different band grouping");
    for (double v : w.values)
        if (!std::isfinite(v) || v < 0.0)
            throw invalid_input("band weights must be finite and non-negative");
}

// Metric-mode precondition: strictly positive weights everywhere.
inline void require_positive_weights(const BandWeights& w) {
    for (double v : w.values)
        if (!(v > 0.0)) throw invalid_input("metric-mode evaluation requires all weights > 0");
}

// Shift-towards-low heuristic: w_g = gamma * P_g / n with gamma = 2 for
// every group except the highest, which gets 0.5. P_g is the number of
// frequency bins the group covers.
inline BandWeights stl_weights(const BandPartition& p) {
    BandWeights w;
    w.boundaries = p.boundaries;
    const double n = static_cast<double>(p.total_bins());
    const int groups = p.group_count();
    for (int g = 0; g < groups; ++g) {
        const double gamma = (g == groups - 1) ? 0.5 : 2.0;
        w.values.push_back(gamma * group_bin_count(p, g) / n);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Baseline loss: lambda_u * mean|u - u_hat| + lambda_grad_u * mean over the
// forward-difference Jacobians. Means run over every entry of each tensor.

inline double baseline_loss(const Field& u, const Field& u_hat, double lambda_u,
                            double lambda_grad_u) {
    require_same_shape(u, u_hat, "baseline_loss");
    double direct = 0.0;
    for (std::size_t i = 0; i < u.data.size(); ++i) direct += std::abs(u.data[i] - u_hat.data[i]);
    direct /= static_cast<double>(u.data.size());

    const Field ju = forward_diff_jacobian(u);
    const Field jh = forward_diff_jacobian(u_hat);
    double grad_term = 0.0;
    for (std::size_t i = 0; i < ju.data.size(); ++i)
        grad_term += std::abs(ju.data[i] - jh.data[i]);
    grad_term /= static_cast<double>(ju.data.size());

    return lambda_u * direct + lambda_grad_u * grad_term;
}

namespace detail {
inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace detail

// d baseline_loss / d u_hat. The direct term is a scaled sign pattern; the
// Jacobian term pushes each difference's sign back through the two stencil
// taps that produced it (periodic wrap, sign(0) = 0).
inline Field baseline_loss_grad(const Field& u, const Field& u_hat, double lambda_u,
                                double lambda_grad_u) {
    require_same_shape(u, u_hat, "baseline_loss_grad");
    const int h = u.height, w = u.width, c = u.channels;
    Field g(h, w, c);
    const double k_direct = lambda_u / static_cast<double>(u.data.size());
    for (std::size_t i = 0; i < u.data.size(); ++i)
        g.data[i] = k_direct * detail::sgn(u_hat.data[i] - u.data[i]);

    const Field ju = forward_diff_jacobian(u);
    const Field jh = forward_diff_jacobian(u_hat);
    const double k_jac = lambda_grad_u / static_cast<double>(ju.data.size());
    for (int y = 0; y < h; ++y) {
        const int ym = (y + h - 1) % h;
        for (int x = 0; x < w; ++x) {
            const int xm = (x + w - 1) % w;
            for (int ch = 0; ch < c; ++ch) {
                const int dxc = 2 * ch, dyc = 2 * ch + 1;
                const double sx_here = detail::sgn(jh.at(y, x, dxc) - ju.at(y, x, dxc));
                const double sx_left = detail::sgn(jh.at(y, xm, dxc) - ju.at(y, xm, dxc));
                const double sy_here = detail::sgn(jh.at(y, x, dyc) - ju.at(y, x, dyc));
                const double sy_up = detail::sgn(jh.at(ym, x, dyc) - ju.at(ym, x, dyc));
                g.at(y, x, ch) += k_jac * (sx_left - sx_here + sy_up - sy_here);
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Band-weighted Fourier loss: sum over groups g of w_g times the (1/n)-
// averaged l1 spectrum difference restricted to the group's fine bands.

inline double fourier_loss(const Spectrum& su, const Spectrum& sh, const BandPartition& p,
                           const BandWeights& w) {
    validate_weights(w, p);
    const std::vector<double> per_band = band_l1(su, sh, p);
    double total = 0.0;
    for (int b = 0; b < p.fine_bands; ++b)
        total += w.values[static_cast<std::size_t>(p.group_of[static_cast<std::size_t>(b)])] *
                 per_band[static_cast<std::size_t>(b)];
    return total;
}

inline double fourier_loss(const Field& u, const Field& u_hat, const BandPartition& p,
                           const BandWeights& w) {
    require_same_shape(u, u_hat, "fourier_loss");
    return fourier_loss(dft(u), dft(u_hat), p, w);
}

// Analytic gradient w.r.t. u_hat. With D = FT(u) - FT(u_hat), each bin
// contributes (w_k/n)|D_k|, so d/d u_hat_m = -Re(sum_k (w_k/n) conj(D_k)/
// |D_k| e^{-2 pi i k.m}) -- a forward transform of the normalized residual.
// Bins with |D_k| below epsilon sit on the l1 kink and contribute 0.
inline Field fourier_loss_grad(const Spectrum& su, const Spectrum& sh, const BandPartition& p,
                               const BandWeights& w, double epsilon_grad) {
    validate_weights(w, p);
    require_same_shape(su, sh, "fourier_loss_grad");
    if (!p.matches(su)) throw invalid_input("partition dimensions do not match spectra");
    if (!(epsilon_grad > 0.0)) throw invalid_input("epsilon_grad must be positive");

    const int h = su.height, wd = su.width, c = su.channels;
    const double inv_n = 1.0 / static_cast<double>(p.total_bins());
    Field g(h, wd, c);
    std::vector<std::complex<double>> q(static_cast<std::size_t>(h) * wd);
    for (int ch = 0; ch < c; ++ch) {
        for (int ky = 0; ky < h; ++ky)
            for (int kx = 0; kx < wd; ++kx) {
                const std::complex<double> d = su.at(ky, kx, ch) - sh.at(ky, kx, ch);
                const double m = std::abs(d);
                auto& slot = q[static_cast<std::size_t>(ky) * wd + kx];
                if (m < epsilon_grad) {
                    slot = {0.0, 0.0};
                } else {
                    const double wk =
                        w.values[static_cast<std::size_t>(p.group_of[static_cast<std::size_t>(
                            p.band_at(ky, kx))])];
                    slot = (wk * inv_n / m) * std::conj(d);
                }
            }
        detail::dft_2d_inplace(q, h, wd);
        // q is conjugate-symmetric, so the transform is real up to rounding.
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < wd; ++x)
                g.at(y, x, ch) = -q[static_cast<std::size_t>(y) * wd + x].real();
    }
    return g;
}

inline Field fourier_loss_grad(const Field& u, const Field& u_hat, const BandPartition& p,
                               const BandWeights& w, double epsilon_grad) {
    require_same_shape(u, u_hat, "fourier_loss_grad");
    return fourier_loss_grad(dft(u), dft(u_hat), p, w, epsilon_grad);
}

// ---------------------------------------------------------------------------
// Total loss L = lambda_o * baseline + fourier, with the Fourier term
// active only when weights are present (empty weights = baseline-only).

struct LossConfig {
    double lambda_u = 1.0;
    double lambda_grad_u = 1.0;
    double lambda_o = 1.0;
    double epsilon_grad = 1e-12;
    BandWeights weights;  // empty => no Fourier term

    bool has_fourier() const { return !weights.empty(); }
};

inline void validate_loss_config(const LossConfig& cfg) {
    if (!std::isfinite(cfg.lambda_u) || cfg.lambda_u < 0.0 || !std::isfinite(cfg.lambda_grad_u) ||
        cfg.lambda_grad_u < 0.0 || !std::isfinite(cfg.lambda_o) || cfg.lambda_o < 0.0)
        throw invalid_input("loss lambdas must be finite and non-negative");
    if (!std::isfinite(cfg.epsilon_grad) || !(cfg.epsilon_grad > 0.0))
        throw invalid_input("epsilon_grad must be finite and positive");
}

struct LossTerms {
    double total = 0.0;
    double baseline = 0.0;  // unmixed L_b
    double fourier = 0.0;   // unmixed band term
};

// Variant taking the precomputed truth spectrum; the training loop caches
// these so each step transforms only the reconstruction.
inline LossTerms total_loss_terms(const Field& u, const Spectrum* su, const Field& u_hat,
                                  const LossConfig& cfg, const BandPartition& p) {
    validate_loss_config(cfg);
    LossTerms t;
    t.baseline = baseline_loss(u, u_hat, cfg.lambda_u, cfg.lambda_grad_u);
    if (cfg.has_fourier()) {
        if (su)
            t.fourier = fourier_loss(*su, dft(u_hat), p, cfg.weights);
        else
            t.fourier = fourier_loss(u, u_hat, p, cfg.weights);
    }
    t.total = cfg.lambda_o * t.baseline + t.fourier;
    return t;
}

inline double total_loss(const Field& u, const Field& u_hat, const LossConfig& cfg,
                         const BandPartition& p) {
    return total_loss_terms(u, nullptr, u_hat, cfg, p).total;
}

inline Field total_loss_grad(const Field& u, const Spectrum* su, const Field& u_hat,
                             const LossConfig& cfg, const BandPartition& p) {
    validate_loss_config(cfg);
    Field g = baseline_loss_grad(u, u_hat, cfg.lambda_u, cfg.lambda_grad_u);
    for (double& v : g.data) v *= cfg.lambda_o;
    if (cfg.has_fourier()) {
        const Spectrum sh = dft(u_hat);
        const Field fg = su ? fourier_loss_grad(*su, sh, p, cfg.weights, cfg.epsilon_grad)
                            : fourier_loss_grad(dft(u), sh, p, cfg.weights, cfg.epsilon_grad);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += fg.data[i];
    }
    return g;
}

inline Field total_loss_grad(const Field& u, const Field& u_hat, const LossConfig& cfg,
                             const BandPartition& p) {
    return total_loss_grad(u, nullptr, u_hat, cfg, p);
}

// Convenience overloads that build the partition from the weights'
// grouping (or the default grouping when running baseline-only).
inline BandPartition partition_for(const LossConfig& cfg, int h, int w) {
    return cfg.has_fourier() ? make_partition(h, w, cfg.weights.boundaries)
                             : make_default_partition(h, w);
}

inline double total_loss(const Field& u, const Field& u_hat, const LossConfig& cfg) {
    return total_loss(u, u_hat, cfg, partition_for(cfg, u.height, u.width));
}

inline Field total_loss_grad(const Field& u, const Field& u_hat, const LossConfig& cfg) {
    return total_loss_grad(u, u_hat, cfg, partition_for(cfg, u.height, u.width));
}

// ---------------------------------------------------------------------------
// Spectrum-space loss variants sharing the band weighting and 1/n average.

// Per-bin term ||FT(u)_k| - |FT(u_hat)_k||.
inline double magnitude_loss(const Field& u, const Field& u_hat, const BandPartition& p,
                             const BandWeights& w) {
    require_same_shape(u, u_hat, "magnitude_loss");
    validate_weights(w, p);
    const Spectrum su = dft(u), sh = dft(u_hat);
    const double inv_n = 1.0 / static_cast<double>(p.total_bins());
    double total = 0.0;
    for (int ky = 0; ky < su.height; ++ky)
        for (int kx = 0; kx < su.width; ++kx) {
            const double wk = w.values[static_cast<std::size_t>(
                p.group_of[static_cast<std::size_t>(p.band_at(ky, kx))])];
            for (int c = 0; c < su.channels; ++c)
                total += wk * inv_n *
                         std::abs(std::abs(su.at(ky, kx, c)) - std::abs(sh.at(ky, kx, c)));
        }
    return total;
}

// Per-bin wrapped angular distance between phases; bins whose ground-truth
// modulus sits under the epsilon floor carry no usable phase and are
// skipped.
inline double phase_loss(const Field& u, const Field& u_hat, const BandPartition& p,
                         const BandWeights& w, double epsilon_grad = 1e-12) {
    require_same_shape(u, u_hat, "phase_loss");
    validate_weights(w, p);
    if (!(epsilon_grad > 0.0)) throw invalid_input("epsilon_grad must be positive");
    const Spectrum su = dft(u), sh = dft(u_hat);
    const double inv_n = 1.0 / static_cast<double>(p.total_bins());
    const double two_pi = 2.0 * std::numbers::pi;
    double total = 0.0;
    for (int ky = 0; ky < su.height; ++ky)
        for (int kx = 0; kx < su.width; ++kx) {
            const double wk = w.values[static_cast<std::size_t>(
                p.group_of[static_cast<std::size_t>(p.band_at(ky, kx))])];
            for (int c = 0; c < su.channels; ++c) {
                if (std::abs(su.at(ky, kx, c)) < epsilon_grad) continue;
                double d = std::abs(std::arg(su.at(ky, kx, c)) - std::arg(sh.at(ky, kx, c)));
                d = std::min(d, two_pi - d);
                total += wk * inv_n * d;
            }
        }
    return total;
}

// ---------------------------------------------------------------------------
// JSON round trip for experiment records.

inline nlohmann::json loss_config_to_json(const LossConfig& cfg) {
    return {{"lambda_u", cfg.lambda_u},
            {"lambda_grad_u", cfg.lambda_grad_u},
            {"lambda_o", cfg.lambda_o},
            {"epsilon_grad", cfg.epsilon_grad},
            {"weights", cfg.weights.values},
            {"boundaries", cfg.weights.boundaries}};
}

inline LossConfig loss_config_from_json(const nlohmann::json& j, const std::string& origin) {
    try {
        LossConfig cfg;
        cfg.lambda_u = j.at("lambda_u").get<double>();
        cfg.lambda_grad_u = j.at("lambda_grad_u").get<double>();
        cfg.lambda_o = j.at("lambda_o").get<double>();
        cfg.epsilon_grad = j.at("epsilon_grad").get<double>();
        cfg.weights.values = j.at("weights").get<std::vector<double>>();
        cfg.weights.boundaries = j.at("boundaries").get<std::vector<int>>();
        validate_loss_config(cfg);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(origin + ": bad loss config: " + e.what(), 0);
    }
}

}  // namespace freqflow
