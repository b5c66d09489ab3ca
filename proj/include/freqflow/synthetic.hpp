#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "freqflow/error.hpp"
#include "freqflow/field.hpp"
#include "freqflow/rng.hpp"
#include "freqflow/util.hpp"

namespace freqflow {

// One sinusoidal detail wave: amplitude * sin(2*pi*frequency*(x*cos(angle)
// + y*sin(angle)) + phase). frequency is in cycles per domain width.
struct PerturbationTerm {
    double amplitude = 0.0;
    double frequency = 0.0;
    double angle = 0.0;
    double phase = 0.0;
};

// Parameters of the synthetic plume generator. The velocity field is the
// analytic curl of a stream function: a Gaussian blob (position and width
// set by the scene parameters) plus fixed sinusoidal detail waves.
struct SyntheticConfig {
    int grid_size = 64;               // H = W, power of two
    double plume_amplitude = 1.0;     // A
    double base_y = 0.25;             // y0; blob center y = y0 + rise_speed * c3
    double rise_speed = 0.4;          // v
    double perturbation_scale = 0.5;  // epsilon, scales every detail wave
    std::vector<PerturbationTerm> terms;
    std::uint64_t seed = 0;
};

// Detail waves whose wave vectors sit exactly on the integer frequency
// lattice, so each wave is periodic on the unit square and lands in a single
// radial band. Bands covered scale with the grid (10..30 at 64).
inline std::vector<PerturbationTerm> default_perturbation_terms(int grid_size) {
    const int lo = std::max(2, grid_size * 10 / 64);
    const int hi = std::max(lo, std::min(grid_size * 30 / 64, grid_size / 2 - 2));
    std::vector<PerturbationTerm> terms;
    const double golden = 0.6180339887498949;
    const double plastic = 0.7548776662466927;
    for (int band = lo, j = 0; band <= hi; ++band, ++j) {
        const double want = 2.0 * std::numbers::pi * std::fmod(golden * (j + 1), 1.0);
        // Pick the lattice point inside the band whose angle is closest to
        // `want`.
        int best_kx = band, best_ky = 0;
        double best_dist = 1e30;
        for (int ky = -band - 1; ky <= band + 1; ++ky) {
            for (int kx = -band - 1; kx <= band + 1; ++kx) {
                const double r = std::sqrt(static_cast<double>(kx) * kx + static_cast<double>(ky) * ky);
                if (static_cast<int>(std::floor(r)) != band) continue;
                double d = std::abs(std::remainder(std::atan2(static_cast<double>(ky), static_cast<double>(kx)) - want,
                                                   2.0 * std::numbers::pi));
                if (d < best_dist) {
                    best_dist = d;
                    best_kx = kx;
                    best_ky = ky;
                }
            }
        }
        PerturbationTerm t;
        t.frequency = std::sqrt(static_cast<double>(best_kx) * best_kx + static_cast<double>(best_ky) * best_ky);
        t.angle = std::atan2(static_cast<double>(best_ky), static_cast<double>(best_kx));
        // 1/(2*pi*f) amplitude makes every wave contribute the same velocity
        // magnitude regardless of its band.
        t.amplitude = 1.0 / (2.0 * std::numbers::pi * t.frequency);
        t.phase = 2.0 * std::numbers::pi * std::fmod(plastic * (j + 1), 1.0);
        terms.push_back(t);
    }
    return terms;
}

inline SyntheticConfig make_default_config(int grid_size = 64) {
    SyntheticConfig cfg;
    cfg.grid_size = grid_size;
    cfg.terms = default_perturbation_terms(grid_size);
    return cfg;
}

inline void validate_synth_config(const SyntheticConfig& cfg) {
    if (!is_power_of_two(cfg.grid_size) || cfg.grid_size < 4)
        throw invalid_input("grid size must be an even power of two >= 4, got " +
                            std::to_string(cfg.grid_size));
    if (!std::isfinite(cfg.plume_amplitude) || !std::isfinite(cfg.base_y) ||
        !std::isfinite(cfg.rise_speed) || !std::isfinite(cfg.perturbation_scale))
        throw invalid_input("synthetic config contains non-finite value");
    if (cfg.perturbation_scale < 0.0)
        throw invalid_input("perturbation scale must be non-negative");
    for (const auto& t : cfg.terms) {
        if (!std::isfinite(t.amplitude) || !std::isfinite(t.frequency) ||
            !std::isfinite(t.angle) || !std::isfinite(t.phase))
            throw invalid_input("perturbation term contains non-finite value");
        if (t.frequency <= 0.0 || t.frequency >= cfg.grid_size / 2.0)
            throw invalid_input("perturbation frequency must lie in (0, grid/2), got " +
                                format_double(t.frequency));
    }
}

// Velocity field for scene parameters c = (blob x-position, blob width,
// time). Both channels are the analytic curl (d psi/dy, -d psi/dx) of the
// stream function, sampled at cell centers of the unit square.
inline Field synth_field(const ParamVector& c, const SyntheticConfig& cfg) {
    validate_synth_config(cfg);
    validate_params(c);
    if (c.dim() != 3)
        throw invalid_input("synthetic generator expects 3 scene parameters, got " +
                            std::to_string(c.dim()));
    const double cx = c.values[0];
    const double sigma = c.values[1];
    const double time = c.values[2];
    if (sigma <= 0.0) throw invalid_input("blob width parameter must be positive");

    const int n = cfg.grid_size;
    const double cy = cfg.base_y + cfg.rise_speed * time;
    const double inv_s2 = 1.0 / (sigma * sigma);
    const double two_pi = 2.0 * std::numbers::pi;

    struct Wave {
        double kx, ky;      // wave vector, cycles per domain width
        double gx, gy;      // velocity amplitude of the curl along x / y
        double phase;
    };
    std::vector<Wave> waves;
    waves.reserve(cfg.terms.size());
    for (const auto& t : cfg.terms) {
        Wave w;
        w.kx = t.frequency * std::cos(t.angle);
        w.ky = t.frequency * std::sin(t.angle);
        const double amp = cfg.perturbation_scale * t.amplitude * two_pi * t.frequency;
        w.gx = amp * std::sin(t.angle);
        w.gy = -amp * std::cos(t.angle);
        w.phase = t.phase;
        waves.push_back(w);
    }

    Field u(n, n, 2);
    for (int yi = 0; yi < n; ++yi) {
        const double y = (yi + 0.5) / n;
        const double dy = y - cy;
        for (int xi = 0; xi < n; ++xi) {
            const double x = (xi + 0.5) / n;
            const double dx = x - cx;
            const double g = cfg.plume_amplitude * std::exp(-0.5 * (dx * dx + dy * dy) * inv_s2);
            double ux = g * (-dy * inv_s2);
            double uy = g * (dx * inv_s2);
            for (const auto& w : waves) {
                const double cs = std::cos(two_pi * (w.kx * x + w.ky * y) + w.phase);
                ux += w.gx * cs;
                uy += w.gy * cs;
            }
            u.at(yi, xi, 0) = ux;
            u.at(yi, xi, 1) = uy;
        }
    }
    return u;
}

struct ParamRange {
    double lo = 0.0;
    double hi = 1.0;
};

inline std::vector<ParamRange> default_param_ranges() {
    return {{0.3, 0.7}, {0.04, 0.10}, {0.0, 1.0}};
}

// Training pairs (c, u_c) drawn from one generator config.
struct Dataset {
    SyntheticConfig config;
    std::vector<ParamVector> params;
    std::vector<Field> fields;
    std::uint64_t seed = 0;

    std::size_t count() const { return fields.size(); }
    int height() const { return fields.empty() ? 0 : fields.front().height; }
    int width() const { return fields.empty() ? 0 : fields.front().width; }
    int channels() const { return fields.empty() ? 0 : fields.front().channels; }
};

// Draws `count` parameter vectors uniformly from `ranges` and synthesizes
// their fields. Sample i uses substream (seed, i), so generation order (or
// parallelism) cannot change the result.
inline Dataset gen_dataset(const SyntheticConfig& cfg, const std::vector<ParamRange>& ranges,
                           std::size_t count, std::uint64_t seed) {
    validate_synth_config(cfg);
    if (count < 1) throw invalid_input("dataset sample count must be at least 1");
    if (ranges.empty()) throw invalid_input("parameter ranges must not be empty");
    for (const auto& r : ranges) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
            throw invalid_input("parameter range must be finite with lo <= hi");
    }
    if (ranges.size() != 3)
        throw invalid_input("synthetic generator expects exactly 3 parameter ranges");

    Dataset ds;
    ds.config = cfg;
    ds.config.seed = seed;
    ds.seed = seed;
    ds.params.reserve(count);
    ds.fields.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(substream_seed(seed, i));
        ParamVector c;
        c.values.reserve(ranges.size());
        for (const auto& r : ranges) c.values.push_back(rng.uniform(r.lo, r.hi));
        ds.fields.push_back(synth_field(c, ds.config));
        ds.params.push_back(std::move(c));
    }
    return ds;
}

}  // namespace freqflow
