#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "freqflow/error.hpp"
#include "freqflow/loss.hpp"
#include "freqflow/model.hpp"
#include "freqflow/rng.hpp"
#include "freqflow/spectral.hpp"
#include "freqflow/synthetic.hpp"

namespace freqflow {

enum class SearchMode { grid, random };

// Weight search around STL. All runs share one model initialization, one
// data split and one shuffle stream so that MRE differences between runs
// come from the weights alone; the only per-run randomness is the random-
// mode weight draw, derived from (master_seed, run index).
struct SearchConfig {
    SearchMode mode = SearchMode::grid;
    std::vector<std::vector<double>> levels;  // grid mode: multipliers per group
    int random_runs = 100;                    // random mode
    std::uint64_t master_seed = 0;
    std::vector<int> boundaries;              // band grouping (empty = default)
    TrainConfig train;                        // template; weights and seed filled per run
    ModelConfig model;
    int jobs = 1;
};

// Multipliers from the reference procedure: every group tries 50..200% of
// its STL value, except the highest group which skips 150%.
inline std::vector<std::vector<double>> default_grid_levels(int groups) {
    std::vector<std::vector<double>> levels(static_cast<std::size_t>(groups),
                                            {0.5, 1.0, 1.5, 2.0});
    if (!levels.empty()) levels.back() = {0.5, 1.0, 2.0};
    return levels;
}

inline std::uint64_t search_init_seed(std::uint64_t master) {
    return substream_seed(master, 0x1417u);
}
inline std::uint64_t search_train_seed(std::uint64_t master) {
    return substream_seed(master, 0x7a1du);
}

// Full Cartesian product of the per-group levels applied to the base
// weights, lexicographic with group 0 varying slowest.
inline std::vector<BandWeights> enumerate_grid(const BandWeights& base,
                                               const std::vector<std::vector<double>>& levels) {
    if (static_cast<int>(levels.size()) != base.size())
        throw invalid_input("need one level list per weight group");
    for (const auto& l : levels)
        if (l.empty()) throw invalid_input("grid levels must be nonempty for every group");

    std::vector<BandWeights> out;
    std::vector<std::size_t> idx(levels.size(), 0);
    while (true) {
        BandWeights w = base;
        for (std::size_t g = 0; g < levels.size(); ++g) w.values[g] *= levels[g][idx[g]];
        out.push_back(std::move(w));
        std::size_t g = levels.size();
        while (g > 0) {
            --g;
            if (++idx[g] < levels[g].size()) break;
            idx[g] = 0;
            if (g == 0) return out;
        }
    }
}

// Random rule: draw z ~ N(0,1) per group (redrawing near-zero values),
// divide the base weight by |z| when z is negative and multiply otherwise,
// then rescale so the weight sum matches the base sum.
inline BandWeights sample_random(const BandWeights& base, Rng& rng) {
    BandWeights w = base;
    double base_sum = 0.0, new_sum = 0.0;
    for (std::size_t g = 0; g < w.values.size(); ++g) {
        double z = rng.normal();
        while (std::abs(z) < 1e-12) z = rng.normal();
        w.values[g] = z < 0.0 ? base.values[g] / (-z) : base.values[g] * z;
        base_sum += base.values[g];
        new_sum += w.values[g];
    }
    const double scale = base_sum / new_sum;
    for (double& v : w.values) v *= scale;
    return w;
}

struct RunRecord {
    int run = 0;
    std::string kind;      // "grid", "random" or "baseline"
    BandWeights weights;   // empty for the baseline run
    std::uint64_t train_seed = 0;
    std::vector<std::optional<double>> mre;  // holdout, per fine band
    double final_total = 0.0;
    double final_baseline = 0.0;
    double final_fourier = 0.0;
    double seconds = 0.0;  // wall time; not part of determinism comparisons
    bool failed = false;
    std::string error;
};

struct SearchResult {
    std::vector<RunRecord> runs;  // ordered by run index; baseline run last
    int fine_bands = 0;
    std::vector<int> boundaries;
    bool interrupted = false;
};

namespace detail {

inline RunRecord execute_run(int run_index, const std::string& kind, const BandWeights& weights,
                             const SearchConfig& cfg, const Dataset& ds) {
    RunRecord rec;
    rec.run = run_index;
    rec.kind = kind;
    rec.weights = weights;
    rec.train_seed = search_train_seed(cfg.master_seed);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        GeneratorModel model = init_model(cfg.model, search_init_seed(cfg.master_seed));
        TrainConfig tc = cfg.train;
        tc.loss.weights = weights;
        tc.seed = rec.train_seed;
        const TrainLog log = train(model, ds, tc);
        rec.mre = log.holdout_mre;
        if (!log.epochs.empty()) {
            rec.final_total = log.epochs.back().total;
            rec.final_baseline = log.epochs.back().baseline;
            rec.final_fourier = log.epochs.back().fourier;
        }
    } catch (const numeric_error& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace detail

// Trains one model per weight configuration plus a baseline-only reference
// run. Runs are dealt to `jobs` workers from an atomic counter; each run's
// inputs are fully derived from its index, so execution order and thread
// count cannot change the result. A run that dies numerically is recorded
// as failed and the search continues.
inline SearchResult run_search(const SearchConfig& cfg, const Dataset& ds,
                               const std::atomic<bool>* interrupt = nullptr) {
    validate_model_config(cfg.model);
    validate_train_config(cfg.train);
    if (ds.fields.empty()) throw invalid_input("search dataset is empty");
    if (cfg.mode == SearchMode::random && cfg.random_runs < 1)
        throw invalid_input("random search needs at least 1 run");

    const std::vector<int> boundaries =
        cfg.boundaries.empty() ? default_group_boundaries(cfg.model.grid, cfg.model.grid)
                               : cfg.boundaries;
    const BandPartition partition = make_partition(cfg.model.grid, cfg.model.grid, boundaries);
    const BandWeights base = stl_weights(partition);

    std::vector<BandWeights> configs;
    std::string kind;
    if (cfg.mode == SearchMode::grid) {
        kind = "grid";
        configs = enumerate_grid(
            base, cfg.levels.empty() ? default_grid_levels(partition.group_count()) : cfg.levels);
    } else {
        kind = "random";
        configs.reserve(static_cast<std::size_t>(cfg.random_runs));
        for (int i = 0; i < cfg.random_runs; ++i) {
            Rng rng(substream_seed(cfg.master_seed, static_cast<std::uint64_t>(i)));
            configs.push_back(sample_random(base, rng));
        }
    }

    const int total = static_cast<int>(configs.size()) + 1;  // + baseline reference
    std::vector<std::optional<RunRecord>> slots(static_cast<std::size_t>(total));
    std::atomic<int> next{0};
    std::atomic<bool> hit_interrupt{false};

    auto worker = [&]() {
        while (true) {
            if (interrupt && interrupt->load()) {
                hit_interrupt = true;
                return;
            }
            const int i = next.fetch_add(1);
            if (i >= total) return;
            if (i < static_cast<int>(configs.size()))
                slots[static_cast<std::size_t>(i)] =
                    detail::execute_run(i, kind, configs[static_cast<std::size_t>(i)], cfg, ds);
            else
                slots[static_cast<std::size_t>(i)] =
                    detail::execute_run(i, "baseline", BandWeights{}, cfg, ds);
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    SearchResult res;
    res.fine_bands = partition.fine_bands;
    res.boundaries = boundaries;
    res.interrupted = hit_interrupt.load();
    for (auto& s : slots)
        if (s.has_value()) res.runs.push_back(std::move(*s));
    return res;
}

// CSV schema: run,kind,w_0..w_{G-1},mre_band_0..; failed runs carry the
// marker "failed" in every MRE cell, bands without truth content carry
// "undefined". The baseline run reports zero weights (no Fourier term).
inline void write_search_csv(const std::filesystem::path& path, const SearchResult& res) {
    const std::size_t groups = res.boundaries.size();
    std::string out = "run,kind";
    for (std::size_t g = 0; g < groups; ++g) out += ",w_" + std::to_string(g);
    for (int b = 0; b < res.fine_bands; ++b) out += ",mre_band_" + std::to_string(b);
    out += "\n";
    for (const auto& r : res.runs) {
        out += std::to_string(r.run) + "," + r.kind;
        for (std::size_t g = 0; g < groups; ++g)
            out += "," + (g < r.weights.values.size() ? format_double(r.weights.values[g])
                                                      : std::string("0"));
        for (int b = 0; b < res.fine_bands; ++b) {
            if (r.failed) {
                out += ",failed";
            } else {
                const auto bi = static_cast<std::size_t>(b);
                out += "," + (bi < r.mre.size() ? csv_cell(r.mre[bi]) : std::string("undefined"));
            }
        }
        out += "\n";
    }
    write_file_bytes(path, out);
}

}  // namespace freqflow
