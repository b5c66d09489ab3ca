#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqflow/diagnostics.hpp"
#include "freqflow/error.hpp"
#include "freqflow/field.hpp"
#include "freqflow/io.hpp"
#include "freqflow/loss.hpp"
#include "freqflow/rng.hpp"
#include "freqflow/synthetic.hpp"

namespace freqflow {

enum class HeadMode { direct, curl };

inline std::string head_mode_name(HeadMode m) {
    return m == HeadMode::direct ? "direct" : "curl";
}

inline HeadMode head_mode_from_name(const std::string& s) {
    if (s == "direct") return HeadMode::direct;
    if (s == "curl") return HeadMode::curl;
    throw invalid_input("unknown head mode '" + s + "' (expected direct or curl)");
}

// Dense generator c -> field. The direct head emits the two velocity
// channels; the curl head emits a stream function grid whose discrete curl
// (same stencil as the divergence diagnostic) becomes the velocity, making
// the output divergence-free by construction.
struct ModelConfig {
    int param_dim = 3;
    std::vector<int> hidden = {128, 128};
    int grid = 64;
    HeadMode head = HeadMode::direct;

    int output_dim() const { return grid * grid * (head == HeadMode::direct ? 2 : 1); }
    std::vector<int> layer_sizes() const {
        std::vector<int> s;
        s.push_back(param_dim);
        for (int hdim : hidden) s.push_back(hdim);
        s.push_back(output_dim());
        return s;
    }
};

inline void validate_model_config(const ModelConfig& cfg) {
    if (cfg.param_dim < 1) throw invalid_input("model input dimension must be >= 1");
    if (cfg.grid < 4 || cfg.grid % 2 != 0)
        throw invalid_input("model grid must be even and >= 4");
    for (int hdim : cfg.hidden)
        if (hdim < 1) throw invalid_input("hidden layer sizes must be >= 1");
}

// Parameters live in one flat vector: for each layer, the weight matrix
// (row-major, out x in) followed by the bias. Hidden layers use tanh, the
// last layer is linear.
struct GeneratorModel {
    ModelConfig config;
    std::vector<double> params;
    std::uint64_t init_seed = 0;

    std::size_t param_count() const { return params.size(); }
};

inline std::size_t model_param_count(const ModelConfig& cfg) {
    const std::vector<int> sizes = cfg.layer_sizes();
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        total += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    return total;
}

// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero, drawn layer
// by layer in a fixed order from the given seed.
inline GeneratorModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
    validate_model_config(cfg);
    GeneratorModel m;
    m.config = cfg;
    m.init_seed = seed;
    m.params.reserve(model_param_count(cfg));
    Rng rng(seed);
    const std::vector<int> sizes = cfg.layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l], fan_out = sizes[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (int i = 0; i < fan_in * fan_out; ++i) m.params.push_back(rng.uniform(-bound, bound));
        for (int i = 0; i < fan_out; ++i) m.params.push_back(0.0);
    }
    return m;
}

// Post-activation values per layer, kept so backward can reuse them.
struct ForwardCache {
    std::vector<std::vector<double>> acts;  // acts[0] = input c
};

namespace detail {

inline void affine_tanh(const double* wmat, const double* bias, const std::vector<double>& in,
                        std::vector<double>& out, bool apply_tanh) {
    const std::size_t rows = out.size(), cols = in.size();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = bias[r];
        const double* wrow = wmat + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wrow[c] * in[c];
        out[r] = apply_tanh ? std::tanh(acc) : acc;
    }
}

}  // namespace detail

inline Field forward(const GeneratorModel& m, const ParamVector& c, ForwardCache* cache = nullptr) {
    if (static_cast<int>(c.values.size()) != m.config.param_dim)
        throw invalid_input("model expects " + std::to_string(m.config.param_dim) +
                            " input parameters, got " + std::to_string(c.values.size()));
    const std::vector<int> sizes = m.config.layer_sizes();
    std::vector<std::vector<double>> acts(sizes.size());
    acts[0] = c.values;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto fan_in = static_cast<std::size_t>(sizes[l]);
        const auto fan_out = static_cast<std::size_t>(sizes[l + 1]);
        acts[l + 1].resize(fan_out);
        const bool last = (l + 2 == sizes.size());
        detail::affine_tanh(m.params.data() + offset, m.params.data() + offset + fan_in * fan_out,
                            acts[l], acts[l + 1], !last);
        offset += fan_in * fan_out + fan_out;
    }

    const int g = m.config.grid;
    Field out(g, g, 2);
    const std::vector<double>& head = acts.back();
    if (m.config.head == HeadMode::direct) {
        out.data.assign(head.begin(), head.end());
    } else {
        Field psi(g, g, 1);
        psi.data.assign(head.begin(), head.end());
        out = discrete_curl(psi);
    }
    if (cache) cache->acts = std::move(acts);
    return out;
}

// Reverse-mode gradient of <upstream, forward(m, c)> with respect to the
// flat parameter vector.
inline std::vector<double> backward(const GeneratorModel& m, const ParamVector& c,
                                    const Field& upstream) {
    ForwardCache cache;
    const Field out = forward(m, c, &cache);
    require_same_shape(out, upstream, "backward");

    const int g = m.config.grid;
    const std::vector<int> sizes = m.config.layer_sizes();
    std::vector<double> delta;  // gradient w.r.t. the head output
    if (m.config.head == HeadMode::direct) {
        delta = upstream.data;
    } else {
        // u_x(y,x) = psi(y+1,x) - psi(y,x) and u_y(y,x) = psi(y,x) -
        // psi(y,x+1); route each upstream entry back through its two taps.
        delta.assign(static_cast<std::size_t>(g) * g, 0.0);
        for (int y = 0; y < g; ++y) {
            const int ym = (y + g - 1) % g;
            for (int x = 0; x < g; ++x) {
                const int xm = (x + g - 1) % g;
                delta[static_cast<std::size_t>(y) * g + x] =
                    upstream.at(ym, x, 0) - upstream.at(y, x, 0) +
                    upstream.at(y, x, 1) - upstream.at(y, xm, 1);
            }
        }
    }

    std::vector<double> grad(m.params.size(), 0.0);
    // Walk layers from the top; offsets[l] is where layer l's weights start.
    std::vector<std::size_t> offsets(sizes.size() - 1);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    }
    for (std::size_t l = sizes.size() - 2;; --l) {
        const auto fan_in = static_cast<std::size_t>(sizes[l]);
        const auto fan_out = static_cast<std::size_t>(sizes[l + 1]);
        const std::vector<double>& below = cache.acts[l];
        double* wgrad = grad.data() + offsets[l];
        double* bgrad = wgrad + fan_in * fan_out;
        for (std::size_t r = 0; r < fan_out; ++r) {
            const double d = delta[r];
            bgrad[r] = d;
            double* row = wgrad + r * fan_in;
            for (std::size_t cc = 0; cc < fan_in; ++cc) row[cc] = d * below[cc];
        }
        if (l == 0) break;
        const double* wmat = m.params.data() + offsets[l];
        std::vector<double> next(fan_in, 0.0);
        for (std::size_t r = 0; r < fan_out; ++r) {
            const double d = delta[r];
            const double* row = wmat + r * fan_in;
            for (std::size_t cc = 0; cc < fan_in; ++cc) next[cc] += d * row[cc];
        }
        // Activation below is tanh; its derivative in terms of the stored
        // output is 1 - a^2.
        for (std::size_t cc = 0; cc < fan_in; ++cc) next[cc] *= 1.0 - below[cc] * below[cc];
        delta = std::move(next);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
    LossConfig loss;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 16;
    int epochs = 100;
    double holdout_fraction = 0.2;  // trailing samples held out for MRE
    std::uint64_t seed = 0;
};

inline void validate_train_config(const TrainConfig& cfg) {
    validate_loss_config(cfg.loss);
    if (!(cfg.learning_rate > 0.0)) throw invalid_input("learning rate must be positive");
    if (cfg.batch_size < 1) throw invalid_input("batch size must be >= 1");
    if (cfg.epochs < 0) throw invalid_input("epoch count must be >= 0");
    if (!(cfg.holdout_fraction >= 0.0) || cfg.holdout_fraction >= 1.0)
        throw invalid_input("holdout fraction must be in [0, 1)");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        throw invalid_input("Adam betas must be in [0, 1)");
    if (!(cfg.adam_eps > 0.0)) throw invalid_input("Adam epsilon must be positive");
}

struct TrainEpoch {
    int epoch = 0;
    double total = 0.0;
    double baseline = 0.0;
    double fourier = 0.0;
    double seconds = 0.0;  // wall time; excluded from determinism checks
};

struct TrainLog {
    std::vector<TrainEpoch> epochs;
    std::vector<std::optional<double>> holdout_mre;  // per fine band, after the last epoch
};

// Deterministic split: the trailing fraction of the dataset (at least one
// sample when the fraction is nonzero) is held out. Shared by every run on
// the same dataset regardless of seeds.
inline std::size_t holdout_count(std::size_t total, double fraction) {
    if (fraction <= 0.0 || total < 2) return 0;
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    k = std::max<std::size_t>(k, 1);
    return std::min(k, total - 1);
}

// Shuffled mini-batch Adam on total_loss. Epoch e shuffles with substream
// (seed, e+1), so the whole run is a function of (model, dataset, cfg).
inline TrainLog train(GeneratorModel& m, const Dataset& ds, const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (ds.fields.empty()) throw invalid_input("training dataset is empty");
    if (ds.height() != m.config.grid || ds.width() != m.config.grid)
        throw invalid_input("dataset grid " + std::to_string(ds.height()) + "x" +
                            std::to_string(ds.width()) + " does not match model grid " +
                            std::to_string(m.config.grid));
    if (ds.channels() != 2) throw invalid_input("training expects 2-channel velocity fields");
    for (const auto& c : ds.params)
        if (static_cast<int>(c.values.size()) != m.config.param_dim)
            throw invalid_input("dataset parameter dimension does not match the model");

    TrainLog log;
    if (cfg.epochs == 0) return log;

    const std::size_t holdout = holdout_count(ds.count(), cfg.holdout_fraction);
    const std::size_t train_n = ds.count() - holdout;
    if (train_n == 0) throw invalid_input("holdout leaves no training samples");

    const BandPartition partition = partition_for(cfg.loss, m.config.grid, m.config.grid);
    if (cfg.loss.has_fourier()) validate_weights(cfg.loss.weights, partition);

    // Truth spectra of the training split, computed once.
    std::vector<Spectrum> truth_spectra;
    if (cfg.loss.has_fourier()) {
        truth_spectra.reserve(train_n);
        for (std::size_t i = 0; i < train_n; ++i) truth_spectra.push_back(dft(ds.fields[i]));
    }

    std::vector<double> adam_m(m.params.size(), 0.0), adam_v(m.params.size(), 0.0);
    std::vector<double> batch_grad(m.params.size(), 0.0);
    long step = 0;

    std::vector<std::size_t> order(train_n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(order);

        double sum_total = 0.0, sum_base = 0.0, sum_fourier = 0.0;
        for (std::size_t start = 0; start < train_n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(train_n, start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t idx = order[bi];
                const Field& truth = ds.fields[idx];
                const Spectrum* su = cfg.loss.has_fourier() ? &truth_spectra[idx] : nullptr;
                const Field recon = forward(m, ds.params[idx]);
                // A diverged model is a numeric failure of this run, not an
                // input error; classify it before dft's field validation can.
                for (double v : recon.data)
                    if (!std::isfinite(v))
                        throw numeric_error("non-finite reconstruction at epoch " +
                                            std::to_string(epoch) + ", step " +
                                            std::to_string(step));
                const LossTerms terms = total_loss_terms(truth, su, recon, cfg.loss, partition);
                if (!std::isfinite(terms.total))
                    throw numeric_error("non-finite loss at epoch " + std::to_string(epoch) +
                                        ", step " + std::to_string(step) + ": total=" +
                                        format_double(terms.total) + " baseline=" +
                                        format_double(terms.baseline) + " fourier=" +
                                        format_double(terms.fourier));
                sum_total += terms.total;
                sum_base += terms.baseline;
                sum_fourier += terms.fourier;
                const Field upstream = total_loss_grad(truth, su, recon, cfg.loss, partition);
                const std::vector<double> pg = backward(m, ds.params[idx], upstream);
                for (std::size_t k = 0; k < batch_grad.size(); ++k) batch_grad[k] += pg[k];
            }
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < m.params.size(); ++k) {
                const double gk = batch_grad[k] * inv_batch;
                adam_m[k] = cfg.beta1 * adam_m[k] + (1.0 - cfg.beta1) * gk;
                adam_v[k] = cfg.beta2 * adam_v[k] + (1.0 - cfg.beta2) * gk * gk;
                m.params[k] -= cfg.learning_rate * (adam_m[k] / bc1) /
                               (std::sqrt(adam_v[k] / bc2) + cfg.adam_eps);
            }
        }
        TrainEpoch e;
        e.epoch = epoch;
        e.total = sum_total / static_cast<double>(train_n);
        e.baseline = sum_base / static_cast<double>(train_n);
        e.fourier = sum_fourier / static_cast<double>(train_n);
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(e);
    }

    if (holdout > 0) {
        std::vector<Field> recons, truths;
        recons.reserve(holdout);
        truths.reserve(holdout);
        for (std::size_t i = train_n; i < ds.count(); ++i) {
            recons.push_back(forward(m, ds.params[i]));
            for (double v : recons.back().data)
                if (!std::isfinite(v))
                    throw numeric_error("non-finite reconstruction in holdout evaluation");
            truths.push_back(ds.fields[i]);
        }
        log.holdout_mre = band_mre(recons, truths, partition);
    }
    return log;
}

// CSV export of the per-epoch log. The seconds column is measured wall
// time; byte-identity comparisons between reruns must ignore it.
inline void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log) {
    std::string out = "epoch,total,baseline,fourier,seconds\n";
    for (const auto& e : log.epochs)
        out += std::to_string(e.epoch) + "," + format_double(e.total) + "," +
               format_double(e.baseline) + "," + format_double(e.fourier) + "," +
               format_double(e.seconds) + "\n";
    write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// Checkpoints: one JSON header line, then a u32 parameter count and the
// flat f32 parameter payload, all little-endian.

inline void save_checkpoint(const std::filesystem::path& path, const GeneratorModel& m) {
    nlohmann::json header = {{"version", 1},
                             {"param_dim", m.config.param_dim},
                             {"hidden", m.config.hidden},
                             {"grid", m.config.grid},
                             {"head", head_mode_name(m.config.head)},
                             {"init_seed", m.init_seed}};
    std::string out = header.dump() + "\n";
    put_u32_le(out, static_cast<std::uint32_t>(m.params.size()));
    for (double v : m.params) {
        const float s = static_cast<float>(v);
        if (!std::isfinite(s)) throw numeric_error("non-finite parameter in checkpoint");
        put_f32_le(out, s);
    }
    write_file_bytes(path, out);
}

inline GeneratorModel load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    const std::size_t nl = bytes.find('\n');
    if (nl == std::string::npos)
        throw format_error(path.string() + ": missing header line", bytes.size());
    GeneratorModel m;
    try {
        const nlohmann::json h = nlohmann::json::parse(bytes.substr(0, nl));
        m.config.param_dim = h.at("param_dim").get<int>();
        m.config.hidden = h.at("hidden").get<std::vector<int>>();
        m.config.grid = h.at("grid").get<int>();
        m.config.head = head_mode_from_name(h.at("head").get<std::string>());
        m.init_seed = h.at("init_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path.string() + ": bad checkpoint header: " + e.what(), 0);
    }
    validate_model_config(m.config);

    const std::size_t body = nl + 1;
    if (bytes.size() < body + 4)
        throw format_error(path.string() + ": truncated parameter count", bytes.size());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t count = get_u32_le(p + body);
    if (count != model_param_count(m.config))
        throw format_error(path.string() + ": parameter count " + std::to_string(count) +
                               " does not match the architecture (" +
                               std::to_string(model_param_count(m.config)) + ")",
                           body);
    const std::size_t expected = body + 4 + static_cast<std::size_t>(count) * 4;
    if (bytes.size() < expected)
        throw format_error(path.string() + ": truncated payload, expected " +
                               std::to_string(expected) + " bytes, got " +
                               std::to_string(bytes.size()),
                           bytes.size());
    if (bytes.size() > expected)
        throw format_error(path.string() + ": trailing data after payload", expected);
    m.params.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const float v = get_f32_le(p + body + 4 + static_cast<std::size_t>(i) * 4);
        if (!std::isfinite(v))
            throw format_error(path.string() + ": non-finite parameter at index " +
                                   std::to_string(i),
                               body + 4 + static_cast<std::size_t>(i) * 4);
        m.params[i] = static_cast<double>(v);
    }
    return m;
}

}  // namespace freqflow
