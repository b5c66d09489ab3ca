// Acceptance gate: one [PASS]/[FAIL] line per criterion, exit 1 on any
// failure. Runs against both the library and the built CLI binary.
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <freqflow/freqflow.hpp>

#ifndef FREQFLOW_CLI_PATH
#error "FREQFLOW_CLI_PATH must point at the built binary"
#endif

using namespace freqflow;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = true;
    std::string fail_reason;                // first failure only
    std::vector<std::string> notes;         // printed indented, informational
    double seconds = 0.0;

    void expect(bool cond, const std::string& what) {
        if (!cond && pass) {
            pass = false;
            fail_reason = what;
        }
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
    const double diff = std::abs(a - b);
    return diff <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

// Shared gradient comparison: 1e-4 relative with a small absolute floor for
// coordinates whose true gradient is zero up to FD noise.
bool grad_close(double analytic, double numeric) {
    return std::abs(analytic - numeric) <=
           std::max(1e-8, 1e-4 * std::max(std::abs(analytic), std::abs(numeric)));
}

Field random_field(Rng& rng, int h, int w, int c, double lo = -1.0, double hi = 1.0) {
    Field f(h, w, c);
    for (double& v : f.data) v = rng.uniform(lo, hi);
    return f;
}

double min_pointwise_diff(const Field& a, const Field& b) {
    double m = 1e300;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::min(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// Smallest forward-difference jacobian gap between two fields, matching the
// stencil the baseline loss uses.
double min_jacobian_diff(const Field& a, const Field& b) {
    double m = 1e300;
    for (int c = 0; c < a.channels; ++c)
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                const int xr = (x + 1) % a.width, yd = (y + 1) % a.height;
                const double ax = a.at(y, xr, c) - a.at(y, x, c);
                const double bx = b.at(y, xr, c) - b.at(y, x, c);
                const double ay = a.at(yd, x, c) - a.at(y, x, c);
                const double by = b.at(yd, x, c) - b.at(y, x, c);
                m = std::min({m, std::abs(ax - bx), std::abs(ay - by)});
            }
    return m;
}

double min_bin_modulus_diff(const Field& a, const Field& b) {
    const Spectrum sa = dft(a), sb = dft(b);
    double m = 1e300;
    for (std::size_t i = 0; i < sa.data.size(); ++i)
        m = std::min(m, std::abs(sa.data[i] - sb.data[i]));
    return m;
}

// Pair of fields safely away from every l1 kink the losses contain.
std::pair<Field, Field> draw_kink_free_pair(Rng& rng, int h, int w, int c) {
    for (int tries = 0; tries < 200; ++tries) {
        Field u = random_field(rng, h, w, c);
        Field v = random_field(rng, h, w, c);
        if (min_pointwise_diff(u, v) > 1e-3 && min_jacobian_diff(u, v) > 1e-3 &&
            min_bin_modulus_diff(u, v) > 1e-3)
            return {std::move(u), std::move(v)};
    }
    throw std::runtime_error("could not draw a kink-free field pair");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const fs::path& scratch) {
    const std::string cmd = std::string(FREQFLOW_CLI_PATH) + " " + args + " > " +
                            (scratch / "stdout.txt").string() + " 2> " +
                            (scratch / "stderr.txt").string();
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / "freqflow_acceptance" / tag;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------- criterion 1

Verdict criterion_metric_axioms() {
    Verdict v;
    Rng rng(0x11a1);
    const int sizes[] = {8, 16, 32, 64};
    std::vector<BandPartition> parts;
    for (int s : sizes) parts.push_back(make_default_partition(s, s));

    for (int i = 0; i < 10000 && v.pass; ++i) {
        const int si = i % 4;
        const int n = sizes[si];
        const BandPartition& p = parts[static_cast<std::size_t>(si)];

        LossConfig cfg;
        cfg.lambda_u = rng.uniform(0.1, 2.0);
        cfg.lambda_grad_u = rng.uniform(0.1, 2.0);
        cfg.lambda_o = rng.uniform(0.1, 2.0);
        cfg.weights.boundaries = p.boundaries;
        cfg.weights.values.resize(p.boundaries.size());
        for (double& w : cfg.weights.values) w = rng.uniform(0.1, 2.0);

        const Field u = random_field(rng, n, n, 2);
        const Field w = random_field(rng, n, n, 2);
        const Field x = random_field(rng, n, n, 2);

        const double duw = total_loss(u, w, cfg, p);
        const double dwu = total_loss(w, u, cfg, p);
        const double dwx = total_loss(w, x, cfg, p);
        const double dux = total_loss(u, x, cfg, p);

        v.expect(duw >= 0.0 && dwx >= 0.0 && dux >= 0.0,
                 "negative distance at case " + std::to_string(i));
        v.expect(duw == dwu, "asymmetric distance at case " + std::to_string(i));
        v.expect(dux <= duw + dwx + 1e-9 * (duw + dwx),
                 "triangle violation at case " + std::to_string(i) + ": d(u,x)=" + fmt(dux) +
                     " > " + fmt(duw) + " + " + fmt(dwx));
        v.expect(duw > 0.0, "indiscernible distinct fields at case " + std::to_string(i));
        if (i % 8 == 0)
            v.expect(total_loss(u, u, cfg, p) == 0.0,
                     "nonzero self-distance at case " + std::to_string(i));
    }
    v.notes.push_back("10000 triples over sizes 8..64, positive random weights");
    return v;
}

// ---------------------------------------------------------------- criterion 2

Verdict criterion_gradients() {
    Verdict v;
    Rng rng(0x26ad);
    const int n = 8;
    const BandPartition p = make_default_partition(n, n);
    const double h = 1e-6;

    auto fd_check = [&](const Field& grad, Field pert, auto&& loss_fn, const char* label,
                        int instance) {
        for (std::size_t i = 0; i < pert.data.size() && v.pass; ++i) {
            const double keep = pert.data[i];
            pert.data[i] = keep + h;
            const double up = loss_fn(pert);
            pert.data[i] = keep - h;
            const double dn = loss_fn(pert);
            pert.data[i] = keep;
            const double numeric = (up - dn) / (2.0 * h);
            v.expect(grad_close(grad.data[i], numeric),
                     std::string(label) + " gradient mismatch, instance " +
                         std::to_string(instance) + " coord " + std::to_string(i) + ": analytic " +
                         fmt(grad.data[i]) + " vs fd " + fmt(numeric));
        }
    };

    for (int inst = 0; inst < 100 && v.pass; ++inst) {
        auto [u, uh] = draw_kink_free_pair(rng, n, n, 2);

        BandWeights w;
        w.boundaries = p.boundaries;
        w.values.resize(p.boundaries.size());
        for (double& x : w.values) x = rng.uniform(0.1, 2.0);
        const double lu = rng.uniform(0.1, 2.0), lg = rng.uniform(0.1, 2.0);

        fd_check(fourier_loss_grad(u, uh, p, w, 1e-12), uh,
                 [&](const Field& f) { return fourier_loss(u, f, p, w); }, "fourier", inst);
        fd_check(baseline_loss_grad(u, uh, lu, lg), uh,
                 [&](const Field& f) { return baseline_loss(u, f, lu, lg); }, "baseline", inst);

        LossConfig cfg;
        cfg.lambda_u = lu;
        cfg.lambda_grad_u = lg;
        cfg.lambda_o = rng.uniform(0.1, 2.0);
        cfg.weights = w;
        fd_check(total_loss_grad(u, uh, cfg, p), uh,
                 [&](const Field& f) { return total_loss(u, f, cfg, p); }, "total", inst);
    }

    // Backward pass: d total_loss / d params against central differences.
    ModelConfig mc;
    mc.param_dim = 2;
    mc.hidden = {6};
    mc.grid = n;
    for (int inst = 0; inst < 100 && v.pass; ++inst) {
        GeneratorModel m = init_model(mc, 0x9000u + static_cast<std::uint64_t>(inst));
        for (double& pm : m.params) pm += 0.05 * rng.normal();
        ParamVector c;
        c.values = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

        LossConfig cfg;
        cfg.lambda_u = rng.uniform(0.1, 2.0);
        cfg.lambda_grad_u = rng.uniform(0.1, 2.0);
        cfg.lambda_o = rng.uniform(0.1, 2.0);
        cfg.weights.boundaries = p.boundaries;
        cfg.weights.values.resize(p.boundaries.size());
        for (double& x : cfg.weights.values) x = rng.uniform(0.1, 2.0);

        // Redraw the truth until the loss is kink-free around this model
        // output; the parameter step moves whole bins, hence the wider margin.
        Field truth(n, n, 2);
        bool ok = false;
        const Field recon = forward(m, c);
        for (int tries = 0; tries < 200 && !ok; ++tries) {
            truth = random_field(rng, n, n, 2);
            ok = min_pointwise_diff(recon, truth) > 1e-3 &&
                 min_jacobian_diff(recon, truth) > 1e-3 &&
                 min_bin_modulus_diff(recon, truth) > 1e-2;
        }
        v.expect(ok, "could not draw kink-free truth for backward instance " +
                         std::to_string(inst));
        if (!v.pass) break;

        const Field upstream = total_loss_grad(truth, recon, cfg, p);
        const std::vector<double> grad = backward(m, c, upstream);
        for (std::size_t k = 0; k < m.params.size() && v.pass; ++k) {
            const double keep = m.params[k];
            m.params[k] = keep + h;
            const double up = total_loss(truth, forward(m, c), cfg, p);
            m.params[k] = keep - h;
            const double dn = total_loss(truth, forward(m, c), cfg, p);
            m.params[k] = keep;
            const double numeric = (up - dn) / (2.0 * h);
            v.expect(grad_close(grad[k], numeric),
                     "backward gradient mismatch, instance " + std::to_string(inst) + " param " +
                         std::to_string(k) + ": analytic " + fmt(grad[k]) + " vs fd " +
                         fmt(numeric));
        }
    }
    v.notes.push_back("100 instances each: fourier, baseline, total, backward");
    return v;
}

// ---------------------------------------------------------------- criterion 3

Verdict criterion_spectral() {
    Verdict v;
    Rng rng(0x3a3a);

    // Quadratic-time transform oracle, written independently of dft().
    auto dft_oracle = [](const Field& f) {
        Spectrum s(f.height, f.width, f.channels);
        const double tau = 2.0 * std::numbers::pi;
        for (int ky = 0; ky < f.height; ++ky)
            for (int kx = 0; kx < f.width; ++kx)
                for (int c = 0; c < f.channels; ++c) {
                    std::complex<double> acc = 0.0;
                    for (int y = 0; y < f.height; ++y)
                        for (int x = 0; x < f.width; ++x) {
                            const double ang = -tau * (static_cast<double>(kx) * x / f.width +
                                                       static_cast<double>(ky) * y / f.height);
                            acc += f.at(y, x, c) * std::complex<double>(std::cos(ang), std::sin(ang));
                        }
                    s.at(ky, kx, c) = acc;
                }
        return s;
    };

    for (int rep = 0; rep < 20 && v.pass; ++rep) {
        const int ch = 1 + rep % 3;
        const Field f = random_field(rng, 8, 8, ch);
        const Spectrum fast = dft(f);
        const Spectrum slow = dft_oracle(f);
        double scale = 0.0;
        for (const auto& z : slow.data) scale = std::max(scale, std::abs(z));
        for (std::size_t i = 0; i < slow.data.size() && v.pass; ++i)
            v.expect(std::abs(fast.data[i] - slow.data[i]) <= 1e-10 * scale,
                     "transform differs from oracle at rep " + std::to_string(rep) + " index " +
                         std::to_string(i));

        const Field back = idft(fast);
        for (std::size_t i = 0; i < f.data.size() && v.pass; ++i)
            v.expect(std::abs(back.data[i] - f.data[i]) <= 1e-10,
                     "round trip differs at rep " + std::to_string(rep));
    }

    for (int n : {4, 8, 16, 64}) {
        const BandPartition p = make_default_partition(n, n);
        int covered = 0;
        std::vector<int> counts(static_cast<std::size_t>(p.fine_bands), 0);
        for (int b : p.band_of) {
            v.expect(b >= 0 && b < p.fine_bands,
                     "bin outside band range at size " + std::to_string(n));
            if (!v.pass) return v;
            ++counts[static_cast<std::size_t>(b)];
            ++covered;
        }
        v.expect(covered == n * n, "partition misses bins at size " + std::to_string(n));
        int total = 0;
        for (int b = 0; b < p.fine_bands; ++b) {
            v.expect(counts[static_cast<std::size_t>(b)] == p.bin_count[static_cast<std::size_t>(b)],
                     "bin count mismatch at size " + std::to_string(n));
            total += p.bin_count[static_cast<std::size_t>(b)];
        }
        v.expect(total == n * n, "bin counts do not sum to n at size " + std::to_string(n));
    }

    for (int n : {8, 16}) {
        const BandPartition p = make_default_partition(n, n);
        BandWeights ones;
        ones.boundaries = p.boundaries;
        ones.values.assign(p.boundaries.size(), 1.0);
        for (int rep = 0; rep < 10 && v.pass; ++rep) {
            const Field u = random_field(rng, n, n, 2);
            const Field uh = random_field(rng, n, n, 2);
            const Spectrum su = dft(u), sh = dft(uh);
            double full = 0.0;
            for (std::size_t i = 0; i < su.data.size(); ++i)
                full += std::abs(su.data[i] - sh.data[i]);
            full /= static_cast<double>(n * n);
            const double banded = fourier_loss(su, sh, p, ones);
            v.expect(close_rel(banded, full, 1e-12),
                     "uniform weights differ from full-spectrum l1/n at size " +
                         std::to_string(n) + ": " + fmt(banded) + " vs " + fmt(full));
        }
    }
    v.notes.push_back("oracle transform 8x8, round trip, partitions {4,8,16,64}, uniform sum");
    return v;
}

// ---------------------------------------------------------------- criterion 4

Verdict criterion_stl_search() {
    Verdict v;

    for (int n : {16, 64}) {
        const BandPartition p = make_default_partition(n, n);
        const BandWeights w = stl_weights(p);
        const int groups = p.group_count();
        for (int g = 0; g < groups && v.pass; ++g) {
            int bins = 0;  // brute force from band_of
            for (int b : p.band_of)
                if (p.group_of[static_cast<std::size_t>(b)] == g) ++bins;
            const double gamma = g == groups - 1 ? 0.5 : 2.0;
            const double expected = gamma * static_cast<double>(bins) / (n * n);
            v.expect(close_rel(w.values[static_cast<std::size_t>(g)], expected, 1e-15),
                     "stl weight off at size " + std::to_string(n) + " group " +
                         std::to_string(g));
        }
    }

    const BandPartition p64 = make_default_partition(64, 64);
    const BandWeights base = stl_weights(p64);
    const auto grid = enumerate_grid(base, default_grid_levels(p64.group_count()));
    v.expect(grid.size() == 768,
             "default grid enumerates " + std::to_string(grid.size()) + " configs, want 768");

    double base_sum = 0.0;
    for (double x : base.values) base_sum += x;
    Rng rng(0x4441);
    for (int rep = 0; rep < 500 && v.pass; ++rep) {
        const BandWeights s = sample_random(base, rng);
        double sum = 0.0;
        for (double x : s.values) {
            v.expect(std::isfinite(x) && x > 0.0,
                     "random rule produced a non-positive weight at rep " + std::to_string(rep));
            sum += std::abs(x);
        }
        v.expect(close_rel(sum, base_sum, 1e-12),
                 "random rule not normalized at rep " + std::to_string(rep) + ": " + fmt(sum) +
                     " vs " + fmt(base_sum));
    }

    // Serial and parallel searches must emit identical bytes.
    const Dataset ds = gen_dataset(make_default_config(8), default_param_ranges(), 6, 31);
    SearchConfig sc;
    sc.mode = SearchMode::grid;
    sc.levels = {{0.5, 1.0}, {1.0, 2.0}};
    sc.master_seed = 404;
    sc.boundaries = {2, 6};
    sc.model.param_dim = 3;
    sc.model.hidden = {8};
    sc.model.grid = 8;
    sc.train.loss.lambda_u = 1.0;
    sc.train.loss.lambda_grad_u = 1.0;
    sc.train.batch_size = 4;
    sc.train.epochs = 2;
    sc.train.seed = 404;
    const fs::path dir = fresh_dir("c4_search");
    sc.jobs = 1;
    write_search_csv(dir / "serial.csv", run_search(sc, ds));
    sc.jobs = 4;
    write_search_csv(dir / "parallel.csv", run_search(sc, ds));
    v.expect(slurp(dir / "serial.csv") == slurp(dir / "parallel.csv"),
             "serial and parallel search CSVs differ");
    v.expect(!slurp(dir / "serial.csv").empty(), "search CSV is empty");

    v.notes.push_back("stl pattern 16/64, grid=768, 500 random draws, serial==parallel");
    return v;
}

// ---------------------------------------------------------------- criterion 5

Verdict criterion_mre_oracle() {
    Verdict v;
    Rng rng(0x55e5);
    const int n = 8;
    const BandPartition p = make_default_partition(n, n);

    // Brute-force oracle with its own band arithmetic (centered frequencies,
    // floor of the radius), independent of the partition code.
    auto oracle = [&](const std::vector<Field>& recons, const std::vector<Field>& truths) {
        std::vector<double> num(32, 0.0), den(32, 0.0);
        int max_band = 0;
        for (std::size_t i = 0; i < recons.size(); ++i) {
            const Spectrum sr = dft(recons[i]), st = dft(truths[i]);
            for (int ky = 0; ky < n; ++ky)
                for (int kx = 0; kx < n; ++kx) {
                    const int cx = kx > n / 2 ? kx - n : kx;
                    const int cy = ky > n / 2 ? ky - n : ky;
                    const int band = static_cast<int>(
                        std::floor(std::sqrt(static_cast<double>(cx) * cx + cy * cy)));
                    max_band = std::max(max_band, band);
                    for (int c = 0; c < 2; ++c) {
                        num[static_cast<std::size_t>(band)] +=
                            std::abs(st.at(ky, kx, c) - sr.at(ky, kx, c));
                        den[static_cast<std::size_t>(band)] += std::abs(st.at(ky, kx, c));
                    }
                }
        }
        std::vector<std::optional<double>> out(static_cast<std::size_t>(max_band) + 1);
        for (std::size_t b = 0; b < out.size(); ++b)
            if (den[b] > 0.0) out[b] = num[b] / den[b];
        return out;
    };

    for (int rep = 0; rep < 50 && v.pass; ++rep) {
        std::vector<Field> recons, truths;
        for (int i = 0; i < 3; ++i) {
            recons.push_back(random_field(rng, n, n, 2));
            truths.push_back(random_field(rng, n, n, 2));
        }
        const auto got = band_mre(recons, truths, p);
        const auto want = oracle(recons, truths);
        v.expect(got.size() == want.size(), "band count differs from oracle");
        for (std::size_t b = 0; b < got.size() && v.pass; ++b) {
            v.expect(got[b].has_value() == want[b].has_value(),
                     "definedness differs from oracle at band " + std::to_string(b));
            if (got[b])
                v.expect(close_rel(*got[b], *want[b], 1e-12),
                         "mre differs from oracle at band " + std::to_string(b) + ": " +
                             fmt(*got[b]) + " vs " + fmt(*want[b]));
        }

        std::vector<Field> zeros(truths.size(), Field(n, n, 2));
        for (const auto& m : band_mre(zeros, truths, p))
            if (m) v.expect(*m == 1.0, "zero reconstruction mre is " + fmt(*m) + ", want 1");
    }
    v.notes.push_back("50 random 3-sample batches vs independent per-bin loop");
    return v;
}

// ---------------------------------------------------------------- criterion 6

struct ArmMetrics {
    double mean_mre = 0.0;
    double std_mad = 0.0;
};

ArmMetrics run_arm(const Dataset& ds, const BandPartition& part, std::uint64_t seed, bool stl) {
    ModelConfig mc;
    mc.param_dim = 3;
    mc.hidden = {64, 64};
    mc.grid = 64;

    TrainConfig tc;
    tc.loss.lambda_u = 1.0;
    tc.loss.lambda_grad_u = 1.0;
    tc.loss.lambda_o = 1.0;
    if (stl) tc.loss.weights = stl_weights(part);
    tc.learning_rate = 1e-3;
    tc.batch_size = 16;
    tc.epochs = 16;
    tc.holdout_fraction = 0.2;
    tc.seed = seed;

    GeneratorModel m = init_model(mc, seed);
    const TrainLog log = train(m, ds, tc);

    ArmMetrics out;
    int n = 0;
    for (int b = 15; b <= 25; ++b)
        if (log.holdout_mre[static_cast<std::size_t>(b)]) {
            out.mean_mre += *log.holdout_mre[static_cast<std::size_t>(b)];
            ++n;
        }
    out.mean_mre /= n;

    const std::size_t hold = holdout_count(ds.count(), tc.holdout_fraction);
    std::vector<Field> recons, truths;
    for (std::size_t i = ds.count() - hold; i < ds.count(); ++i) {
        recons.push_back(forward(m, ds.params[i]));
        truths.push_back(ds.fields[i]);
    }
    const BandStd bs = relative_band_std(recons, truths, part);
    n = 0;
    for (int b = 15; b <= 25; ++b)
        if (bs.ratio[static_cast<std::size_t>(b)]) {
            out.std_mad += std::abs(*bs.ratio[static_cast<std::size_t>(b)] - 1.0);
            ++n;
        }
    out.std_mad /= n;
    return out;
}

// Per-seed regression pins, measured on the first full run of this suite.
// Direction (who wins) is the acceptance condition; the pinned values guard
// against silent drift of the training pipeline itself.
struct SeedPin {
    double stl_mre, base_mre, stl_mad, base_mad;
};
constexpr bool kHavePins = true;
constexpr SeedPin kPins[3] = {
    {0.07354804692980871, 0.1264074678883881, 0.006877022790630415, 0.014486216053137985},
    {0.06907454309214184, 0.14202968203352684, 0.0079723729745921, 0.03017046167447006},
    {0.07833197686062925, 0.11440747840439403, 0.009234865085508465, 0.011486329141871643},
};

Verdict criterion_directional() {
    Verdict v;
    const BandPartition part = make_default_partition(64, 64);
    int mre_wins = 0, mad_wins = 0;
    const std::uint64_t seeds[3] = {1, 2, 3};

    for (int i = 0; i < 3; ++i) {
        const std::uint64_t seed = seeds[i];
        const Dataset ds =
            gen_dataset(make_default_config(64), default_param_ranges(), 256, seed);
        const ArmMetrics stl = run_arm(ds, part, seed, true);
        const ArmMetrics base = run_arm(ds, part, seed, false);
        if (stl.mean_mre < base.mean_mre) ++mre_wins;
        if (stl.std_mad < base.std_mad) ++mad_wins;
        v.notes.push_back("seed " + std::to_string(seed) + ": mre stl=" +
                          format_double(stl.mean_mre) + " base=" + format_double(base.mean_mre) +
                          ", std-mad stl=" + format_double(stl.std_mad) + " base=" +
                          format_double(base.std_mad));
        if (kHavePins) {
            const SeedPin& pin = kPins[i];
            v.expect(close_rel(stl.mean_mre, pin.stl_mre, 1e-6) &&
                         close_rel(base.mean_mre, pin.base_mre, 1e-6) &&
                         close_rel(stl.std_mad, pin.stl_mad, 1e-6) &&
                         close_rel(base.std_mad, pin.base_mad, 1e-6),
                     "regression drift against pinned values at seed " + std::to_string(seed));
        }
    }
    v.expect(mre_wins >= 2, "weighted model wins mean mre in only " + std::to_string(mre_wins) +
                                " of 3 seeds");
    v.expect(mad_wins >= 2, "weighted model wins band-std deviation in only " +
                                std::to_string(mad_wins) + " of 3 seeds");
    v.notes.push_back("bands 15..25, holdout split, wins: mre " + std::to_string(mre_wins) +
                      "/3, std " + std::to_string(mad_wins) + "/3");
    return v;
}

// ---------------------------------------------------------------- criterion 7

// meta.json carries a wall-clock timestamp and train_log.csv a seconds
// column; both are excluded from the byte comparison, everything else is
// compared bitwise.
std::string comparable_bytes(const fs::path& p) {
    const std::string raw = slurp(p);
    const std::string name = p.filename().string();
    if (name != "meta.json" && name != "train_log.csv") return raw;
    std::istringstream in(raw);
    std::string line, out;
    while (std::getline(in, line)) {
        if (name == "meta.json" && line.find("\"created_utc\"") != std::string::npos) continue;
        if (name == "train_log.csv" && line.find("epoch") == std::string::npos)
            line = line.substr(0, line.rfind(','));
        out += line + "\n";
    }
    return out;
}

bool dirs_equal(const fs::path& a, const fs::path& b, std::string& why) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    std::sort(rel.begin(), rel.end());
    std::vector<fs::path> rel_b;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
    std::sort(rel_b.begin(), rel_b.end());
    if (rel != rel_b) {
        why = "file lists differ under " + a.string();
        return false;
    }
    for (const auto& r : rel)
        if (comparable_bytes(a / r) != comparable_bytes(b / r)) {
            why = "bytes differ for " + r.string();
            return false;
        }
    return true;
}

Verdict criterion_determinism() {
    Verdict v;
    const fs::path root = fresh_dir("c7");

    // Identical flags means the same --out as well: snapshot the first run,
    // rerun the exact command, compare the trees.
    auto rerun = [&](const std::string& tag, const std::string& args) {
        if (!v.pass) return fs::path();
        const fs::path out = root / tag, snap = root / (tag + "_snapshot");
        const std::string full = args + " --out " + out.string();
        v.expect(run_cli(full, root) == 0, tag + " run 1 failed");
        if (!v.pass) return fs::path();
        fs::copy(out, snap, fs::copy_options::recursive);
        v.expect(run_cli(full, root) == 0, tag + " run 2 failed");
        if (v.pass) {
            std::string why;
            const bool same = dirs_equal(out, snap, why);
            v.expect(same, tag + ": " + why);
        }
        return out;
    };

    const fs::path data = rerun("gen", "gen --count 6 --size 16 --seed 7");
    const fs::path trained =
        rerun("train", "train --data " + data.string() +
                           " --loss stl --epochs 2 --batch 3 --hidden 8 --seed 5");
    rerun("eval", "eval --data " + data.string() + " --ckpt " +
                      (trained / "checkpoint.bin").string());
    rerun("search", "search --data " + data.string() +
                        " --mode grid --groups 2 --levels 0.5,1.0 --epochs 2 --batch 3 "
                        "--hidden 8 --seed 3 --jobs 2");
    rerun("spectrum",
          "spectrum --in " + (data / "sample_00000.fbf").string() + " --filter-upto 5");

    v.notes.push_back("gen/train/eval/search/spectrum rerun byte-identical");
    return v;
}

}  // namespace

int main() {
    struct Entry {
        int number;
        const char* label;
        Verdict (*fn)();
        double budget_s;  // 0 = no runtime requirement
    };
    const Entry entries[] = {
        {1, "metric axioms", criterion_metric_axioms, 120.0},
        {2, "gradient verification", criterion_gradients, 120.0},
        {3, "spectral exactness", criterion_spectral, 0.0},
        {4, "band weighting and search fidelity", criterion_stl_search, 0.0},
        {5, "band mre oracle", criterion_mre_oracle, 0.0},
        {6, "directional mid-band reproduction", criterion_directional, 900.0},
        {7, "command determinism", criterion_determinism, 0.0},
    };

    bool all_pass = true;
    for (const Entry& e : entries) {
        Verdict v;
        const auto t0 = clk::now();
        try {
            v = e.fn();
        } catch (const std::exception& ex) {
            v.pass = false;
            v.fail_reason = std::string("exception: ") + ex.what();
        }
        v.seconds = std::chrono::duration<double>(clk::now() - t0).count();
        if (e.budget_s > 0.0 && v.seconds > e.budget_s) {
            v.pass = false;
            v.fail_reason = "runtime " + fmt(v.seconds) + "s exceeds budget " +
                            fmt(e.budget_s) + "s";
        }
        all_pass = all_pass && v.pass;
        std::cout << (v.pass ? "[PASS]" : "[FAIL]") << " criterion " << e.number << ": "
                  << e.label;
        if (!v.pass) std::cout << " — " << v.fail_reason;
        std::cout << " (" << fmt(v.seconds) << "s)\n";
        for (const std::string& n : v.notes) std::cout << "       " << n << "\n";
        std::cout << std::flush;
    }
    return all_pass ? 0 : 1;
}
