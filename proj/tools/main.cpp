// freqflow: band-weighted Fourier loss toolkit for 2D velocity fields.
//
// Subcommands: gen, train, eval, search, spectrum. Every command writes a
// meta.json into its output directory before doing any real work, so runs
// are self-describing. Exit codes: 0 success, 2 usage/validation, 1 I/O or
// file format, 3 numeric failure.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <freqflow/freqflow.hpp>

namespace fs = std::filesystem;
using namespace freqflow;

namespace {

constexpr const char* kToolName = "freqflow";
constexpr const char* kToolVersion = "1.0.0";

std::atomic<bool> g_interrupted{false};

void on_sigint(int) { g_interrupted.store(true); }

std::string iso_utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hash_file(const fs::path& p) { return to_hex(fnv1a64(read_file_bytes(p))); }

// Fingerprint of a dataset directory: manifest hash chained with every
// sample file hash, in manifest order.
std::string hash_dataset_dir(const fs::path& dir) {
    const std::string manifest = read_file_bytes(dir / "manifest.json");
    std::string acc = to_hex(fnv1a64(manifest));
    try {
        const nlohmann::json j = nlohmann::json::parse(manifest);
        for (const auto& name : j.at("files").get<std::vector<std::string>>())
            acc += hash_file(dir / name);
    } catch (const nlohmann::json::exception&) {
        // Leave the malformed manifest to read_dataset's proper error.
    }
    return to_hex(fnv1a64(acc));
}

void write_meta(const fs::path& out_dir, const std::string& command,
                const std::vector<std::string>& command_line, const nlohmann::json& config,
                const nlohmann::json& seeds, const nlohmann::json& input_hashes) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create directory " + out_dir.string() + ": " + ec.message());
    const nlohmann::json meta = {{"tool", kToolName},
                                 {"version", kToolVersion},
                                 {"command", command},
                                 {"command_line", command_line},
                                 {"created_utc", iso_utc_now()},
                                 {"seeds", seeds},
                                 {"config", config},
                                 {"input_hashes", input_hashes}};
    write_file_bytes(out_dir / "meta.json", meta.dump(2) + "\n");
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return {{"param_dim", cfg.param_dim},
            {"hidden", cfg.hidden},
            {"grid", cfg.grid},
            {"head", head_mode_name(cfg.head)}};
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"loss", loss_config_to_json(cfg.loss)},
            {"learning_rate", cfg.learning_rate},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"adam_eps", cfg.adam_eps},
            {"batch_size", cfg.batch_size},
            {"epochs", cfg.epochs},
            {"holdout_fraction", cfg.holdout_fraction},
            {"seed", cfg.seed}};
}

// Flags shared by train and search (the training template).
struct TrainFlags {
    int epochs = 100;
    int batch = 16;
    double lr = 1e-3;
    double holdout = 0.2;
    std::vector<int> hidden = {128, 128};
    std::string head = "direct";
    double lambda_u = 1.0;
    double lambda_grad_u = 1.0;
    double lambda_o = 1.0;
    double epsilon_grad = 1e-12;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", f.batch, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--holdout", f.holdout, "Trailing fraction held out for band MRE")
        ->capture_default_str();
    cmd->add_option("--hidden", f.hidden, "Hidden layer sizes, comma-separated")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--head", f.head, "Output head: direct or curl")->capture_default_str();
    cmd->add_option("--lambda-u", f.lambda_u, "Weight of the direct term")->capture_default_str();
    cmd->add_option("--lambda-grad-u", f.lambda_grad_u, "Weight of the gradient term")
        ->capture_default_str();
    cmd->add_option("--lambda-o", f.lambda_o, "Mixing factor of the baseline term")
        ->capture_default_str();
    cmd->add_option("--epsilon-grad", f.epsilon_grad, "Spectrum-bin kink threshold")
        ->capture_default_str();
}

ModelConfig make_model_config(const Dataset& ds, const TrainFlags& f) {
    ModelConfig mc;
    mc.param_dim = static_cast<int>(ds.params.empty() ? 0 : ds.params.front().values.size());
    mc.hidden = f.hidden;
    mc.grid = ds.height();
    mc.head = head_mode_from_name(f.head);
    return mc;
}

TrainConfig make_train_config(const TrainFlags& f, std::uint64_t seed) {
    TrainConfig tc;
    tc.learning_rate = f.lr;
    tc.batch_size = f.batch;
    tc.epochs = f.epochs;
    tc.holdout_fraction = f.holdout;
    tc.seed = seed;
    tc.loss.lambda_u = f.lambda_u;
    tc.loss.lambda_grad_u = f.lambda_grad_u;
    tc.loss.lambda_o = f.lambda_o;
    tc.loss.epsilon_grad = f.epsilon_grad;
    return tc;
}

// --loss baseline | stl | <config.json>. Baseline leaves the band weights
// empty; stl derives them from the default grouping of the grid; a file
// path supplies the whole loss configuration.
LossConfig resolve_loss(const std::string& mode, const TrainFlags& f, int grid,
                        std::string* used_file) {
    LossConfig base;
    base.lambda_u = f.lambda_u;
    base.lambda_grad_u = f.lambda_grad_u;
    base.lambda_o = f.lambda_o;
    base.epsilon_grad = f.epsilon_grad;
    if (mode == "baseline") return base;
    if (mode == "stl") {
        base.weights = stl_weights(make_default_partition(grid, grid));
        return base;
    }
    const fs::path path(mode);
    if (!fs::exists(path))
        throw invalid_input("unknown loss mode '" + mode +
                            "' (expected baseline, stl, or a JSON file path)");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error(path.string() + ": " + e.what(), e.byte);
    }
    LossConfig cfg = loss_config_from_json(j, path.string());
    if (!cfg.weights.empty())
        validate_weights(cfg.weights, make_partition(grid, grid, cfg.weights.boundaries));
    if (used_file) *used_file = path.string();
    return cfg;
}

std::vector<int> resolve_boundaries(int grid, int groups, const std::vector<int>& explicit_b) {
    if (!explicit_b.empty()) return explicit_b;
    if (groups > 0) return uniform_group_boundaries(grid, grid, groups);
    return default_group_boundaries(grid, grid);
}

// ---------------------------------------------------------------------------

struct GenOpts {
    std::string out;
    std::size_t count = 8;
    int size = 64;
    std::uint64_t seed = 0;
    double amplitude = 1.0;
    double base_y = 0.25;
    double rise_speed = 0.4;
    double perturbation_scale = 0.5;
};

int cmd_gen(const GenOpts& o, const std::vector<std::string>& command_line) {
    SyntheticConfig cfg = make_default_config(o.size);
    cfg.plume_amplitude = o.amplitude;
    cfg.base_y = o.base_y;
    cfg.rise_speed = o.rise_speed;
    cfg.perturbation_scale = o.perturbation_scale;
    validate_synth_config(cfg);
    const std::vector<ParamRange> ranges = default_param_ranges();

    nlohmann::json ranges_json = nlohmann::json::array();
    for (const auto& r : ranges) ranges_json.push_back({r.lo, r.hi});
    write_meta(o.out, "gen", command_line,
               {{"synth", synth_config_to_json(cfg)},
                {"count", o.count},
                {"param_ranges", ranges_json}},
               {{"dataset_seed", o.seed}}, nlohmann::json::object());

    const Dataset ds = gen_dataset(cfg, ranges, o.count, o.seed);
    write_dataset(o.out, ds);
    std::cout << "generated " << ds.count() << " samples (" << o.size << "x" << o.size << ") in "
              << o.out << "\n";
    return 0;
}

struct TrainOpts {
    std::string data;
    std::string out;
    std::string loss = "stl";
    std::uint64_t seed = 0;
    std::uint64_t init_seed = 1;
    TrainFlags flags;
};

int cmd_train(const TrainOpts& o, const std::vector<std::string>& command_line) {
    const Dataset ds = read_dataset(o.data);
    const ModelConfig mc = make_model_config(ds, o.flags);
    TrainConfig tc = make_train_config(o.flags, o.seed);
    std::string loss_file;
    tc.loss = resolve_loss(o.loss, o.flags, mc.grid, &loss_file);
    validate_model_config(mc);
    validate_train_config(tc);

    nlohmann::json hashes = {{"dataset", hash_dataset_dir(o.data)}};
    if (!loss_file.empty()) hashes["loss_file"] = hash_file(loss_file);
    write_meta(o.out, "train", command_line,
               {{"data_dir", o.data},
                {"loss_mode", o.loss},
                {"model", model_config_to_json(mc)},
                {"train", train_config_to_json(tc)}},
               {{"train_seed", o.seed}, {"init_seed", o.init_seed}}, hashes);

    GeneratorModel model = init_model(mc, o.init_seed);
    const TrainLog log = train(model, ds, tc);
    save_checkpoint(fs::path(o.out) / "checkpoint.bin", model);
    write_train_log_csv(fs::path(o.out) / "train_log.csv", log);
    if (log.epochs.empty())
        std::cout << "trained 0 epochs; checkpoint is the initialization\n";
    else
        std::cout << "trained " << log.epochs.size() << " epochs; final total="
                  << format_double(log.epochs.back().total) << "\n";
    return 0;
}

struct EvalOpts {
    std::string data;
    std::string out;
    std::string ckpt;
    bool self_test = false;
    int hist_bins = 64;
    double log_floor = -80.0;
};

int cmd_eval(const EvalOpts& o, const std::vector<std::string>& command_line) {
    if (!o.self_test && o.ckpt.empty())
        throw invalid_input("eval needs --ckpt FILE or --self-test");
    const Dataset ds = read_dataset(o.data);

    nlohmann::json hashes = {{"dataset", hash_dataset_dir(o.data)}};
    if (!o.self_test) hashes["checkpoint"] = hash_file(o.ckpt);
    write_meta(o.out, "eval", command_line,
               {{"data_dir", o.data},
                {"checkpoint", o.ckpt},
                {"self_test", o.self_test},
                {"hist_bins", o.hist_bins},
                {"log_floor", o.log_floor}},
               nlohmann::json::object(), hashes);

    std::vector<Field> recons;
    recons.reserve(ds.count());
    if (o.self_test) {
        recons = ds.fields;
    } else {
        const GeneratorModel model = load_checkpoint(o.ckpt);
        if (model.config.grid != ds.height() || model.config.grid != ds.width())
            throw invalid_input("checkpoint grid " + std::to_string(model.config.grid) +
                                " does not match dataset grid " + std::to_string(ds.height()));
        if (ds.params.empty() ||
            static_cast<int>(ds.params.front().values.size()) != model.config.param_dim)
            throw invalid_input("checkpoint expects " + std::to_string(model.config.param_dim) +
                                " sample parameters, dataset provides " +
                                std::to_string(ds.params.empty() ? 0
                                                                 : ds.params.front().values.size()));
        for (const auto& c : ds.params) recons.push_back(forward(model, c));
    }

    const BandPartition p = make_default_partition(ds.height(), ds.width());
    const BandReport report = make_band_report(recons, ds.fields, p);

    const fs::path out(o.out);
    write_mre_csv(out / "mre.csv", report.mre);
    BandStd bs;
    bs.std_truth = report.std_truth;
    bs.std_recon = report.std_recon;
    bs.ratio = report.std_ratio;
    write_band_std_csv(out / "band_std.csv", bs);
    write_histogram_csv(out / "log_mag_hist.csv",
                        log_mag_histogram(recons, o.hist_bins, o.log_floor));
    write_histogram_csv(out / "log_mag_hist_truth.csv",
                        log_mag_histogram(ds.fields, o.hist_bins, o.log_floor));
    std::cout << "evaluated " << ds.count() << " samples over " << p.fine_bands << " bands in "
              << o.out << "\n";
    return 0;
}

struct SearchOpts {
    std::string data;
    std::string out;
    std::string mode = "grid";
    std::vector<double> levels;
    int groups = 0;
    std::vector<int> boundaries;
    int runs = 100;
    int jobs = 1;
    std::uint64_t seed = 0;
    TrainFlags flags;
};

int cmd_search(const SearchOpts& o, const std::vector<std::string>& command_line) {
    if (o.mode != "grid" && o.mode != "random")
        throw invalid_input("unknown search mode '" + o.mode + "' (expected grid or random)");
    const Dataset ds = read_dataset(o.data);

    SearchConfig cfg;
    cfg.mode = o.mode == "grid" ? SearchMode::grid : SearchMode::random;
    cfg.random_runs = o.runs;
    cfg.master_seed = o.seed;
    cfg.jobs = o.jobs;
    cfg.model = make_model_config(ds, o.flags);
    cfg.train = make_train_config(o.flags, 0);  // seed is assigned per run
    cfg.boundaries = resolve_boundaries(cfg.model.grid, o.groups, o.boundaries);
    if (!o.levels.empty())
        cfg.levels.assign(cfg.boundaries.size(), o.levels);
    validate_model_config(cfg.model);
    validate_train_config(cfg.train);
    make_partition(cfg.model.grid, cfg.model.grid, cfg.boundaries);  // fail early on bad grouping

    nlohmann::json levels_json = nlohmann::json::array();
    for (const auto& l :
         (cfg.levels.empty() ? default_grid_levels(static_cast<int>(cfg.boundaries.size()))
                             : cfg.levels))
        levels_json.push_back(l);
    write_meta(o.out, "search", command_line,
               {{"data_dir", o.data},
                {"mode", o.mode},
                {"levels", levels_json},
                {"random_runs", o.runs},
                {"boundaries", cfg.boundaries},
                {"jobs", o.jobs},
                {"model", model_config_to_json(cfg.model)},
                {"train", train_config_to_json(cfg.train)}},
               {{"master_seed", o.seed},
                {"init_seed", search_init_seed(o.seed)},
                {"train_seed", search_train_seed(o.seed)}},
               {{"dataset", hash_dataset_dir(o.data)}});

    std::signal(SIGINT, on_sigint);
    const SearchResult res = run_search(cfg, ds, &g_interrupted);
    std::signal(SIGINT, SIG_DFL);

    // Flush whatever completed, interrupted or not.
    write_search_csv(fs::path(o.out) / "search_results.csv", res);
    std::size_t failed = 0;
    for (const auto& r : res.runs) failed += r.failed ? 1u : 0u;
    std::cout << (res.interrupted ? "interrupted after " : "completed ") << res.runs.size()
              << " runs (" << failed << " failed) -> search_results.csv\n";
    return res.interrupted ? 130 : 0;
}

struct SpectrumOpts {
    std::string in;
    std::string out;
    int filter_upto = -1;
    int groups = 0;
    std::vector<int> boundaries;
};

int cmd_spectrum(const SpectrumOpts& o, const std::vector<std::string>& command_line) {
    const Field f = read_field(o.in);
    const std::vector<int> boundaries = resolve_boundaries(f.height, o.groups, o.boundaries);
    const BandPartition p = make_partition(f.height, f.width, boundaries);
    if (o.filter_upto >= p.fine_bands)
        throw invalid_input("--filter-upto " + std::to_string(o.filter_upto) +
                            " is out of range: this field has fine bands 0.." +
                            std::to_string(p.fine_bands - 1));

    write_meta(o.out, "spectrum", command_line,
               {{"input", o.in},
                {"filter_upto", o.filter_upto},
                {"boundaries", boundaries}},
               nlohmann::json::object(), {{"input_field", hash_file(o.in)}});

    const fs::path out(o.out);
    write_file_bytes(out / "partition.json", partition_to_json(p).dump(2) + "\n");
    if (o.filter_upto >= 0) {
        write_field(out / "filtered.fbf", band_filter(f, p, o.filter_upto));
        std::cout << "wrote partition.json and filtered.fbf (bands > " << o.filter_upto
                  << " removed) in " << o.out << "\n";
    } else {
        std::cout << "wrote partition.json in " << o.out << "\n";
    }
    return 0;
}

int run_guarded(int (*fn)(void*, const std::vector<std::string>&), void* opts,
                const std::vector<std::string>& command_line) {
    try {
        return fn(opts, command_line);
    } catch (const invalid_input& e) {
        std::cerr << kToolName << ": " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << kToolName << ": " << e.what() << "\n";
        return 1;
    } catch (const format_error& e) {
        std::cerr << kToolName << ": " << e.what() << "\n";
        return 1;
    } catch (const numeric_error& e) {
        std::cerr << kToolName << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << kToolName << ": internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Band-weighted Fourier loss toolkit for 2D velocity fields"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::vector<std::string> command_line(argv, argv + argc);

    GenOpts gen;
    CLI::App* cgen = app.add_subcommand("gen", "Generate a synthetic velocity-field dataset");
    cgen->add_option("--out", gen.out, "Output dataset directory")->required();
    cgen->add_option("--count", gen.count, "Number of samples")->capture_default_str();
    cgen->add_option("--size", gen.size, "Grid size (even power of two)")->capture_default_str();
    cgen->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
    cgen->add_option("--amplitude", gen.amplitude, "Blob amplitude")->capture_default_str();
    cgen->add_option("--base-y", gen.base_y, "Blob base height")->capture_default_str();
    cgen->add_option("--rise-speed", gen.rise_speed, "Blob rise speed")->capture_default_str();
    cgen->add_option("--perturbation-scale", gen.perturbation_scale, "Perturbation strength")
        ->capture_default_str();
    cgen->add_option("--jobs", "Accepted for uniformity; generation is single-threaded");

    TrainOpts train;
    CLI::App* ctrain = app.add_subcommand("train", "Train a generator on a dataset");
    ctrain->add_option("--data", train.data, "Dataset directory")->required();
    ctrain->add_option("--out", train.out, "Output directory")->required();
    ctrain->add_option("--loss", train.loss, "baseline, stl, or a loss-config JSON file")
        ->capture_default_str();
    ctrain->add_option("--seed", train.seed, "Shuffle seed")->capture_default_str();
    ctrain->add_option("--init-seed", train.init_seed, "Model initialization seed")
        ->capture_default_str();
    add_train_flags(ctrain, train.flags);
    ctrain->add_option("--jobs", "Accepted for uniformity; training is single-threaded");

    EvalOpts eval;
    CLI::App* ceval = app.add_subcommand("eval", "Evaluate a checkpoint against a dataset");
    ceval->add_option("--data", eval.data, "Dataset directory")->required();
    ceval->add_option("--out", eval.out, "Output directory")->required();
    CLI::Option* ockpt = ceval->add_option("--ckpt", eval.ckpt, "Checkpoint file");
    ceval->add_flag("--self-test", eval.self_test,
                    "Evaluate the ground truth against itself (all-zero errors)")
        ->excludes(ockpt);
    ceval->add_option("--hist-bins", eval.hist_bins, "Histogram bin count")
        ->capture_default_str();
    ceval->add_option("--log-floor", eval.log_floor, "ln-magnitude exclusion floor")
        ->capture_default_str();
    ceval->add_option("--jobs", "Accepted for uniformity; evaluation is single-threaded");

    SearchOpts search;
    CLI::App* csearch = app.add_subcommand("search", "Search band weights around the heuristic");
    csearch->add_option("--data", search.data, "Dataset directory")->required();
    csearch->add_option("--out", search.out, "Output directory")->required();
    csearch->add_option("--mode", search.mode, "grid or random")->capture_default_str();
    csearch->add_option("--levels", search.levels,
                        "Comma-separated multipliers applied to every group")
        ->delimiter(',');
    csearch->add_option("--groups", search.groups,
                        "Evenly split the bands into this many groups (0 = default layout)")
        ->capture_default_str();
    csearch->add_option("--boundaries", search.boundaries,
                        "Explicit band-group boundaries, comma-separated")
        ->delimiter(',');
    csearch->add_option("--runs", search.runs, "Random-mode run count")->capture_default_str();
    csearch->add_option("--jobs", search.jobs, "Worker threads")->capture_default_str();
    csearch->add_option("--seed", search.seed, "Master seed")->capture_default_str();
    add_train_flags(csearch, search.flags);

    SpectrumOpts spectrum;
    CLI::App* cspec = app.add_subcommand("spectrum", "Band partition export and band filtering");
    cspec->add_option("--in", spectrum.in, "Input FBF1 field file")->required();
    cspec->add_option("--out", spectrum.out, "Output directory")->required();
    cspec->add_option("--filter-upto", spectrum.filter_upto,
                      "Keep only fine bands <= this index and write filtered.fbf");
    cspec->add_option("--groups", spectrum.groups,
                      "Evenly split the bands into this many groups (0 = default layout)")
        ->capture_default_str();
    cspec->add_option("--boundaries", spectrum.boundaries,
                      "Explicit band-group boundaries, comma-separated")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (cgen->parsed())
        return run_guarded(
            [](void* o, const std::vector<std::string>& cl) {
                return cmd_gen(*static_cast<GenOpts*>(o), cl);
            },
            &gen, command_line);
    if (ctrain->parsed())
        return run_guarded(
            [](void* o, const std::vector<std::string>& cl) {
                return cmd_train(*static_cast<TrainOpts*>(o), cl);
            },
            &train, command_line);
    if (ceval->parsed())
        return run_guarded(
            [](void* o, const std::vector<std::string>& cl) {
                return cmd_eval(*static_cast<EvalOpts*>(o), cl);
            },
            &eval, command_line);
    if (csearch->parsed())
        return run_guarded(
            [](void* o, const std::vector<std::string>& cl) {
                return cmd_search(*static_cast<SearchOpts*>(o), cl);
            },
            &search, command_line);
    if (cspec->parsed())
        return run_guarded(
            [](void* o, const std::vector<std::string>& cl) {
                return cmd_spectrum(*static_cast<SpectrumOpts*>(o), cl);
            },
            &spectrum, command_line);
    return 2;  // unreachable: require_subcommand enforces a choice
}
