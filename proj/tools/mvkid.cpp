// mvkid: generate synthetic keystroke data, train and evaluate MVMC models
// and baselines, and write CSV reports.

#include "mvkid/config.hpp"
#include "mvkid/eval.hpp"
#include "mvkid/kernels.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace mvkid;

namespace {

/// Bad flags, config or inputs detected before any work starts.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string num(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

/// Flags shared by every command that reads a run config.
struct CommonFlags {
    std::string config;
    std::string data;
    std::string out_dir;
    std::string run_name;
    std::uint64_t seed = 0;

    CLI::Option* seed_opt = nullptr;

    void add(CLI::App& cmd, bool with_data = true)
    {
        cmd.add_option("--config", config, "JSON run config; flags override its values")->check(CLI::ExistingFile);
        if (with_data)
            cmd.add_option("--data", data, "JSONL dataset (one session per line)");
        cmd.add_option("--out-dir", out_dir, "Output root (default: out)");
        cmd.add_option("--run-name", run_name, "Run directory under the output root (default: run)");
        seed_opt = cmd.add_option("--seed", seed, "Global seed; sub-seeds are hash64(seed, component)");
    }

    RunConfig resolve() const
    {
        RunConfig cfg;
        try {
            if (!config.empty())
                cfg = load_run_config(config);
            if (seed_opt && seed_opt->count() > 0) {
                // Re-derive sub-seeds from the overriding global seed; explicit config sub-seeds still win.
                json j = config.empty() ? json::object() : json::parse(read_file(config));
                j["seed"] = seed;
                cfg = run_config_from_json(j);
            }
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        } catch (const json::exception& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
        if (!data.empty())
            cfg.data = data;
        if (!out_dir.empty())
            cfg.out_dir = out_dir;
        if (!run_name.empty())
            cfg.run_name = run_name;
        try {
            cfg.validate();
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        return cfg;
    }
};

Dataset require_data(const RunConfig& cfg)
{
    if (cfg.data.empty())
        throw UsageError("no dataset: pass --data or set \"data\" in the config");
    if (!std::filesystem::exists(cfg.data))
        throw UsageError("dataset not found: " + cfg.data.string());
    return load_dataset(cfg.data);
}

ExperimentOptions options_for(const RunConfig& cfg)
{
    ExperimentOptions opts;
    opts.test_fraction = cfg.test_fraction;
    opts.val_fraction = cfg.val_fraction;
    opts.seed = cfg.seed;
    opts.model = cfg.model;
    opts.baselines = cfg.baselines;
    return opts;
}

ModelSpec parse_spec(const std::string& model, const std::string& view)
{
    std::string name = model;
    if (model == "deep-single") {
        if (view.empty())
            throw UsageError("--model deep-single needs --view {alphabet|symbol|accel}");
        name += ":" + view;
    } else if (!view.empty()) {
        throw UsageError("--view only applies to --model deep-single");
    }
    try {
        return ModelSpec::parse(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::string history_csv(const std::vector<EpochRecord>& history, std::size_t best_epoch)
{
    std::string out = "epoch,train_loss,val_accuracy,selected\n";
    for (const auto& r : history)
        out += std::to_string(r.epoch) + ',' + num(r.train_loss) + ',' + num(r.val_accuracy) + ','
               + (r.epoch == best_epoch ? "1" : "0") + '\n';
    return out;
}

int cmd_gen(const GenConfig& flags, const std::string& out, const std::string& config, const CLI::App& cmd)
{
    GenConfig cfg;
    if (!config.empty()) {
        try {
            const RunConfig rc = load_run_config(config);
            cfg = rc.gen;
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
    }
    if (cmd.count("--users"))
        cfg.n_users = flags.n_users;
    if (cmd.count("--sessions"))
        cfg.sessions_per_user = flags.sessions_per_user;
    if (cmd.count("--separation"))
        cfg.separation = flags.separation;
    if (cmd.count("--seed"))
        cfg.seed = flags.seed;
    if (cmd.count("--overlap"))
        cfg.view_overlap = flags.view_overlap;
    if (cmd.count("--keys"))
        cfg.keys_per_session = flags.keys_per_session;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Dataset ds = generate_dataset(cfg);
    if (std::filesystem::path(out).has_parent_path())
        std::filesystem::create_directories(std::filesystem::path(out).parent_path());
    save_dataset(ds, out);
    std::cout << "wrote " << ds.size() << " sessions for " << ds.num_classes() << " users to " << out << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg, const ModelSpec& spec)
{
    const Dataset ds = require_data(cfg);
    const ExperimentOptions opts = options_for(cfg);
    FitResult r = fit_and_evaluate(ds, spec, opts);

    const auto dir = cfg.run_dir();
    std::filesystem::create_directories(dir);
    std::map<std::string, std::string> meta{{"model", spec.name()},
                                            {"seed", std::to_string(cfg.seed)},
                                            {"test_fraction", num(cfg.test_fraction)},
                                            {"data", cfg.data.filename().string()}};
    if (r.deep) {
        r.deep->model.metadata = meta;
        save_model(r.deep->model, dir / "checkpoint.bin");
        write_file(dir / "history.csv", history_csv(r.deep->history, r.deep->best_epoch));
    } else {
        r.baseline->metadata = meta;
        write_file(dir / "baseline.json", r.baseline->to_json() + "\n");
        write_file(dir / "history.csv", "epoch,train_loss,val_accuracy,selected\n");
    }
    ResultRow row{"train", spec.name(), ds.num_classes(), cfg.seed, r.report, r.train_seconds, r.infer_ms_median};
    write_file(dir / "results.csv", results_csv({row}, cfg.record_timing));
    write_file(dir / "per_class.csv", per_class_csv(r.report, ds.labels()));
    write_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
    std::cout << spec.name() << ": test accuracy " << num(r.report.accuracy) << ", macro F1 "
              << num(r.report.macro_f1) << " -> " << dir.string() << '\n';
    return 0;
}

int cmd_eval(RunConfig cfg, const std::string& checkpoint, bool all)
{
    if (!std::filesystem::exists(checkpoint))
        throw UsageError("checkpoint not found: " + checkpoint);
    const std::string bytes = read_file(checkpoint);
    const bool deep = bytes.rfind("MVKD", 0) == 0;

    std::optional<MvmcModel> model;
    std::optional<TrainedBaseline> baseline;
    std::map<std::string, std::string> meta;
    std::vector<std::string> labels;
    if (deep) {
        model = deserialize_model(bytes);
        meta = model->metadata;
        labels = model->labels;
    } else {
        baseline = TrainedBaseline::from_json(bytes);
        meta = baseline->metadata;
        labels = baseline->labels;
    }

    const Dataset loaded = require_data(cfg);
    const Dataset ds(loaded.sessions(), labels);
    Dataset target = ds;
    if (!all) {
        // Re-derive the held-out split the model was evaluated on at training time.
        if (!meta.count("seed") || !meta.count("test_fraction"))
            throw UsageError("checkpoint has no split metadata; pass --all to evaluate on the whole dataset");
        const std::uint64_t seed = std::stoull(meta.at("seed"));
        target = stratified_split(ds, std::stod(meta.at("test_fraction")), hash64(seed, "split")).second;
    }
    const ConfusionMatrix cm = deep ? evaluate_model(*model, target) : evaluate_baseline(*baseline, target);
    EvalReport report = compute_metrics(cm);
    const std::string name = meta.count("model") ? meta.at("model") : (deep ? "deep-mvmc" : baseline->spec.name());
    report.model = name;

    const auto dir = cfg.run_dir();
    ResultRow row{all ? "eval-all" : "eval", name, labels.size(), cfg.seed, report, 0.0, 0.0};
    write_file(dir / "results.csv", results_csv({row}, false));
    write_file(dir / "per_class.csv", per_class_csv(report, labels));
    std::cout << name << ": accuracy " << num(report.accuracy) << ", macro F1 " << num(report.macro_f1) << " on "
              << target.size() << " sessions\n";
    return 0;
}

int cmd_heatmap(const RunConfig& cfg, const ModelSpec& spec)
{
    const Dataset ds = require_data(cfg);
    const Heatmap h = pairwise_heatmap(ds, options_for(cfg), spec);
    write_file(cfg.run_dir() / "heatmap.csv", heatmap_csv(h));
    std::cout << "wrote " << h.labels.size() * (h.labels.size() - 1) / 2 << " pairs to "
              << (cfg.run_dir() / "heatmap.csv").string() << '\n';
    return 0;
}

int cmd_incremental(const RunConfig& cfg)
{
    const Dataset ds = require_data(cfg);
    std::vector<ModelSpec> specs;
    for (const auto& m : cfg.models) {
        try {
            specs.push_back(ModelSpec::parse(m));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    const auto rows = incremental_experiment(ds, cfg.class_counts, specs, options_for(cfg));
    write_file(cfg.run_dir() / "results.csv", results_csv(rows, cfg.record_timing));
    for (const auto& r : rows)
        std::cout << r.model << " n=" << r.n_classes << ": accuracy " << num(r.report.accuracy) << '\n';
    return 0;
}

int cmd_bench(const RunConfig& cfg, const std::string& checkpoint, std::size_t repetitions, std::size_t n_synthetic)
{
    if (checkpoint.empty())
        throw UsageError("bench needs --checkpoint");
    if (!std::filesystem::exists(checkpoint))
        throw UsageError("checkpoint not found: " + checkpoint);
    const MvmcModel model = load_model(checkpoint);
    std::vector<Session> sessions;
    if (!cfg.data.empty()) {
        sessions = require_data(cfg).sessions();
    } else {
        GenConfig g = cfg.gen;
        g.sessions_per_user = (n_synthetic + g.n_users - 1) / g.n_users;
        sessions = generate_dataset(g).sessions();
    }
    const LatencyReport r = latency_bench(model, sessions, repetitions);
    write_file(cfg.run_dir() / "latency.csv", latency_csv(r));
    std::cout << "median latency " << num(r.median_ms) << " ms/session (forward only " << num(r.median_ms_forward_only)
              << " ms); reference " << kReferenceLatencyMs << " ms\n";
    return 0;
}

int cmd_patterns(const RunConfig& cfg, std::size_t top_n)
{
    const Dataset ds = require_data(cfg);
    const auto p = pattern_summary(ds, std::min(top_n, ds.num_classes()));
    write_file(cfg.run_dir() / "patterns.csv", patterns_csv(p));
    std::cout << "wrote patterns for " << p.size() << " users to " << (cfg.run_dir() / "patterns.csv").string()
              << '\n';
    return 0;
}

int cmd_gradcheck(std::size_t seeds, std::size_t hidden, std::size_t classes, double eps, double tolerance)
{
    NetworkShape shape;
    shape.hidden_size = hidden;
    shape.fusion_size = 2 * hidden;
    shape.n_classes = classes;
    double worst = 0.0;
    std::string worst_tensor;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const Network net = Network::random(shape, hash64(seed, "gradcheck"));
        Rng rng = make_rng(stream_key(hash64(seed, "gradcheck"), 1));
        EncodedSession x;
        std::uniform_int_distribution<std::size_t> len(1, 6);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto v : kAllViews) {
            const std::size_t n = len(rng);
            EncodedView& e = x[index_of(v)];
            e.values = Matrix(n + 2, feature_count(v));
            e.mask.assign(n + 2, 0);
            e.true_length = n;
            for (std::size_t t = 0; t < n; ++t) {
                e.mask[t] = 1;
                for (std::size_t f = 0; f < feature_count(v); ++f)
                    e.values(t, f) = u(rng);
            }
        }
        const auto r = network_grad_check(net, x, seed % classes, eps);
        std::cout << "seed " << seed << ": " << r.coordinates << " coordinates, max relative error "
                  << r.max_rel_error << " (" << r.worst_tensor << ")\n";
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_tensor = r.worst_tensor;
        }
    }
    std::cout << "max relative error " << worst << " in " << worst_tensor << (worst < tolerance ? " OK" : " FAIL")
              << '\n';
    return worst < tolerance ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-view keystroke identification: data generation, training, evaluation and reports"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "Write a synthetic JSONL dataset");
    GenConfig gen_flags;
    std::string gen_out, gen_config;
    gen->add_option("--users", gen_flags.n_users, "Number of users (default 5)");
    gen->add_option("--sessions", gen_flags.sessions_per_user, "Sessions per user (default 100)");
    gen->add_option("--separation", gen_flags.separation, "Distance scale between user profiles (default 2.0)");
    gen->add_option("--seed", gen_flags.seed, "Generator seed (default 1)");
    gen->add_option("--overlap", gen_flags.view_overlap, "Per-view pairwise profile overlap in [0, 1] (default 0)");
    gen->add_option("--keys", gen_flags.keys_per_session, "Mean keystrokes per session (default 40)");
    gen->add_option("--config", gen_config, "JSON run config; its \"gen\" block supplies defaults")
        ->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "Output JSONL path")->required();

    CommonFlags train_flags;
    std::string train_model = "deep-mvmc", train_view;
    std::size_t epochs = 0, hidden = 0;
    bool serial = false;
    auto* train_cmd = app.add_subcommand("train", "Train one model, evaluate it on the held-out split, save it");
    train_flags.add(*train_cmd);
    train_cmd->add_option("--model", train_model, "deep-mvmc | deep-single | logreg | svm | dtree | rforest");
    train_cmd->add_option("--view", train_view, "View for deep-single: alphabet | symbol | accel");
    auto* epochs_opt = train_cmd->add_option("--epochs", epochs, "Override model.epochs");
    auto* hidden_opt = train_cmd->add_option("--hidden", hidden, "Override model.hidden_size");
    train_cmd->add_flag("--serial", serial, "Use the single-threaded reference kernels");

    CommonFlags eval_flags;
    std::string eval_checkpoint;
    bool eval_all = false;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model; writes results.csv and per_class.csv");
    eval_flags.add(*eval_cmd);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint.bin or baseline.json")->required();
    eval_cmd->add_flag("--all", eval_all, "Evaluate on every session instead of the recorded test split");

    CommonFlags heat_flags;
    std::string heat_model = "deep-mvmc", heat_view;
    auto* heat_cmd = app.add_subcommand("heatmap", "Pairwise two-user identification; writes heatmap.csv");
    heat_flags.add(*heat_cmd);
    heat_cmd->add_option("--model", heat_model, "Model trained per pair (default deep-mvmc)");
    heat_cmd->add_option("--view", heat_view, "View for deep-single");

    CommonFlags inc_flags;
    auto* inc_cmd = app.add_subcommand(
        "incremental", "Fit config.models on the n most active users for each n in config.class_counts");
    inc_flags.add(*inc_cmd);

    CommonFlags bench_flags;
    std::string bench_checkpoint;
    std::size_t bench_reps = 0, bench_n = 200;
    auto* bench_cmd = app.add_subcommand("bench", "Per-session inference latency; writes latency.csv");
    bench_flags.add(*bench_cmd);
    bench_cmd->add_option("--checkpoint", bench_checkpoint, "Deep model checkpoint (required)");
    auto* reps_opt = bench_cmd->add_option("--repetitions", bench_reps, "Timed passes per session (default 3)");
    bench_cmd->add_option("--sessions", bench_n, "Synthetic sessions to time when no --data is given (default 200)");

    CommonFlags pat_flags;
    std::size_t top_n = 0;
    auto* pat_cmd = app.add_subcommand("patterns", "Typing-pattern statistics of the most active users");
    pat_flags.add(*pat_cmd);
    auto* top_opt = pat_cmd->add_option("--top", top_n, "Number of users (default 5)");

    std::size_t gc_seeds = 10, gc_hidden = 4, gc_classes = 3;
    double gc_eps = 1e-5, gc_tol = 1e-4;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check of random small models");
    gc_cmd->add_option("--seeds", gc_seeds, "Number of random models (default 10)");
    gc_cmd->add_option("--hidden", gc_hidden, "GRU hidden size (default 4)");
    gc_cmd->add_option("--classes", gc_classes, "Number of classes (default 3)")->check(CLI::PositiveNumber);
    gc_cmd->add_option("--eps", gc_eps, "Central-difference step (default 1e-5)");
    gc_cmd->add_option("--tolerance", gc_tol, "Pass threshold on the relative error (default 1e-4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen(gen_flags, gen_out, gen_config, *gen);
        if (train_cmd->parsed()) {
            RunConfig cfg = train_flags.resolve();
            const ModelSpec spec = parse_spec(train_model, train_view);
            if (epochs_opt->count())
                cfg.model.epochs = epochs;
            if (hidden_opt->count())
                cfg.model.hidden_size = hidden;
            if (serial) {
                cfg.model.parallel = false;
                cfg.baselines.parallel = false;
            }
            try {
                cfg.model.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            return cmd_train(cfg, spec);
        }
        if (eval_cmd->parsed())
            return cmd_eval(eval_flags.resolve(), eval_checkpoint, eval_all);
        if (heat_cmd->parsed())
            return cmd_heatmap(heat_flags.resolve(), parse_spec(heat_model, heat_view));
        if (inc_cmd->parsed())
            return cmd_incremental(inc_flags.resolve());
        if (bench_cmd->parsed()) {
            const RunConfig cfg = bench_flags.resolve();
            return cmd_bench(cfg, bench_checkpoint, reps_opt->count() ? bench_reps : cfg.bench_repetitions, bench_n);
        }
        if (pat_cmd->parsed()) {
            const RunConfig cfg = pat_flags.resolve();
            return cmd_patterns(cfg, top_opt->count() ? top_n : cfg.patterns_top_n);
        }
        if (gc_cmd->parsed())
            return cmd_gradcheck(gc_seeds, gc_hidden, gc_classes, gc_eps, gc_tol);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
