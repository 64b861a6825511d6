#include "mvkid/config.hpp"

#include <fstream>
#include <set>

namespace mvkid {

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out)
{
    if (auto it = j.find(key); it != j.end() && !it->is_null()) {
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
        }
    }
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const char* where)
{
    if (!j.is_object())
        throw ConfigError(std::string(where) + ": expected a JSON object");
    std::set<std::string_view> k(known);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!k.count(it.key()))
            throw ConfigError(std::string(where) + ": unknown key \"" + it.key() + "\"");
}

json views_to_json(const std::array<bool, kNumViews>& views)
{
    json arr = json::array();
    for (auto v : kAllViews)
        if (views[index_of(v)])
            arr.push_back(std::string(view_name(v)));
    return arr;
}

std::array<bool, kNumViews> views_from_json(const json& j)
{
    if (!j.is_array())
        throw ConfigError("views: expected an array of view names");
    std::array<bool, kNumViews> out{};
    for (const auto& name : j) {
        auto v = name.is_string() ? parse_view(name.get<std::string>()) : std::nullopt;
        if (!v)
            throw ConfigError("views: unknown view " + name.dump() + " (valid: alphabet, symbol, accel)");
        out[index_of(*v)] = true;
    }
    return out;
}

} // namespace

json to_json(const ModelConfig& c)
{
    json j;
    j["hidden_size"] = c.hidden_size;
    j["classifier_hidden"] = c.classifier_hidden;
    j["n_classes"] = c.n_classes;
    j["views"] = views_to_json(c.views);
    j["max_len"] = {{"alphabet", c.max_len[0]}, {"symbol", c.max_len[1]}, {"accel", c.max_len[2]}};
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["nadam"] = {{"lr", c.nadam.lr},
                  {"mu", c.nadam.mu},
                  {"nu", c.nadam.nu},
                  {"eps", c.nadam.eps},
                  {"schedule_decay", c.nadam.schedule_decay}};
    j["clip_norm"] = c.clip_norm;
    j["use_bias"] = c.use_bias;
    return j;
}

ModelConfig model_config_from_json(const json& j, ModelConfig c)
{
    reject_unknown(j,
                   {"hidden_size", "classifier_hidden", "n_classes", "views", "max_len", "epochs", "batch_size", "seed",
                    "nadam", "clip_norm", "use_bias", "parallel"},
                   "model");
    read_opt(j, "hidden_size", c.hidden_size);
    read_opt(j, "classifier_hidden", c.classifier_hidden);
    read_opt(j, "n_classes", c.n_classes);
    if (j.contains("views"))
        c.views = views_from_json(j["views"]);
    if (j.contains("max_len")) {
        const json& m = j["max_len"];
        reject_unknown(m, {"alphabet", "symbol", "accel"}, "model.max_len");
        read_opt(m, "alphabet", c.max_len[0]);
        read_opt(m, "symbol", c.max_len[1]);
        read_opt(m, "accel", c.max_len[2]);
    }
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "seed", c.seed);
    if (j.contains("nadam")) {
        const json& n = j["nadam"];
        reject_unknown(n, {"lr", "mu", "nu", "eps", "schedule_decay"}, "model.nadam");
        read_opt(n, "lr", c.nadam.lr);
        read_opt(n, "mu", c.nadam.mu);
        read_opt(n, "nu", c.nadam.nu);
        read_opt(n, "eps", c.nadam.eps);
        read_opt(n, "schedule_decay", c.nadam.schedule_decay);
    }
    read_opt(j, "clip_norm", c.clip_norm);
    read_opt(j, "use_bias", c.use_bias);
    read_opt(j, "parallel", c.parallel);
    return c;
}

json to_json(const Normalizer& nz)
{
    json j;
    for (auto v : kAllViews)
        j[std::string(view_name(v))] = {{"min", nz.min[index_of(v)]}, {"max", nz.max[index_of(v)]}};
    return j;
}

Normalizer normalizer_from_json(const json& j)
{
    Normalizer nz;
    for (auto v : kAllViews) {
        const auto i = index_of(v);
        const json& e = j.at(std::string(view_name(v)));
        nz.min[i] = e.at("min").get<Vector>();
        nz.max[i] = e.at("max").get<Vector>();
        if (nz.min[i].size() != feature_count(v) || nz.max[i].size() != feature_count(v))
            throw ConfigError("normalizer: wrong feature count for view " + std::string(view_name(v)));
        for (std::size_t f = 0; f < feature_count(v); ++f)
            if (!(nz.min[i][f] <= nz.max[i][f]))
                throw ConfigError("normalizer: min > max");
    }
    return nz;
}

json to_json(const GenConfig& c)
{
    return {{"n_users", c.n_users},
            {"sessions_per_user", c.sessions_per_user},
            {"separation", c.separation},
            {"seed", c.seed},
            {"view_overlap", c.view_overlap},
            {"keys_per_session", c.keys_per_session}};
}

GenConfig gen_config_from_json(const json& j, GenConfig c)
{
    reject_unknown(j, {"n_users", "sessions_per_user", "separation", "seed", "view_overlap", "keys_per_session"},
                   "gen");
    read_opt(j, "n_users", c.n_users);
    read_opt(j, "sessions_per_user", c.sessions_per_user);
    read_opt(j, "separation", c.separation);
    read_opt(j, "seed", c.seed);
    read_opt(j, "view_overlap", c.view_overlap);
    read_opt(j, "keys_per_session", c.keys_per_session);
    return c;
}

json to_json(const BaselineHyper& h)
{
    return {{"logreg_lambda", h.logreg_lambda},
            {"logreg_lr", h.logreg_lr},
            {"logreg_iters", h.logreg_iters},
            {"logreg_tol", h.logreg_tol},
            {"svm_lambda", h.svm_lambda},
            {"svm_lr", h.svm_lr},
            {"svm_iters", h.svm_iters},
            {"tree_max_depth", h.tree_max_depth},
            {"tree_min_samples_leaf", h.tree_min_samples_leaf},
            {"forest_trees", h.forest_trees},
            {"forest_bootstrap", h.forest_bootstrap},
            {"forest_max_features", h.forest_max_features},
            {"seed", h.seed}};
}

BaselineHyper baseline_hyper_from_json(const json& j, BaselineHyper h)
{
    reject_unknown(j,
                   {"logreg_lambda", "logreg_lr", "logreg_iters", "logreg_tol", "svm_lambda", "svm_lr", "svm_iters",
                    "tree_max_depth", "tree_min_samples_leaf", "forest_trees", "forest_bootstrap",
                    "forest_max_features", "seed", "parallel"},
                   "baselines");
    read_opt(j, "logreg_lambda", h.logreg_lambda);
    read_opt(j, "logreg_lr", h.logreg_lr);
    read_opt(j, "logreg_iters", h.logreg_iters);
    read_opt(j, "logreg_tol", h.logreg_tol);
    read_opt(j, "svm_lambda", h.svm_lambda);
    read_opt(j, "svm_lr", h.svm_lr);
    read_opt(j, "svm_iters", h.svm_iters);
    read_opt(j, "tree_max_depth", h.tree_max_depth);
    read_opt(j, "tree_min_samples_leaf", h.tree_min_samples_leaf);
    read_opt(j, "forest_trees", h.forest_trees);
    read_opt(j, "forest_bootstrap", h.forest_bootstrap);
    read_opt(j, "forest_max_features", h.forest_max_features);
    read_opt(j, "seed", h.seed);
    read_opt(j, "parallel", h.parallel);
    return h;
}

void RunConfig::validate() const
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must lie in (0, 1)");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must lie in [0, 1)");
    if (run_name.empty() || run_name.find('/') != std::string::npos)
        throw ConfigError("run_name must be a non-empty single path component");
    try {
        model.validate();
        gen.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RunConfig run_config_from_json(const json& j)
{
    reject_unknown(j,
                   {"data", "out_dir", "run_name", "seed", "test_fraction", "val_fraction", "gen", "model",
                    "baselines", "class_counts", "models", "bench_repetitions", "patterns_top_n", "record_timing"},
                   "config");
    RunConfig c;
    std::string data, out_dir;
    read_opt(j, "data", data);
    read_opt(j, "out_dir", out_dir);
    if (!data.empty())
        c.data = data;
    if (!out_dir.empty())
        c.out_dir = out_dir;
    read_opt(j, "run_name", c.run_name);
    read_opt(j, "seed", c.seed);
    read_opt(j, "test_fraction", c.test_fraction);
    read_opt(j, "val_fraction", c.val_fraction);
    // Sub-seeds default to derivations of the global seed; explicit values win.
    c.model.seed = c.sub_seed("model");
    c.baselines.seed = c.sub_seed("baselines");
    c.gen.seed = c.sub_seed("gen");
    if (j.contains("gen"))
        c.gen = gen_config_from_json(j["gen"], c.gen);
    if (j.contains("model"))
        c.model = model_config_from_json(j["model"], c.model);
    if (j.contains("baselines"))
        c.baselines = baseline_hyper_from_json(j["baselines"], c.baselines);
    read_opt(j, "class_counts", c.class_counts);
    read_opt(j, "models", c.models);
    read_opt(j, "bench_repetitions", c.bench_repetitions);
    read_opt(j, "patterns_top_n", c.patterns_top_n);
    read_opt(j, "record_timing", c.record_timing);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

json to_json(const RunConfig& c)
{
    json j;
    j["data"] = c.data.string();
    j["out_dir"] = c.out_dir.string();
    j["run_name"] = c.run_name;
    j["seed"] = c.seed;
    j["test_fraction"] = c.test_fraction;
    j["val_fraction"] = c.val_fraction;
    j["gen"] = to_json(c.gen);
    j["model"] = to_json(c.model);
    j["baselines"] = to_json(c.baselines);
    j["class_counts"] = c.class_counts;
    j["models"] = c.models;
    j["bench_repetitions"] = c.bench_repetitions;
    j["patterns_top_n"] = c.patterns_top_n;
    j["record_timing"] = c.record_timing;
    return j;
}

} // namespace mvkid
