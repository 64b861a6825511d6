#include "mvkid/eval.hpp"

#include "mvkid/config.hpp"
#include "mvkid/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <tuple>

namespace mvkid {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double x, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

double percentile(std::vector<double> v, double q)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

json linear_to_json(const LinearModel& m)
{
    return {{"rows", m.w.rows}, {"cols", m.w.cols}, {"w", m.w.data}, {"b", m.b}};
}

LinearModel linear_from_json(const json& j)
{
    LinearModel m;
    m.w.rows = j.at("rows").get<std::size_t>();
    m.w.cols = j.at("cols").get<std::size_t>();
    m.w.data = j.at("w").get<Vector>();
    m.b = j.at("b").get<Vector>();
    if (m.w.data.size() != m.w.rows * m.w.cols || m.b.size() != m.w.rows)
        throw std::invalid_argument("baseline json: linear model shape mismatch");
    return m;
}

json tree_to_json(const DecisionTree& t)
{
    json nodes = json::array();
    for (const auto& n : t.nodes)
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.prediction});
    return {{"n_classes", t.n_classes}, {"nodes", nodes}};
}

DecisionTree tree_from_json(const json& j)
{
    DecisionTree t;
    t.n_classes = j.at("n_classes").get<std::size_t>();
    for (const auto& n : j.at("nodes"))
        t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                           n.at(4).get<std::size_t>()});
    const int size = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes)
        if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
            throw std::invalid_argument("baseline json: tree child index out of range");
    return t;
}

Dataset to_two_class(const Dataset& ds, std::size_t a, std::size_t b)
{
    std::vector<Session> sessions;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.label(i) == a || ds.label(i) == b)
            sessions.push_back(ds.sessions()[i]);
    return Dataset(std::move(sessions), {ds.labels()[a], ds.labels()[b]});
}

} // namespace

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n)
{
    if (truth >= k_ || predicted >= k_)
        throw std::out_of_range("confusion matrix: class index out of range");
    counts_[truth * k_ + predicted] += n;
}

std::uint64_t ConfusionMatrix::total() const
{
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

EvalReport compute_metrics(const ConfusionMatrix& cm)
{
    const std::size_t k = cm.n_classes();
    const std::uint64_t total = cm.total();
    if (total == 0)
        throw std::invalid_argument("compute_metrics: confusion matrix is all zero");
    EvalReport r;
    r.n_classes = k;
    r.n_sessions = total;
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::uint64_t tp = cm(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (i == c)
                continue;
            fp += cm(i, c);
            fn += cm(c, i);
        }
        ClassMetrics m;
        m.support = tp + fn;
        m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        r.per_class.push_back(m);
        trace += tp;
    }
    for (const auto& m : r.per_class) {
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
    }
    r.macro_precision /= static_cast<double>(k);
    r.macro_recall /= static_cast<double>(k);
    r.macro_f1 /= static_cast<double>(k);
    r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    return r;
}

std::string ModelSpec::name() const
{
    switch (kind) {
    case ModelKind::DeepMvmc:
        return "deep-mvmc";
    case ModelKind::DeepSingle:
        return "deep-single:" + std::string(view_name(view));
    case ModelKind::LogReg:
        return "logreg";
    case ModelKind::Svm:
        return "svm";
    case ModelKind::DTree:
        return "dtree";
    case ModelKind::RForest:
        return "rforest";
    }
    return {};
}

std::string ModelSpec::valid_names()
{
    return "deep-mvmc, deep-single:alphabet, deep-single:symbol, deep-single:accel, logreg, svm, dtree, rforest";
}

ModelSpec ModelSpec::parse(std::string_view name)
{
    if (name == "deep-mvmc")
        return {ModelKind::DeepMvmc};
    if (name == "logreg")
        return {ModelKind::LogReg};
    if (name == "svm")
        return {ModelKind::Svm};
    if (name == "dtree")
        return {ModelKind::DTree};
    if (name == "rforest")
        return {ModelKind::RForest};
    constexpr std::string_view prefix = "deep-single:";
    if (name.substr(0, prefix.size()) == prefix) {
        if (auto v = parse_view(name.substr(prefix.size())))
            return {ModelKind::DeepSingle, *v};
    }
    throw std::invalid_argument("unknown model \"" + std::string(name) + "\"; valid: " + valid_names());
}

std::size_t TrainedBaseline::predict(const Session& s) const
{
    const auto f = featurize(s, normalizer, max_len);
    return std::visit([&](const auto& m) { return m.predict(f); }, model);
}

std::string TrainedBaseline::to_json() const
{
    json j;
    j["format"] = "mvkid-baseline";
    j["feature_schema"] = kFeatureSchemaVersion;
    j["model"] = spec.name();
    j["labels"] = labels;
    j["max_len"] = max_len;
    j["normalizer"] = mvkid::to_json(normalizer);
    j["metadata"] = metadata;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                j["linear"] = linear_to_json(m);
            } else if constexpr (std::is_same_v<T, DecisionTree>) {
                j["tree"] = tree_to_json(m);
            } else {
                json trees = json::array();
                for (const auto& t : m.trees)
                    trees.push_back(tree_to_json(t));
                j["forest"] = {{"n_classes", m.n_classes}, {"trees", trees}};
            }
        },
        model);
    return j.dump();
}

TrainedBaseline TrainedBaseline::from_json(std::string_view text)
{
    const json j = json::parse(text);
    if (j.at("format") != "mvkid-baseline")
        throw std::invalid_argument("not a baseline model file");
    if (j.at("feature_schema").get<std::uint32_t>() != kFeatureSchemaVersion)
        throw std::invalid_argument("baseline feature schema version mismatch");
    TrainedBaseline b;
    b.spec = ModelSpec::parse(j.at("model").get<std::string>());
    b.labels = j.at("labels").get<std::vector<std::string>>();
    b.max_len = j.at("max_len").get<MaxLens>();
    b.normalizer = normalizer_from_json(j.at("normalizer"));
    b.metadata = j.value("metadata", std::map<std::string, std::string>{});
    switch (b.spec.kind) {
    case ModelKind::LogReg:
    case ModelKind::Svm:
        b.model = linear_from_json(j.at("linear"));
        break;
    case ModelKind::DTree:
        b.model = tree_from_json(j.at("tree"));
        break;
    case ModelKind::RForest: {
        RandomForest f;
        f.n_classes = j.at("forest").at("n_classes").get<std::size_t>();
        for (const auto& t : j.at("forest").at("trees"))
            f.trees.push_back(tree_from_json(t));
        b.model = std::move(f);
        break;
    }
    default:
        throw std::invalid_argument("baseline file names a deep model");
    }
    return b;
}

TrainedBaseline train_baseline(const Dataset& train_set, const ModelSpec& spec, const BaselineHyper& hyper,
                               const MaxLens& max_len)
{
    TrainedBaseline b;
    b.spec = spec;
    b.max_len = max_len;
    b.labels = train_set.labels();
    b.normalizer = fit_normalizer(train_set);
    const FeatureSet fs = featurize_dataset(train_set, b.normalizer, max_len);
    const std::size_t k = train_set.num_classes();
    switch (spec.kind) {
    case ModelKind::LogReg:
        b.model = train_logreg(fs.x, fs.y, k, hyper);
        break;
    case ModelKind::Svm:
        b.model = train_linear_svm(fs.x, fs.y, k, hyper);
        break;
    case ModelKind::DTree:
        b.model = train_decision_tree(fs.x, fs.y, k, hyper);
        break;
    case ModelKind::RForest:
        b.model = train_random_forest(fs.x, fs.y, k, hyper);
        break;
    default:
        throw std::invalid_argument("train_baseline: " + spec.name() + " is not a baseline");
    }
    return b;
}

ModelConfig deep_config_for(const ModelSpec& spec, const ModelConfig& base, std::size_t n_classes)
{
    ModelConfig cfg = base;
    cfg.n_classes = n_classes;
    if (spec.kind == ModelKind::DeepSingle) {
        cfg.views = {false, false, false};
        cfg.views[index_of(spec.view)] = true;
    } else if (spec.kind == ModelKind::DeepMvmc) {
        cfg.views = {true, true, true};
    }
    return cfg;
}

ConfusionMatrix evaluate_model(const MvmcModel& model, const Dataset& ds)
{
    if (ds.labels() != model.labels)
        throw LabelMismatch("evaluate: dataset labels differ from the model's");
    std::vector<EncodedSession> xs;
    xs.reserve(ds.size());
    for (const auto& s : ds.sessions())
        xs.push_back(model.encode(s));
    const auto probs = model.config.parallel ? predict_parallel(model.net, xs) : predict_serial(model.net, xs);
    ConfusionMatrix cm(model.labels.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        cm.add(ds.label(i), argmax_class(probs[i]));
    return cm;
}

ConfusionMatrix evaluate_baseline(const TrainedBaseline& model, const Dataset& ds)
{
    if (ds.labels() != model.labels)
        throw LabelMismatch("evaluate: dataset labels differ from the model's");
    ConfusionMatrix cm(model.labels.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        cm.add(ds.label(i), model.predict(ds.sessions()[i]));
    return cm;
}

FitResult fit_and_evaluate(const Dataset& ds, const ModelSpec& spec, const ExperimentOptions& opts)
{
    auto [train_set, test_set] = stratified_split(ds, opts.test_fraction, hash64(opts.seed, "split"));
    FitResult out;
    std::vector<double> infer_ms;
    ConfusionMatrix cm(ds.num_classes());

    const auto start = Clock::now();
    if (spec.deep()) {
        Dataset fit_set = train_set, val_set;
        const auto counts = train_set.sessions_per_class();
        const bool can_hold_out = std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c >= 2; });
        if (opts.val_fraction > 0.0 && can_hold_out)
            std::tie(fit_set, val_set) = stratified_split(train_set, opts.val_fraction, hash64(opts.seed, "val"));
        out.deep = train(fit_set, val_set, deep_config_for(spec, opts.model, ds.num_classes()));
        out.train_seconds = seconds_since(start);
        cm = evaluate_model(out.deep->model, test_set);
        for (const auto& s : test_set.sessions()) {
            const auto t0 = Clock::now();
            (void)predict(out.deep->model, s);
            infer_ms.push_back(1e3 * seconds_since(t0));
        }
    } else {
        out.baseline = train_baseline(train_set, spec, opts.baselines, opts.model.max_len);
        out.train_seconds = seconds_since(start);
        for (std::size_t i = 0; i < test_set.size(); ++i) {
            const auto t0 = Clock::now();
            const std::size_t pred = out.baseline->predict(test_set.sessions()[i]);
            infer_ms.push_back(1e3 * seconds_since(t0));
            cm.add(test_set.label(i), pred);
        }
    }
    out.report = compute_metrics(cm);
    out.report.model = spec.name();
    out.infer_ms_median = median(infer_ms);
    out.report.ms_per_session = out.infer_ms_median;
    return out;
}

Heatmap pairwise_heatmap(const Dataset& ds, const ExperimentOptions& opts, const ModelSpec& spec)
{
    const std::size_t k = ds.num_classes();
    if (k < 2)
        throw std::invalid_argument("pairwise_heatmap: need at least two users");
    const auto counts = ds.sessions_per_class();
    for (std::size_t c = 0; c < k; ++c)
        if (counts[c] < 2)
            throw DatasetError("pairwise_heatmap: user \"" + ds.labels()[c] + "\" has fewer than 2 sessions");

    Heatmap h;
    h.labels = ds.labels();
    h.f1 = Matrix(k, k, 1.0);
    h.accuracy = Matrix(k, k, 1.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            ExperimentOptions pair_opts = opts;
            pair_opts.seed = stream_key(opts.seed, a, b);
            pair_opts.model.seed = stream_key(opts.model.seed, a, b);
            const FitResult r = fit_and_evaluate(to_two_class(ds, a, b), spec, pair_opts);
            h.f1(a, b) = h.f1(b, a) = r.report.macro_f1;
            h.accuracy(a, b) = h.accuracy(b, a) = r.report.accuracy;
        }
    }
    return h;
}

std::string heatmap_csv(const Heatmap& h)
{
    std::ostringstream out;
    out << "# diagonal (a user against itself) is 1.0 by convention and not listed\n";
    out << "user_a,user_b,f1,accuracy\n";
    for (std::size_t a = 0; a < h.labels.size(); ++a)
        for (std::size_t b = a + 1; b < h.labels.size(); ++b)
            out << h.labels[a] << ',' << h.labels[b] << ',' << fixed(h.f1(a, b)) << ',' << fixed(h.accuracy(a, b))
                << '\n';
    return out.str();
}

std::vector<ResultRow> incremental_experiment(const Dataset& ds, const std::vector<std::size_t>& ns,
                                              const std::vector<ModelSpec>& models, const ExperimentOptions& opts)
{
    for (auto n : ns)
        if (n > ds.num_classes())
            throw std::invalid_argument("incremental_experiment: n=" + std::to_string(n) + " exceeds "
                                        + std::to_string(ds.num_classes()) + " users");
    std::vector<ResultRow> rows;
    for (auto n : ns) {
        const Dataset subset = filter_users(ds, n);
        for (const auto& spec : models) {
            const FitResult r = fit_and_evaluate(subset, spec, opts);
            ResultRow row;
            row.experiment = "incremental";
            row.model = spec.name();
            row.n_classes = n;
            row.seed = opts.seed;
            row.report = r.report;
            row.train_seconds = r.train_seconds;
            row.infer_ms_median = r.infer_ms_median;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string results_csv(std::vector<ResultRow> rows, bool with_timing)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.experiment, a.n_classes, a.model) < std::tie(b.experiment, b.n_classes, b.model);
    });
    std::ostringstream out;
    out << kResultsHeader << '\n';
    for (const auto& r : rows) {
        out << r.experiment << ',' << r.model << ',' << r.n_classes << ',' << r.seed << ',' << fixed(r.report.accuracy)
            << ',' << fixed(r.report.macro_precision) << ',' << fixed(r.report.macro_recall) << ','
            << fixed(r.report.macro_f1) << ',';
        if (with_timing)
            out << fixed(r.train_seconds, 3) << ',' << fixed(r.infer_ms_median, 4);
        else
            out << "NA,NA";
        out << '\n';
    }
    return out.str();
}

std::string per_class_csv(const EvalReport& report, const std::vector<std::string>& labels)
{
    std::ostringstream out;
    out << "model,class,user_id,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& m = report.per_class[c];
        out << report.model << ',' << c << ',' << (c < labels.size() ? labels[c] : "") << ',' << fixed(m.precision)
            << ',' << fixed(m.recall) << ',' << fixed(m.f1) << ',' << m.support << '\n';
    }
    return out.str();
}

LatencyReport latency_bench(const MvmcModel& model, const std::vector<Session>& sessions, std::size_t repetitions)
{
    if (repetitions == 0)
        throw std::invalid_argument("no measurements");
    if (sessions.size() < 100)
        throw std::invalid_argument("latency_bench: need at least 100 sessions, got " + std::to_string(sessions.size()));

    volatile double sink = 0.0;
    for (const auto& s : sessions)
        sink = sink + forward(model, s)[0];

    std::vector<double> full, core;
    full.reserve(sessions.size() * repetitions);
    core.reserve(sessions.size() * repetitions);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        for (const auto& s : sessions) {
            const auto t0 = Clock::now();
            const EncodedSession x = model.encode(s);
            const auto t1 = Clock::now();
            const Vector p = network_forward(model.net, x);
            const auto t2 = Clock::now();
            sink = sink + p[0];
            full.push_back(std::chrono::duration<double, std::milli>(t2 - t0).count());
            core.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        }
    }
    LatencyReport r;
    r.measurements = full.size();
    r.median_ms = percentile(full, 0.5);
    r.p95_ms = percentile(full, 0.95);
    r.median_ms_forward_only = percentile(core, 0.5);
    r.p95_ms_forward_only = percentile(core, 0.95);
    return r;
}

std::string latency_csv(const LatencyReport& r)
{
    std::ostringstream out;
    out << "measurement,median_ms,p95_ms,reference_ms\n";
    out << "with_preprocessing," << fixed(r.median_ms, 4) << ',' << fixed(r.p95_ms, 4) << ','
        << fixed(kReferenceLatencyMs, 3) << '\n';
    out << "forward_only," << fixed(r.median_ms_forward_only, 4) << ',' << fixed(r.p95_ms_forward_only, 4) << ','
        << fixed(kReferenceLatencyMs, 3) << '\n';
    return out.str();
}

double median(std::vector<double> values)
{
    if (values.empty())
        return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1)
        return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

std::vector<UserPattern> pattern_summary(const Dataset& ds, std::size_t top_n)
{
    if (ds.empty())
        throw std::invalid_argument("pattern_summary: empty dataset");
    const Dataset active = filter_users(ds, std::min(top_n, ds.num_classes()));
    std::vector<UserPattern> out;
    for (std::size_t c = 0; c < active.num_classes(); ++c) {
        UserPattern p;
        p.user_id = active.labels()[c];
        std::array<std::vector<double>, kNumViews> lengths;
        std::vector<double> a_dwell, a_gap, s_dwell, s_gap;
        std::array<std::vector<double>, kNumSymbolCategories> cat_counts;
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (active.label(i) != c)
                continue;
            const Session& s = active.sessions()[i];
            ++p.n_sessions;
            for (auto v : kAllViews)
                lengths[index_of(v)].push_back(static_cast<double>(s.view_length(v)));
            for (const auto& e : s.alphabet_view) {
                a_dwell.push_back(e.duration);
                if (!is_missing(e.time_since_last_key))
                    a_gap.push_back(e.time_since_last_key);
            }
            std::array<double, kNumSymbolCategories> counts{};
            for (const auto& e : s.symbol_view) {
                s_dwell.push_back(e.duration);
                if (!is_missing(e.time_since_last_key))
                    s_gap.push_back(e.time_since_last_key);
                counts[static_cast<std::size_t>(e.category)] += 1.0;
            }
            for (std::size_t k = 0; k < kNumSymbolCategories; ++k)
                cat_counts[k].push_back(counts[k]);
        }
        for (auto v : kAllViews)
            p.median_length[index_of(v)] = median(lengths[index_of(v)]);
        p.alphabet_median_dwell = median(a_dwell);
        p.alphabet_median_gap = median(a_gap);
        p.symbol_median_dwell = median(s_dwell);
        p.symbol_median_gap = median(s_gap);
        for (std::size_t k = 0; k < kNumSymbolCategories; ++k) {
            CategoryPattern cp;
            cp.category = static_cast<SymbolCategory>(k);
            cp.median_count = median(cat_counts[k]);
            cp.frequent = cp.median_count > 2.0;
            p.categories.push_back(cp);
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::string patterns_csv(const std::vector<UserPattern>& patterns)
{
    std::ostringstream out;
    out << "user_id,view,statistic,value,class\n";
    for (const auto& p : patterns) {
        out << p.user_id << ",all,n_sessions," << p.n_sessions << ",\n";
        for (auto v : kAllViews)
            out << p.user_id << ',' << view_name(v) << ",median_length," << fixed(p.median_length[index_of(v)], 1)
                << ",\n";
        out << p.user_id << ",alphabet,median_dwell_s," << fixed(p.alphabet_median_dwell) << ",\n";
        out << p.user_id << ",alphabet,median_gap_s," << fixed(p.alphabet_median_gap) << ",\n";
        out << p.user_id << ",symbol,median_dwell_s," << fixed(p.symbol_median_dwell) << ",\n";
        out << p.user_id << ",symbol,median_gap_s," << fixed(p.symbol_median_gap) << ",\n";
        for (const auto& c : p.categories)
            out << p.user_id << ",symbol,median_count:" << category_name(c.category) << ',' << fixed(c.median_count, 1)
                << ',' << (c.frequent ? "frequent" : "infrequent") << '\n';
    }
    return out.str();
}

} // namespace mvkid
