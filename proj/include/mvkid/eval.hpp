#pragma once

#include "mvkid/baselines.hpp"
#include "mvkid/mvmc.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mvkid {

/// Entry (i, j) counts sessions of true class i predicted as j.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t n_classes) : k_(n_classes), counts_(n_classes * n_classes, 0) {}

    void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);
    std::uint64_t operator()(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
    std::size_t n_classes() const { return k_; }
    std::uint64_t total() const;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct EvalReport {
    std::string model;
    std::size_t n_classes = 0;
    std::uint64_t n_sessions = 0;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    double ms_per_session = 0.0;
};

/// Standard one-vs-rest precision TP/(TP+FP), recall TP/(TP+FN), their harmonic
/// mean, macro averages and trace/total accuracy. Zero denominators give 0.
EvalReport compute_metrics(const ConfusionMatrix& cm);

enum class ModelKind { DeepMvmc, DeepSingle, LogReg, Svm, DTree, RForest };

struct ModelSpec {
    ModelKind kind = ModelKind::DeepMvmc;
    ViewKind view = ViewKind::Accel; // DeepSingle only

    /// "deep-mvmc", "deep-single:<view>", "logreg", "svm", "dtree", "rforest".
    std::string name() const;
    static ModelSpec parse(std::string_view name);
    static std::string valid_names();
    bool deep() const { return kind == ModelKind::DeepMvmc || kind == ModelKind::DeepSingle; }
};

/// A fitted classical baseline with the preprocessing it was trained with.
struct TrainedBaseline {
    ModelSpec spec;
    Normalizer normalizer;
    MaxLens max_len = kDefaultMaxLens;
    std::vector<std::string> labels;
    std::variant<LinearModel, DecisionTree, RandomForest> model;
    std::map<std::string, std::string> metadata;

    std::size_t predict(const Session& s) const;
    std::string to_json() const;
    static TrainedBaseline from_json(std::string_view text);
};

TrainedBaseline train_baseline(const Dataset& train_set, const ModelSpec& spec, const BaselineHyper& hyper,
                               const MaxLens& max_len = kDefaultMaxLens);

struct ExperimentOptions {
    double test_fraction = 0.2;
    double val_fraction = 0.2; // carved from the training split for epoch selection
    std::uint64_t seed = 1;    // split seeds derive from this
    ModelConfig model;
    BaselineHyper baselines;
};

struct FitResult {
    EvalReport report;
    double train_seconds = 0.0;
    double infer_ms_median = 0.0;
    std::optional<TrainResult> deep;
    std::optional<TrainedBaseline> baseline;
};

/// Applies a spec's view selection and class count to a base config.
ModelConfig deep_config_for(const ModelSpec& spec, const ModelConfig& base, std::size_t n_classes);

/// Stratified split, fit on the training part, evaluate on the test part.
FitResult fit_and_evaluate(const Dataset& ds, const ModelSpec& spec, const ExperimentOptions& opts);

/// Confusion matrix of a fitted deep model on a dataset sharing its labels.
ConfusionMatrix evaluate_model(const MvmcModel& model, const Dataset& ds);
ConfusionMatrix evaluate_baseline(const TrainedBaseline& model, const Dataset& ds);

struct Heatmap {
    std::vector<std::string> labels;
    Matrix f1;       // symmetric, diagonal 1.0 by convention
    Matrix accuracy; // symmetric, diagonal 1.0 by convention
};

/// One 2-class model per unordered user pair.
Heatmap pairwise_heatmap(const Dataset& ds, const ExperimentOptions& opts, const ModelSpec& spec = {});

/// `user_a,user_b,f1,accuracy`, one row per unordered pair (a < b in label order).
std::string heatmap_csv(const Heatmap& h);

struct ResultRow {
    std::string experiment;
    std::string model;
    std::size_t n_classes = 0;
    std::uint64_t seed = 0;
    EvalReport report;
    double train_seconds = 0.0;
    double infer_ms_median = 0.0;
};

/// For each n: keep the n most active users, then fit and evaluate each model.
std::vector<ResultRow> incremental_experiment(const Dataset& ds, const std::vector<std::size_t>& ns,
                                              const std::vector<ModelSpec>& models, const ExperimentOptions& opts);

inline constexpr const char* kResultsHeader =
    "experiment,model,n_classes,seed,accuracy,macro_precision,macro_recall,macro_f1,train_s,infer_ms_median";

/// Rows sorted by (experiment, n_classes, model). Timing columns read NA
/// unless `with_timing`, so untimed reruns are byte-identical.
std::string results_csv(std::vector<ResultRow> rows, bool with_timing);

/// `model,class,user_id,precision,recall,f1,support`.
std::string per_class_csv(const EvalReport& report, const std::vector<std::string>& labels);

struct LatencyReport {
    std::size_t measurements = 0;
    double median_ms = 0.0; // preprocessing + forward
    double p95_ms = 0.0;
    double median_ms_forward_only = 0.0;
    double p95_ms_forward_only = 0.0;
};

inline constexpr double kReferenceLatencyMs = 0.657;

/// Times each session `repetitions` times after one untimed warm-up pass.
LatencyReport latency_bench(const MvmcModel& model, const std::vector<Session>& sessions, std::size_t repetitions);

std::string latency_csv(const LatencyReport& r);

struct CategoryPattern {
    SymbolCategory category = SymbolCategory::Space;
    double median_count = 0.0;
    bool frequent = false; // median per-session count > 2
};

struct UserPattern {
    std::string user_id;
    std::size_t n_sessions = 0;
    std::array<double, kNumViews> median_length{};
    double alphabet_median_dwell = 0.0;
    double alphabet_median_gap = 0.0;
    double symbol_median_dwell = 0.0;
    double symbol_median_gap = 0.0;
    std::vector<CategoryPattern> categories;
};

/// Statistics for the top_n most active users, on raw (unnormalized) values;
/// undefined gaps are skipped.
std::vector<UserPattern> pattern_summary(const Dataset& ds, std::size_t top_n);

/// `user_id,view,statistic,value,class`.
std::string patterns_csv(const std::vector<UserPattern>& patterns);

double median(std::vector<double> values);

} // namespace mvkid
