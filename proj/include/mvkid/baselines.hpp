#pragma once

#include "mvkid/preprocess.hpp"
#include "mvkid/session.hpp"
#include "mvkid/tensor.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace mvkid {

// Fixed-length session summary, all statistics over masked-in, normalized timesteps:
//   [ 0,12)  alphabet {duration, gap, distance} x {mean, std, min, max}
//   [12,20)  symbol   {duration, gap}           x {mean, std, min, max}
//   [20,26)  accel    {ax, ay, az}              x {mean, std}
//   [26,29)  event counts {alphabet, symbol, accel} / max_len of that view
//   [29,37)  symbol category frequencies (fraction of symbol events per category)
// An empty view contributes zeros to every one of its slots.
inline constexpr std::size_t kFeatureDim = 37;
inline constexpr std::uint32_t kFeatureSchemaVersion = 1;

using FeatureVector = std::array<double, kFeatureDim>;

FeatureVector featurize(const Session& s, const Normalizer& nz, const MaxLens& max_len = kDefaultMaxLens);

struct FeatureSet {
    Matrix x; // n x kFeatureDim
    std::vector<std::size_t> y;
};

FeatureSet featurize_dataset(const Dataset& ds, const Normalizer& nz, const MaxLens& max_len = kDefaultMaxLens);

struct BaselineHyper {
    double logreg_lambda = 1e-4;
    double logreg_lr = 0.5;
    std::size_t logreg_iters = 500;
    double logreg_tol = 1e-6;

    double svm_lambda = 1e-3;
    double svm_lr = 0.5;
    std::size_t svm_iters = 1000;

    std::size_t tree_max_depth = 12;
    std::size_t tree_min_samples_leaf = 2;

    std::size_t forest_trees = 100;
    bool forest_bootstrap = true;
    std::size_t forest_max_features = 0; // 0 selects floor(sqrt(d))

    std::uint64_t seed = 1;
    bool parallel = true;

    bool operator==(const BaselineHyper&) const = default;
};

/// Multi-class linear scorer: class scores are W x + b.
struct LinearModel {
    Matrix w; // K x d
    Vector b;

    Vector scores(std::span<const double> x) const;
    std::size_t predict(std::span<const double> x) const;
};

/// Softmax of the scores; meaningful for logistic-regression models.
Vector class_probabilities(const LinearModel& m, std::span<const double> x);

/// Multinomial softmax regression, full-batch gradient descent, L2 on W only.
LinearModel train_logreg(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                         const BaselineHyper& hyper = {});

/// One-vs-rest hinge loss with L2, full-batch subgradient descent.
LinearModel train_linear_svm(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                             const BaselineHyper& hyper = {});

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t prediction = 0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    std::size_t n_classes = 0;

    std::size_t predict(std::span<const double> x) const;
    std::size_t depth() const;
    std::size_t leaves() const;
};

/// CART with Gini impurity. Thresholds are midpoints of consecutive distinct
/// values; ties go to the lowest feature index, then the lowest threshold.
/// `max_features` (0 = all) features are drawn per split from `rng`.
DecisionTree train_decision_tree(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                                 const BaselineHyper& hyper = {});

struct RandomForest {
    std::vector<DecisionTree> trees;
    std::size_t n_classes = 0;

    /// Majority vote, lowest class index on ties.
    std::size_t predict(std::span<const double> x) const;
};

/// Per-tree seeds come from hyper.seed, so the result does not depend on
/// whether trees are grown in parallel.
RandomForest train_random_forest(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                                 const BaselineHyper& hyper = {});
RandomForest train_random_forest_serial(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                                        const BaselineHyper& hyper = {});

} // namespace mvkid
