#include "mvkid/baselines.hpp"

#include "mvkid/nn.hpp"
#include "mvkid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mvkid {

namespace {

struct Stats {
    double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

Stats column_stats(const EncodedView& v, std::size_t col)
{
    Stats s;
    const std::size_t n = v.true_length;
    if (n == 0)
        return s;
    s.min = s.max = v.values(0, col);
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double x = v.values(t, col);
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double d = v.values(t, col) - s.mean;
        sq += d * d;
    }
    s.std = std::sqrt(sq / static_cast<double>(n));
    return s;
}

void check_xy(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes)
{
    if (x.rows != y.size())
        throw ShapeError("baseline: X rows and y length differ");
    for (auto c : y)
        if (c >= n_classes)
            throw std::out_of_range("baseline: label out of range");
}

void require_two_classes(std::span<const std::size_t> y, const char* who)
{
    if (y.empty() || std::all_of(y.begin(), y.end(), [&](std::size_t c) { return c == y[0]; }))
        throw std::invalid_argument(std::string(who) + ": need at least two distinct classes");
}

std::size_t majority(std::span<const std::size_t> counts)
{
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// Weighted Gini impurity scaled by node size: n - sum(c^2)/n, per side.
double side_impurity(std::span<const std::size_t> counts, std::size_t n)
{
    if (n == 0)
        return 0.0;
    double sq = 0.0;
    for (auto c : counts)
        sq += static_cast<double>(c) * static_cast<double>(c);
    return static_cast<double>(n) - sq / static_cast<double>(n);
}

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const std::size_t> y, std::size_t k, std::size_t max_depth,
                std::size_t min_leaf, std::size_t max_features, Rng* rng)
        : x_(x), y_(y), k_(k), max_depth_(max_depth), min_leaf_(std::max<std::size_t>(min_leaf, 1)),
          max_features_(max_features == 0 ? x.cols : std::min(max_features, x.cols)), rng_(rng)
    {
    }

    DecisionTree build(std::vector<std::size_t> samples)
    {
        tree_.n_classes = k_;
        grow(std::move(samples), 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = 0.0;
    };

    std::vector<std::size_t> candidate_features()
    {
        std::vector<std::size_t> all(x_.cols);
        std::iota(all.begin(), all.end(), 0);
        if (max_features_ >= x_.cols || rng_ == nullptr)
            return all;
        std::shuffle(all.begin(), all.end(), *rng_);
        all.resize(max_features_);
        std::sort(all.begin(), all.end());
        return all;
    }

    Split best_split(const std::vector<std::size_t>& samples, std::span<const std::size_t> counts)
    {
        Split best;
        const std::size_t n = samples.size();
        double best_score = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> order(samples);
        std::vector<std::size_t> left(k_), right(k_);
        for (std::size_t f : candidate_features()) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = x_(a, f), vb = x_(b, f);
                return va < vb || (va == vb && a < b);
            });
            std::fill(left.begin(), left.end(), 0);
            std::copy(counts.begin(), counts.end(), right.begin());
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const std::size_t c = y_[order[i]];
                ++left[c];
                --right[c];
                const std::size_t n_left = i + 1, n_right = n - n_left;
                const double lo = x_(order[i], f), hi = x_(order[i + 1], f);
                if (!(lo < hi) || n_left < min_leaf_ || n_right < min_leaf_)
                    continue;
                const double score = side_impurity(left, n_left) + side_impurity(right, n_right);
                // Strict improvement beyond rounding keeps the earliest candidate on ties.
                if (best.feature < 0 || score < best_score - 1e-12 * std::max(1.0, best_score)) {
                    best_score = score;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (lo + hi);
                    best.impurity = score;
                }
            }
        }
        return best;
    }

    int grow(std::vector<std::size_t> samples, std::size_t depth)
    {
        std::vector<std::size_t> counts(k_, 0);
        for (auto i : samples)
            ++counts[y_[i]];
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        tree_.nodes[id].prediction = majority(counts);

        const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
        if (pure || depth >= max_depth_ || samples.size() < 2 * min_leaf_)
            return id;
        const Split split = best_split(samples, counts);
        if (split.feature < 0)
            return id;

        std::vector<std::size_t> lhs, rhs;
        for (auto i : samples)
            (x_(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? lhs : rhs).push_back(i);
        samples.clear();
        samples.shrink_to_fit();
        const int l = grow(std::move(lhs), depth + 1);
        const int r = grow(std::move(rhs), depth + 1);
        auto& node = tree_.nodes[id];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    const Matrix& x_;
    std::span<const std::size_t> y_;
    std::size_t k_;
    std::size_t max_depth_;
    std::size_t min_leaf_;
    std::size_t max_features_;
    Rng* rng_;
    DecisionTree tree_;
};

std::size_t default_max_features(const BaselineHyper& h, std::size_t d)
{
    if (h.forest_max_features != 0)
        return h.forest_max_features;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
}

DecisionTree grow_forest_tree(const Matrix& x, std::span<const std::size_t> y, std::size_t k,
                              const BaselineHyper& h, std::size_t tree_index)
{
    Rng rng = make_rng(stream_key(hash64(h.seed, "forest"), tree_index));
    std::vector<std::size_t> samples(x.rows);
    if (h.forest_bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
        for (auto& s : samples)
            s = pick(rng);
        std::sort(samples.begin(), samples.end());
    } else {
        std::iota(samples.begin(), samples.end(), 0);
    }
    TreeBuilder builder(x, y, k, h.tree_max_depth, h.tree_min_samples_leaf, default_max_features(h, x.cols), &rng);
    return builder.build(std::move(samples));
}

RandomForest forest_impl(const Matrix& x, std::span<const std::size_t> y, std::size_t k, const BaselineHyper& h,
                         bool parallel)
{
    check_xy(x, y, k);
    if (x.rows == 0)
        throw std::invalid_argument("random forest: empty data");
    if (h.forest_trees == 0)
        throw std::invalid_argument("random forest: need at least one tree");
    RandomForest f;
    f.n_classes = k;
    f.trees.resize(h.forest_trees);
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(h.forest_trees); ++t)
            f.trees[static_cast<std::size_t>(t)] = grow_forest_tree(x, y, k, h, static_cast<std::size_t>(t));
    } else {
        for (std::size_t t = 0; t < h.forest_trees; ++t)
            f.trees[t] = grow_forest_tree(x, y, k, h, t);
    }
    return f;
}

} // namespace

FeatureVector featurize(const Session& s, const Normalizer& nz, const MaxLens& max_len)
{
    FeatureVector f{};
    const Session imputed = impute_missing(s);
    const EncodedView alpha = encode_view(nz, imputed, ViewKind::Alphabet, max_len[0]);
    const EncodedView sym = encode_view(nz, imputed, ViewKind::Symbol, max_len[1]);
    const EncodedView acc = encode_view(nz, imputed, ViewKind::Accel, max_len[2]);

    std::size_t k = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        const Stats st = column_stats(alpha, c);
        f[k++] = st.mean;
        f[k++] = st.std;
        f[k++] = st.min;
        f[k++] = st.max;
    }
    for (std::size_t c = kNumSymbolCategories; c < kNumSymbolCategories + 2; ++c) {
        const Stats st = column_stats(sym, c);
        f[k++] = st.mean;
        f[k++] = st.std;
        f[k++] = st.min;
        f[k++] = st.max;
    }
    for (std::size_t c = 0; c < 3; ++c) {
        const Stats st = column_stats(acc, c);
        f[k++] = st.mean;
        f[k++] = st.std;
    }
    f[k++] = static_cast<double>(alpha.true_length) / static_cast<double>(max_len[0]);
    f[k++] = static_cast<double>(sym.true_length) / static_cast<double>(max_len[1]);
    f[k++] = static_cast<double>(acc.true_length) / static_cast<double>(max_len[2]);
    // One-hot columns are exactly 0/1 after normalization, so their mean is the frequency.
    for (std::size_t c = 0; c < kNumSymbolCategories; ++c)
        f[k++] = sym.true_length == 0 ? 0.0 : column_stats(sym, c).mean;
    return f;
}

FeatureSet featurize_dataset(const Dataset& ds, const Normalizer& nz, const MaxLens& max_len)
{
    FeatureSet out;
    out.x = Matrix(ds.size(), kFeatureDim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto f = featurize(ds.sessions()[i], nz, max_len);
        std::copy(f.begin(), f.end(), out.x.row(i).begin());
        out.y.push_back(ds.label(i));
    }
    return out;
}

Vector LinearModel::scores(std::span<const double> x) const
{
    Vector s = b;
    gemv_acc(w, x, s);
    return s;
}

std::size_t LinearModel::predict(std::span<const double> x) const
{
    const Vector s = scores(x);
    return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

Vector class_probabilities(const LinearModel& m, std::span<const double> x) { return softmax(m.scores(x)); }

LinearModel train_logreg(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                         const BaselineHyper& hyper)
{
    check_xy(x, y, n_classes);
    require_two_classes(y, "logistic regression");
    const std::size_t n = x.rows, d = x.cols;
    LinearModel m{Matrix(n_classes, d), Vector(n_classes, 0.0)};
    Matrix gw(n_classes, d);
    Vector gb(n_classes);
    const double inv_n = 1.0 / static_cast<double>(n);
    const double lr = hyper.logreg_lr;
    const double lambda = hyper.logreg_lambda;

    for (std::size_t it = 0; it < hyper.logreg_iters; ++it) {
        std::fill(gw.data.begin(), gw.data.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            Vector p = class_probabilities(m, x.row(i));
            p[y[i]] -= 1.0;
            ger_acc(gw, p, x.row(i));
            axpy(1.0, p, gb);
        }
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < gw.data.size(); ++j) {
            gw.data[j] *= inv_n;
            const double full = gw.data[j] + lambda * m.w.data[j];
            norm_sq += full * full;
        }
        for (auto& g : gb) {
            g *= inv_n;
            norm_sq += g * g;
        }
        if (std::sqrt(norm_sq) < hyper.logreg_tol)
            break;
        // Implicit step on the L2 term keeps large lambda stable.
        const double shrink = 1.0 / (1.0 + lr * lambda);
        for (std::size_t j = 0; j < gw.data.size(); ++j)
            m.w.data[j] = (m.w.data[j] - lr * gw.data[j]) * shrink;
        for (std::size_t c = 0; c < n_classes; ++c)
            m.b[c] -= lr * gb[c];
    }
    return m;
}

LinearModel train_linear_svm(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                             const BaselineHyper& hyper)
{
    check_xy(x, y, n_classes);
    require_two_classes(y, "linear svm");
    const std::size_t n = x.rows, d = x.cols;
    LinearModel m{Matrix(n_classes, d), Vector(n_classes, 0.0)};
    const double inv_n = 1.0 / static_cast<double>(n);
    const double lambda = hyper.svm_lambda;
    Vector gw(d);

    for (std::size_t c = 0; c < n_classes; ++c) {
        auto w = m.w.row(c);
        double& b = m.b[c];
        for (std::size_t it = 1; it <= hyper.svm_iters; ++it) {
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double target = y[i] == c ? 1.0 : -1.0;
                double margin = b;
                const auto xi = x.row(i);
                for (std::size_t j = 0; j < d; ++j)
                    margin += w[j] * xi[j];
                if (target * margin < 1.0) {
                    axpy(-target * inv_n, xi, gw);
                    gb -= target * inv_n;
                }
            }
            const double eta = hyper.svm_lr / std::sqrt(static_cast<double>(it));
            for (std::size_t j = 0; j < d; ++j)
                w[j] -= eta * (gw[j] + lambda * w[j]);
            b -= eta * gb;
        }
    }
    return m;
}

std::size_t DecisionTree::predict(std::span<const double> x) const
{
    if (nodes.empty())
        throw std::logic_error("decision tree: untrained");
    std::size_t i = 0;
    while (nodes[i].feature >= 0)
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                         ? nodes[i].left
                                         : nodes[i].right);
    return nodes[i].prediction;
}

std::size_t DecisionTree::depth() const
{
    if (nodes.empty())
        return 0;
    std::vector<std::size_t> level(nodes.size(), 0);
    std::size_t deepest = 0;
    // Children always have larger ids than their parent.
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (nodes[i].feature >= 0) {
            level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

std::size_t DecisionTree::leaves() const
{
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) {
        return n.feature < 0;
    }));
}

DecisionTree train_decision_tree(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                                 const BaselineHyper& hyper)
{
    check_xy(x, y, n_classes);
    if (x.rows == 0)
        throw std::invalid_argument("decision tree: empty data");
    std::vector<std::size_t> samples(x.rows);
    std::iota(samples.begin(), samples.end(), 0);
    TreeBuilder builder(x, y, n_classes, hyper.tree_max_depth, hyper.tree_min_samples_leaf, 0, nullptr);
    return builder.build(std::move(samples));
}

std::size_t RandomForest::predict(std::span<const double> x) const
{
    std::vector<std::size_t> votes(n_classes, 0);
    for (const auto& t : trees)
        ++votes[t.predict(x)];
    return majority(votes);
}

RandomForest train_random_forest(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                                 const BaselineHyper& hyper)
{
    return forest_impl(x, y, n_classes, hyper, hyper.parallel);
}

RandomForest train_random_forest_serial(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                                        const BaselineHyper& hyper)
{
    return forest_impl(x, y, n_classes, hyper, false);
}

} // namespace mvkid
