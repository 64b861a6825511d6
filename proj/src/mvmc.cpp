#include "mvkid/mvmc.hpp"

#include "mvkid/kernels.hpp"
#include "mvkid/rng.hpp"

#include <algorithm>
#include <numeric>

namespace mvkid {

NetworkShape ModelConfig::shape() const
{
    NetworkShape s;
    s.views = views;
    s.hidden_size = hidden_size;
    s.fusion_size = classifier_hidden;
    s.n_classes = n_classes;
    s.use_bias = use_bias;
    return s;
}

void ModelConfig::validate() const
{
    shape().validate();
    for (auto len : max_len)
        if (len == 0)
            throw std::invalid_argument("model config: max_len must be >= 1");
    if (batch_size == 0)
        throw std::invalid_argument("model config: batch_size must be >= 1");
    nadam.validate();
}

MvmcModel MvmcModel::initialize(const ModelConfig& cfg, Normalizer nz, std::vector<std::string> labels)
{
    cfg.validate();
    if (labels.size() != cfg.n_classes)
        throw LabelMismatch("model: " + std::to_string(labels.size()) + " labels for " + std::to_string(cfg.n_classes)
                            + " classes");
    MvmcModel m;
    m.config = cfg;
    m.net = Network::random(cfg.shape(), hash64(cfg.seed, "init"));
    m.normalizer = std::move(nz);
    m.labels = std::move(labels);
    return m;
}

EncodedSession MvmcModel::encode(const Session& s) const
{
    const Session imputed = impute_missing(s);
    EncodedSession out;
    for (auto v : kAllViews) {
        // Disabled views are never read by the network.
        const std::size_t len = config.views[index_of(v)] ? config.max_len[index_of(v)] : 0;
        out[index_of(v)] = encode_view(normalizer, imputed, v, len);
    }
    return out;
}

Vector forward(const MvmcModel& model, const Session& s) { return network_forward(model.net, model.encode(s)); }

std::size_t argmax_class(std::span<const double> probs)
{
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::string predict(const MvmcModel& model, const Session& s) { return model.labels.at(argmax_class(forward(model, s))); }

double accuracy(const MvmcModel& model, std::span<const EncodedSession> xs, std::span<const std::size_t> labels)
{
    if (xs.empty())
        return 0.0;
    const auto probs = model.config.parallel ? predict_parallel(model.net, xs) : predict_serial(model.net, xs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        hits += argmax_class(probs[i]) == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(xs.size());
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const ModelConfig& cfg)
{
    if (!val_set.empty() && val_set.labels() != train_set.labels())
        throw LabelMismatch("train: training and validation label indices differ");
    if (train_set.num_classes() != cfg.n_classes)
        throw LabelMismatch("train: dataset has " + std::to_string(train_set.num_classes()) + " users but config has "
                            + std::to_string(cfg.n_classes) + " classes");

    TrainResult result;
    result.model = MvmcModel::initialize(cfg, fit_normalizer(train_set), train_set.labels());
    MvmcModel& model = result.model;
    if (cfg.epochs == 0)
        return result;

    std::vector<EncodedSession> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        xs.push_back(model.encode(train_set.sessions()[i]));
        ys.push_back(train_set.label(i));
    }
    const Dataset& selector = val_set.empty() ? train_set : val_set;
    std::vector<EncodedSession> val_xs;
    std::vector<std::size_t> val_ys;
    if (val_set.empty()) {
        val_xs = xs;
        val_ys = ys;
    } else {
        for (std::size_t i = 0; i < selector.size(); ++i) {
            val_xs.push_back(model.encode(selector.sessions()[i]));
            val_ys.push_back(selector.label(i));
        }
    }

    Network grad = Network::zeros(model.net.shape);
    GradientScratch scratch(model.net.shape);
    NadamState state = NadamState::zeros_like(std::as_const(model.net).tensors());
    Network best = model.net;
    double best_acc = -1.0;

    std::vector<std::size_t> order(xs.size());
    std::vector<Sample> batch;
    const std::uint64_t shuffle_key = hash64(cfg.seed, "shuffle");
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng = make_rng(stream_key(shuffle_key, epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i)
                batch.push_back({&xs[order[i]], ys[order[i]]});
            epoch_loss += cfg.parallel ? batch_gradient_parallel(model.net, batch, grad, scratch)
                                       : batch_gradient_serial(model.net, batch, grad, scratch);
            auto g = grad.tensors();
            if (cfg.clip_norm > 0.0)
                clip_global_norm(g, cfg.clip_norm);
            nadam_step(model.net.tensors(), std::as_const(grad).tensors(), state, cfg.nadam);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(xs.size());
        rec.val_accuracy = accuracy(model, val_xs, val_ys);
        result.history.push_back(rec);
        if (rec.val_accuracy > best_acc) {
            best_acc = rec.val_accuracy;
            best = model.net;
            result.best_epoch = epoch;
        }
    }
    model.net = std::move(best);
    return result;
}

} // namespace mvkid
