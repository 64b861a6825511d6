#include "mvkid/network.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

namespace mvkid {

std::size_t NetworkShape::enabled_views() const
{
    return static_cast<std::size_t>(std::count(views.begin(), views.end(), true));
}

void NetworkShape::validate() const
{
    if (enabled_views() == 0)
        throw std::invalid_argument("network: at least one view must be enabled");
    if (n_classes < 2)
        throw std::invalid_argument("network: n_classes must be >= 2");
    if (hidden_size == 0 || fusion_size == 0)
        throw std::invalid_argument("network: layer sizes must be >= 1");
}

Network Network::zeros(const NetworkShape& shape)
{
    shape.validate();
    Network n;
    n.shape = shape;
    for (auto v : kAllViews) {
        if (!shape.views[index_of(v)])
            continue;
        n.encoders.push_back({v, GruCell::zeros(feature_count(v), shape.hidden_size, shape.use_bias),
                              GruCell::zeros(feature_count(v), shape.hidden_size, shape.use_bias)});
    }
    n.fusion = DenseLayer::zeros(shape.fusion_input(), shape.fusion_size);
    n.output = DenseLayer::zeros(shape.fusion_size, shape.n_classes);
    return n;
}

Network Network::random(const NetworkShape& shape, std::uint64_t seed)
{
    Network n = zeros(shape);
    for (auto& e : n.encoders) {
        Rng rng = make_rng(stream_key(hash64(seed, "encoder"), index_of(e.view)));
        e.fwd = GruCell::random(feature_count(e.view), shape.hidden_size, rng, shape.use_bias);
        e.bwd = GruCell::random(feature_count(e.view), shape.hidden_size, rng, shape.use_bias);
    }
    Rng rng = make_rng(hash64(seed, "head"));
    n.fusion = DenseLayer::random(shape.fusion_input(), shape.fusion_size, rng);
    n.output = DenseLayer::random(shape.fusion_size, shape.n_classes, rng);
    return n;
}

std::vector<TensorRef> Network::tensors()
{
    std::vector<TensorRef> out;
    for (auto& e : encoders) {
        const std::string name(view_name(e.view));
        for (auto& t : e.fwd.tensors(name + ".fwd."))
            out.push_back(std::move(t));
        for (auto& t : e.bwd.tensors(name + ".bwd."))
            out.push_back(std::move(t));
    }
    for (auto& t : fusion.tensors("fusion."))
        out.push_back(std::move(t));
    for (auto& t : output.tensors("output."))
        out.push_back(std::move(t));
    return out;
}

std::vector<ConstTensorRef> Network::tensors() const
{
    std::vector<ConstTensorRef> out;
    for (const auto& e : encoders) {
        const std::string name(view_name(e.view));
        for (auto& t : e.fwd.tensors(name + ".fwd."))
            out.push_back(std::move(t));
        for (auto& t : e.bwd.tensors(name + ".bwd."))
            out.push_back(std::move(t));
    }
    for (auto& t : fusion.tensors("fusion."))
        out.push_back(std::move(t));
    for (auto& t : output.tensors("output."))
        out.push_back(std::move(t));
    return out;
}

std::size_t Network::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& t : tensors())
        n += t.values.size();
    return n;
}

void Network::set_zero()
{
    for (auto& t : tensors())
        std::fill(t.values.begin(), t.values.end(), 0.0);
}

Vector network_forward(const Network& net, const EncodedSession& x, NetworkTrace* trace)
{
    Vector concat;
    concat.reserve(net.shape.fusion_input());
    for (const auto& e : net.encoders) {
        const EncodedView& seq = x[index_of(e.view)];
        GruTrace f = gru_trace(e.fwd, seq, Direction::Forward);
        GruTrace b = gru_trace(e.bwd, seq, Direction::Reverse);
        concat.insert(concat.end(), f.final_state().begin(), f.final_state().end());
        concat.insert(concat.end(), b.final_state().begin(), b.final_state().end());
        if (trace) {
            trace->fwd.push_back(std::move(f));
            trace->bwd.push_back(std::move(b));
        }
    }
    Vector hidden = net.fusion.forward(concat);
    for (auto& v : hidden)
        v = std::tanh(v);
    Vector probs = dense_softmax_forward(net.output, hidden);
    if (trace) {
        trace->concat = std::move(concat);
        trace->hidden = std::move(hidden);
        trace->probs = probs;
    }
    return probs;
}

double network_loss(const Network& net, const EncodedSession& x, std::size_t label)
{
    return cross_entropy(network_forward(net, x), label);
}

double network_backward(const Network& net, const EncodedSession& x, std::size_t label, Network& grad)
{
    NetworkTrace tr;
    network_forward(net, x, &tr);
    const double loss = cross_entropy(tr.probs, label);

    const Vector d_logits = cross_entropy_logit_grad(tr.probs, label);
    ger_acc(grad.output.w, d_logits, tr.hidden);
    axpy(1.0, d_logits, grad.output.b);

    Vector d_hidden(net.shape.fusion_size, 0.0);
    gemv_t_acc(net.output.w, d_logits, d_hidden);
    for (std::size_t i = 0; i < d_hidden.size(); ++i)
        d_hidden[i] *= 1.0 - tr.hidden[i] * tr.hidden[i];
    ger_acc(grad.fusion.w, d_hidden, tr.concat);
    axpy(1.0, d_hidden, grad.fusion.b);

    Vector d_concat(net.shape.fusion_input(), 0.0);
    gemv_t_acc(net.fusion.w, d_hidden, d_concat);

    const std::size_t h = net.shape.hidden_size;
    for (std::size_t k = 0; k < net.encoders.size(); ++k) {
        const auto& e = net.encoders[k];
        const EncodedView& seq = x[index_of(e.view)];
        const std::span<const double> d(d_concat.data() + 2 * h * k, 2 * h);
        gru_backward(e.fwd, seq, Direction::Forward, tr.fwd[k], d.first(h), grad.encoders[k].fwd);
        gru_backward(e.bwd, seq, Direction::Reverse, tr.bwd[k], d.last(h), grad.encoders[k].bwd);
    }
    return loss;
}

GradCheckResult network_grad_check(const Network& net, const EncodedSession& x, std::size_t label, double eps,
                                   std::size_t max_coords, std::uint64_t seed)
{
    Network grad = Network::zeros(net.shape);
    network_backward(net, x, label, grad);
    Network probe = net;
    auto params = probe.tensors();
    const auto analytic = std::as_const(grad).tensors();
    return grad_check(params, analytic, [&] { return network_loss(probe, x, label); }, eps, max_coords, seed);
}

} // namespace mvkid
