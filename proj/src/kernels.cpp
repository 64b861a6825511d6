#include "mvkid/kernels.hpp"

#include <algorithm>
#include <numeric>

namespace mvkid {

namespace {

std::vector<std::size_t> reduction_order(std::span<const Sample> batch)
{
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return batch[a].label < batch[b].label; });
    return order;
}

double reduce(std::span<const Sample> batch, std::span<Network> slots, std::span<const double> losses, Network& grad)
{
    grad.set_zero();
    auto dst = grad.tensors();
    double loss = 0.0;
    for (std::size_t i : reduction_order(batch)) {
        const auto src = std::as_const(slots[i]).tensors();
        for (std::size_t t = 0; t < dst.size(); ++t)
            axpy(1.0, src[t].values, dst[t].values);
        loss += losses[i];
    }
    return loss;
}

} // namespace

std::span<Network> GradientScratch::acquire(std::size_t n)
{
    while (slots_.size() < n)
        slots_.push_back(Network::zeros(shape_));
    for (std::size_t i = 0; i < n; ++i)
        slots_[i].set_zero();
    return {slots_.data(), n};
}

double batch_gradient_parallel(const Network& net, std::span<const Sample> batch, Network& grad,
                               GradientScratch& scratch)
{
    auto slots = scratch.acquire(batch.size());
    std::vector<double> losses(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i) {
        const auto k = static_cast<std::size_t>(i);
        losses[k] = network_backward(net, *batch[k].x, batch[k].label, slots[k]);
    }
    return reduce(batch, slots, losses, grad);
}

double batch_gradient_serial(const Network& net, std::span<const Sample> batch, Network& grad,
                             GradientScratch& scratch)
{
    auto slots = scratch.acquire(batch.size());
    std::vector<double> losses(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k)
        losses[k] = network_backward(net, *batch[k].x, batch[k].label, slots[k]);
    return reduce(batch, slots, losses, grad);
}

std::vector<Vector> predict_parallel(const Network& net, std::span<const EncodedSession> xs)
{
    std::vector<Vector> out(xs.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xs.size()); ++i)
        out[static_cast<std::size_t>(i)] = network_forward(net, xs[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<Vector> predict_serial(const Network& net, std::span<const EncodedSession> xs)
{
    std::vector<Vector> out;
    out.reserve(xs.size());
    for (const auto& x : xs)
        out.push_back(network_forward(net, x));
    return out;
}

} // namespace mvkid
