#pragma once

#include "mvkid/network.hpp"

#include <span>
#include <vector>

namespace mvkid {

/// One training example: an encoded session and its class index.
struct Sample {
    const EncodedSession* x = nullptr;
    std::size_t label = 0;
};

/// Per-sample gradient buffers reused across batches.
class GradientScratch {
public:
    explicit GradientScratch(const NetworkShape& shape) : shape_(shape) {}

    std::span<Network> acquire(std::size_t n);

private:
    NetworkShape shape_;
    std::vector<Network> slots_;
};

/// Summed loss and gradient over a batch, reduced in class-then-sample order.
/// `grad` is overwritten. The parallel and serial variants are bit-identical.
double batch_gradient_parallel(const Network& net, std::span<const Sample> batch, Network& grad,
                               GradientScratch& scratch);

/// Single-threaded reference for batch_gradient_parallel.
double batch_gradient_serial(const Network& net, std::span<const Sample> batch, Network& grad,
                             GradientScratch& scratch);

/// Class probabilities for each encoded session (row i <-> xs[i]).
std::vector<Vector> predict_parallel(const Network& net, std::span<const EncodedSession> xs);
std::vector<Vector> predict_serial(const Network& net, std::span<const EncodedSession> xs);

} // namespace mvkid
