#pragma once

#include "mvkid/nn.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mvkid {

struct NetworkShape {
    std::array<bool, kNumViews> views{true, true, true};
    std::size_t hidden_size = 32;
    std::size_t fusion_size = 64;
    std::size_t n_classes = 2;
    bool use_bias = true;

    std::size_t enabled_views() const;
    std::size_t fusion_input() const { return 2 * hidden_size * enabled_views(); }
    void validate() const;
    bool operator==(const NetworkShape&) const = default;
};

struct ViewEncoder {
    ViewKind view = ViewKind::Alphabet;
    GruCell fwd;
    GruCell bwd;
};

/// Per-view bidirectional GRU encoders, concatenated in Alphabet, Symbol,
/// Accel order, then tanh(fusion) and a softmax output layer. Gradients use
/// the same type, zero-initialised.
struct Network {
    NetworkShape shape;
    std::vector<ViewEncoder> encoders;
    DenseLayer fusion;
    DenseLayer output;

    static Network zeros(const NetworkShape& shape);
    static Network random(const NetworkShape& shape, std::uint64_t seed);

    std::vector<TensorRef> tensors();
    std::vector<ConstTensorRef> tensors() const;
    std::size_t parameter_count() const;
    void set_zero();
};

struct NetworkTrace {
    std::vector<GruTrace> fwd;
    std::vector<GruTrace> bwd;
    Vector concat;
    Vector hidden;
    Vector probs;
};

Vector network_forward(const Network& net, const EncodedSession& x, NetworkTrace* trace = nullptr);

/// Cross-entropy loss of one sample; its exact gradient is added into `grad`.
double network_backward(const Network& net, const EncodedSession& x, std::size_t label, Network& grad);

double network_loss(const Network& net, const EncodedSession& x, std::size_t label);

GradCheckResult network_grad_check(const Network& net, const EncodedSession& x, std::size_t label, double eps,
                                   std::size_t max_coords = 0, std::uint64_t seed = 0);

} // namespace mvkid
