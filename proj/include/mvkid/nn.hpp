#pragma once

#include "mvkid/preprocess.hpp"
#include "mvkid/rng.hpp"
#include "mvkid/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mvkid {

inline double sigmoid(double x)
{
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// One gated recurrent unit:
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   c = tanh(W x + U (r * h) + b)
///   h' = z * c + (1 - z) * h
/// With use_bias == false the biases stay at zero and receive no gradient.
struct GruCell {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    bool use_bias = true;

    Matrix w_update, w_reset, w_cand; // H x F
    Matrix u_update, u_reset, u_cand; // H x H
    Vector b_update, b_reset, b_cand; // H

    static GruCell zeros(std::size_t input_size, std::size_t hidden_size, bool use_bias = true);

    /// Input matrices ~ U(+-sqrt(6/(F+H))), recurrent ~ U(+-sqrt(6/(2H))), biases 0.
    static GruCell random(std::size_t input_size, std::size_t hidden_size, Rng& rng, bool use_bias = true);

    std::vector<TensorRef> tensors(const std::string& prefix);
    std::vector<ConstTensorRef> tensors(const std::string& prefix) const;

    void check_shapes() const;
};

struct DenseLayer {
    Matrix w; // out x in
    Vector b;

    static DenseLayer zeros(std::size_t in, std::size_t out);
    static DenseLayer random(std::size_t in, std::size_t out, Rng& rng);

    std::size_t in_size() const { return w.cols; }
    std::size_t out_size() const { return w.rows; }

    Vector forward(std::span<const double> x) const;

    std::vector<TensorRef> tensors(const std::string& prefix);
    std::vector<ConstTensorRef> tensors(const std::string& prefix) const;
};

Vector gru_step(const GruCell& cell, std::span<const double> x, std::span<const double> h_prev);

enum class Direction { Forward, Reverse };

/// Per-step intermediates of one pass over the masked-in timesteps.
/// Row t of `h` is the state after t steps (row 0 is the zero state).
struct GruTrace {
    std::size_t steps = 0;
    Matrix h;
    Matrix z, r, cand;

    std::span<const double> final_state() const { return h.row(steps); }
};

/// Runs over the first true_length rows (reversed for Direction::Reverse).
GruTrace gru_trace(const GruCell& cell, const EncodedView& seq, Direction dir = Direction::Forward);

struct GruOutput {
    Matrix states; // padded_length x H; masked-out rows carry the previous state
    Vector final_state;
};

GruOutput gru_forward(const GruCell& cell, const EncodedView& seq);

/// Accumulates parameter gradients into `grad` given dL/d(final state).
void gru_backward(const GruCell& cell, const EncodedView& seq, Direction dir, const GruTrace& trace,
                  std::span<const double> d_final, GruCell& grad);

/// [forward final state ; reverse final state], 2H values.
Vector bigru_encode(const GruCell& fwd, const GruCell& bwd, const EncodedView& seq);

/// Max-subtracted softmax.
Vector softmax(std::span<const double> logits);

Vector dense_softmax_forward(const DenseLayer& layer, std::span<const double> x);

inline constexpr double kLogEps = 1e-12;

double cross_entropy(std::span<const double> probs, std::size_t label);

/// Gradient of cross_entropy(softmax(logits), label) with respect to the logits.
Vector cross_entropy_logit_grad(std::span<const double> probs, std::size_t label);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
    std::string worst_tensor;
};

/// Central differences (L(theta+eps) - L(theta-eps)) / (2 eps) against `analytic`,
/// relative error |a-n| / max(|a|, |n|, 1e-8). Checks every coordinate when
/// max_coords == 0 or the model is small enough, otherwise a seeded subsample.
GradCheckResult grad_check(std::span<const TensorRef> params, std::span<const ConstTensorRef> analytic,
                           const std::function<double()>& loss, double eps, std::size_t max_coords = 0,
                           std::uint64_t seed = 0);

} // namespace mvkid
