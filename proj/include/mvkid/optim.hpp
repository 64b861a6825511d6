#pragma once

#include "mvkid/tensor.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mvkid {

struct NadamHyper {
    double lr = 2e-3;
    double mu = 0.975;
    double nu = 0.999;
    double eps = 1e-8;
    double schedule_decay = 0.004;

    void validate() const;
    bool operator==(const NadamHyper&) const = default;
};

struct NadamState {
    std::vector<Vector> m;
    std::vector<Vector> v;
    std::uint64_t t = 0;
    double mu_product = 1.0;

    static NadamState zeros_like(std::span<const ConstTensorRef> params);
    static NadamState zeros_like(std::span<const TensorRef> params);
};

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Momentum schedule value mu * (1 - 0.5 * 0.96^(step * schedule_decay)).
double nadam_momentum(const NadamHyper& hyper, std::uint64_t step);

/// One Nadam update of every coordinate. Throws NonFiniteGradient (naming the
/// tensor) before touching anything if a gradient is NaN or infinite.
void nadam_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads, NadamState& state,
                const NadamHyper& hyper);

void sgd_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads, double lr);

double global_norm(std::span<const ConstTensorRef> grads);

/// Rescales so the global L2 norm is at most max_norm. Returns the norm before clipping.
double clip_global_norm(std::span<const TensorRef> grads, double max_norm);

} // namespace mvkid
