#include "mvkid/optim.hpp"

#include <cmath>

namespace mvkid {

namespace {

void check_congruent(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads)
{
    if (params.size() != grads.size())
        throw ShapeError("optimizer: parameter and gradient lists differ in length");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].values.size() != grads[i].values.size())
            throw ShapeError("optimizer: shape mismatch for " + params[i].name);
}

void check_finite(std::span<const ConstTensorRef> grads)
{
    for (const auto& g : grads)
        for (double x : g.values)
            if (!std::isfinite(x))
                throw NonFiniteGradient("non-finite gradient in " + g.name);
}

template <class Ref>
NadamState zeros_for(std::span<const Ref> params)
{
    NadamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.values.size(), 0.0);
        s.v.emplace_back(p.values.size(), 0.0);
    }
    return s;
}

} // namespace

void NadamHyper::validate() const
{
    if (!(lr > 0.0))
        throw std::invalid_argument("nadam: lr must be > 0");
    if (!(mu > 0.0 && mu < 1.0) || !(nu > 0.0 && nu < 1.0))
        throw std::invalid_argument("nadam: mu and nu must lie in (0, 1)");
    if (!(eps > 0.0))
        throw std::invalid_argument("nadam: eps must be > 0");
}

NadamState NadamState::zeros_like(std::span<const ConstTensorRef> params) { return zeros_for(params); }

NadamState NadamState::zeros_like(std::span<const TensorRef> params) { return zeros_for(params); }

double nadam_momentum(const NadamHyper& hyper, std::uint64_t step)
{
    return hyper.mu * (1.0 - 0.5 * std::pow(0.96, static_cast<double>(step) * hyper.schedule_decay));
}

void nadam_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads, NadamState& state,
                const NadamHyper& hyper)
{
    check_congruent(params, grads);
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeError("nadam: state does not match parameter set");
    check_finite(grads);

    const std::uint64_t t = state.t + 1;
    const double mu_t = nadam_momentum(hyper, t);
    const double mu_next = nadam_momentum(hyper, t + 1);
    const double mu_product = state.mu_product * mu_t;
    const double g_corr = 1.0 / (1.0 - mu_product);
    const double m_corr = 1.0 / (1.0 - mu_product * mu_next);
    const double v_corr = 1.0 / (1.0 - std::pow(hyper.nu, static_cast<double>(t)));

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto theta = params[k].values;
        const auto g = grads[k].values;
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (m.size() != theta.size() || v.size() != theta.size())
            throw ShapeError("nadam: state shape mismatch for " + params[k].name);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = hyper.mu * m[i] + (1.0 - hyper.mu) * g[i];
            v[i] = hyper.nu * v[i] + (1.0 - hyper.nu) * g[i] * g[i];
            const double g_hat = g[i] * g_corr;
            const double m_hat = m[i] * m_corr;
            const double v_hat = v[i] * v_corr;
            theta[i] -= hyper.lr * (mu_next * m_hat + (1.0 - mu_next) * g_hat) / (std::sqrt(v_hat) + hyper.eps);
        }
    }
    state.t = t;
    state.mu_product = mu_product;
}

void sgd_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads, double lr)
{
    check_congruent(params, grads);
    check_finite(grads);
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k].values.size(); ++i)
            params[k].values[i] -= lr * grads[k].values[i];
}

double global_norm(std::span<const ConstTensorRef> grads)
{
    double sq = 0.0;
    for (const auto& g : grads)
        for (double x : g.values)
            sq += x * x;
    return std::sqrt(sq);
}

double clip_global_norm(std::span<const TensorRef> grads, double max_norm)
{
    double sq = 0.0;
    for (const auto& g : grads)
        for (double x : g.values)
            sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (const auto& g : grads)
            for (double& x : g.values)
                x *= s;
    }
    return norm;
}

} // namespace mvkid
