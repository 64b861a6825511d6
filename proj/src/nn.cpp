#include "mvkid/nn.hpp"

#include <algorithm>
#include <numeric>

namespace mvkid {

namespace {

void fill_uniform(Matrix& m, double limit, Rng& rng)
{
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& x : m.data)
        x = dist(rng);
}

void require(bool ok, const char* what)
{
    if (!ok)
        throw ShapeError(what);
}

// One recurrence step; `rh` receives r * h.
void step_into(const GruCell& c, std::span<const double> x, std::span<const double> h, std::span<double> z,
               std::span<double> r, std::span<double> cand, std::span<double> h_out, std::span<double> rh)
{
    const std::size_t n = c.hidden_size;
    if (c.use_bias) {
        std::copy(c.b_update.begin(), c.b_update.end(), z.begin());
        std::copy(c.b_reset.begin(), c.b_reset.end(), r.begin());
        std::copy(c.b_cand.begin(), c.b_cand.end(), cand.begin());
    } else {
        std::fill(z.begin(), z.end(), 0.0);
        std::fill(r.begin(), r.end(), 0.0);
        std::fill(cand.begin(), cand.end(), 0.0);
    }
    gemv_acc(c.w_update, x, z);
    gemv_acc(c.u_update, h, z);
    gemv_acc(c.w_reset, x, r);
    gemv_acc(c.u_reset, h, r);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = sigmoid(z[i]);
        r[i] = sigmoid(r[i]);
        rh[i] = r[i] * h[i];
    }
    gemv_acc(c.w_cand, x, cand);
    gemv_acc(c.u_cand, rh, cand);
    for (std::size_t i = 0; i < n; ++i) {
        cand[i] = std::tanh(cand[i]);
        h_out[i] = z[i] * cand[i] + (1.0 - z[i]) * h[i];
    }
}

std::size_t input_row(const EncodedView& seq, Direction dir, std::size_t step)
{
    return dir == Direction::Forward ? step : seq.true_length - 1 - step;
}

} // namespace

GruCell GruCell::zeros(std::size_t input_size, std::size_t hidden_size, bool use_bias)
{
    GruCell c;
    c.input_size = input_size;
    c.hidden_size = hidden_size;
    c.use_bias = use_bias;
    for (Matrix* m : {&c.w_update, &c.w_reset, &c.w_cand})
        *m = Matrix(hidden_size, input_size);
    for (Matrix* m : {&c.u_update, &c.u_reset, &c.u_cand})
        *m = Matrix(hidden_size, hidden_size);
    for (Vector* b : {&c.b_update, &c.b_reset, &c.b_cand})
        b->assign(hidden_size, 0.0);
    return c;
}

GruCell GruCell::random(std::size_t input_size, std::size_t hidden_size, Rng& rng, bool use_bias)
{
    GruCell c = zeros(input_size, hidden_size, use_bias);
    const double in_limit = std::sqrt(6.0 / static_cast<double>(input_size + hidden_size));
    const double rec_limit = std::sqrt(6.0 / static_cast<double>(2 * hidden_size));
    for (Matrix* m : {&c.w_update, &c.w_reset, &c.w_cand})
        fill_uniform(*m, in_limit, rng);
    for (Matrix* m : {&c.u_update, &c.u_reset, &c.u_cand})
        fill_uniform(*m, rec_limit, rng);
    return c;
}

std::vector<TensorRef> GruCell::tensors(const std::string& prefix)
{
    std::vector<TensorRef> out{
        {prefix + "w_update", w_update.data}, {prefix + "w_reset", w_reset.data}, {prefix + "w_cand", w_cand.data},
        {prefix + "u_update", u_update.data}, {prefix + "u_reset", u_reset.data}, {prefix + "u_cand", u_cand.data},
        {prefix + "b_update", b_update},      {prefix + "b_reset", b_reset},      {prefix + "b_cand", b_cand},
    };
    return out;
}

std::vector<ConstTensorRef> GruCell::tensors(const std::string& prefix) const
{
    std::vector<ConstTensorRef> out{
        {prefix + "w_update", w_update.data}, {prefix + "w_reset", w_reset.data}, {prefix + "w_cand", w_cand.data},
        {prefix + "u_update", u_update.data}, {prefix + "u_reset", u_reset.data}, {prefix + "u_cand", u_cand.data},
        {prefix + "b_update", b_update},      {prefix + "b_reset", b_reset},      {prefix + "b_cand", b_cand},
    };
    return out;
}

void GruCell::check_shapes() const
{
    const std::size_t f = input_size, h = hidden_size;
    for (const Matrix* m : {&w_update, &w_reset, &w_cand})
        require(m->rows == h && m->cols == f && m->data.size() == h * f, "GruCell: input matrix shape");
    for (const Matrix* m : {&u_update, &u_reset, &u_cand})
        require(m->rows == h && m->cols == h && m->data.size() == h * h, "GruCell: recurrent matrix shape");
    for (const Vector* b : {&b_update, &b_reset, &b_cand})
        require(b->size() == h, "GruCell: bias shape");
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out)
{
    return {Matrix(out, in), Vector(out, 0.0)};
}

DenseLayer DenseLayer::random(std::size_t in, std::size_t out, Rng& rng)
{
    DenseLayer d = zeros(in, out);
    fill_uniform(d.w, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
    return d;
}

Vector DenseLayer::forward(std::span<const double> x) const
{
    require(x.size() == in_size() && b.size() == out_size(), "DenseLayer: input size mismatch");
    Vector y = b;
    gemv_acc(w, x, y);
    return y;
}

std::vector<TensorRef> DenseLayer::tensors(const std::string& prefix)
{
    return {{prefix + "w", w.data}, {prefix + "b", b}};
}

std::vector<ConstTensorRef> DenseLayer::tensors(const std::string& prefix) const
{
    return {{prefix + "w", w.data}, {prefix + "b", b}};
}

Vector gru_step(const GruCell& cell, std::span<const double> x, std::span<const double> h_prev)
{
    cell.check_shapes();
    require(x.size() == cell.input_size, "gru_step: input size mismatch");
    require(h_prev.size() == cell.hidden_size, "gru_step: hidden size mismatch");
    const std::size_t n = cell.hidden_size;
    Vector z(n), r(n), cand(n), rh(n), h(n);
    step_into(cell, x, h_prev, z, r, cand, h, rh);
    return h;
}

GruTrace gru_trace(const GruCell& cell, const EncodedView& seq, Direction dir)
{
    require(seq.features() == cell.input_size, "gru_trace: feature count mismatch");
    const std::size_t n = cell.hidden_size;
    GruTrace tr;
    tr.steps = seq.true_length;
    tr.h = Matrix(tr.steps + 1, n);
    tr.z = Matrix(tr.steps, n);
    tr.r = Matrix(tr.steps, n);
    tr.cand = Matrix(tr.steps, n);
    Vector rh(n);
    for (std::size_t t = 0; t < tr.steps; ++t) {
        step_into(cell, seq.values.row(input_row(seq, dir, t)), tr.h.row(t), tr.z.row(t), tr.r.row(t),
                  tr.cand.row(t), tr.h.row(t + 1), rh);
    }
    return tr;
}

GruOutput gru_forward(const GruCell& cell, const EncodedView& seq)
{
    cell.check_shapes();
    const GruTrace tr = gru_trace(cell, seq, Direction::Forward);
    GruOutput out;
    out.states = Matrix(seq.padded_length(), cell.hidden_size);
    for (std::size_t t = 0; t < seq.padded_length(); ++t) {
        const auto src = tr.h.row(std::min(t + 1, tr.steps));
        std::copy(src.begin(), src.end(), out.states.row(t).begin());
    }
    const auto fin = tr.final_state();
    out.final_state.assign(fin.begin(), fin.end());
    return out;
}

void gru_backward(const GruCell& cell, const EncodedView& seq, Direction dir, const GruTrace& trace,
                  std::span<const double> d_final, GruCell& grad)
{
    const std::size_t n = cell.hidden_size;
    require(d_final.size() == n, "gru_backward: gradient size mismatch");
    Vector dh(d_final.begin(), d_final.end());
    Vector dh_prev(n), da_z(n), da_r(n), da_c(n), d_rh(n), rh(n);

    for (std::size_t t = trace.steps; t-- > 0;) {
        const auto x = seq.values.row(input_row(seq, dir, t));
        const auto h = trace.h.row(t);
        const auto z = trace.z.row(t);
        const auto r = trace.r.row(t);
        const auto c = trace.cand.row(t);

        for (std::size_t i = 0; i < n; ++i) {
            const double dz = dh[i] * (c[i] - h[i]);
            const double dc = dh[i] * z[i];
            dh_prev[i] = dh[i] * (1.0 - z[i]);
            da_c[i] = dc * (1.0 - c[i] * c[i]);
            da_z[i] = dz * z[i] * (1.0 - z[i]);
            rh[i] = r[i] * h[i];
            d_rh[i] = 0.0;
        }

        ger_acc(grad.w_cand, da_c, x);
        ger_acc(grad.u_cand, da_c, rh);
        gemv_t_acc(cell.u_cand, da_c, d_rh);
        for (std::size_t i = 0; i < n; ++i) {
            const double dr = d_rh[i] * h[i];
            dh_prev[i] += d_rh[i] * r[i];
            da_r[i] = dr * r[i] * (1.0 - r[i]);
        }

        ger_acc(grad.w_reset, da_r, x);
        ger_acc(grad.u_reset, da_r, h);
        gemv_t_acc(cell.u_reset, da_r, dh_prev);

        ger_acc(grad.w_update, da_z, x);
        ger_acc(grad.u_update, da_z, h);
        gemv_t_acc(cell.u_update, da_z, dh_prev);

        if (cell.use_bias) {
            axpy(1.0, da_z, grad.b_update);
            axpy(1.0, da_r, grad.b_reset);
            axpy(1.0, da_c, grad.b_cand);
        }
        dh.swap(dh_prev);
    }
}

Vector bigru_encode(const GruCell& fwd, const GruCell& bwd, const EncodedView& seq)
{
    fwd.check_shapes();
    bwd.check_shapes();
    require(fwd.input_size == bwd.input_size && fwd.hidden_size == bwd.hidden_size,
            "bigru_encode: forward and reverse cells differ in shape");
    const GruTrace f = gru_trace(fwd, seq, Direction::Forward);
    const GruTrace b = gru_trace(bwd, seq, Direction::Reverse);
    Vector out(f.final_state().begin(), f.final_state().end());
    out.insert(out.end(), b.final_state().begin(), b.final_state().end());
    return out;
}

Vector softmax(std::span<const double> logits)
{
    require(!logits.empty(), "softmax: empty input");
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vector p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& x : p)
        x /= sum;
    return p;
}

Vector dense_softmax_forward(const DenseLayer& layer, std::span<const double> x)
{
    return softmax(layer.forward(x));
}

double cross_entropy(std::span<const double> probs, std::size_t label)
{
    if (label >= probs.size())
        throw std::out_of_range("cross_entropy: label out of range");
    return -std::log(probs[label] + kLogEps);
}

Vector cross_entropy_logit_grad(std::span<const double> probs, std::size_t label)
{
    if (label >= probs.size())
        throw std::out_of_range("cross_entropy: label out of range");
    // d/dlogit_k of -log(p_y + eps) = (p_y / (p_y + eps)) * (p_k - [k == y])
    const double w = probs[label] / (probs[label] + kLogEps);
    Vector g(probs.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = w * (probs[k] - (k == label ? 1.0 : 0.0));
    return g;
}

GradCheckResult grad_check(std::span<const TensorRef> params, std::span<const ConstTensorRef> analytic,
                           const std::function<double()>& loss, double eps, std::size_t max_coords,
                           std::uint64_t seed)
{
    require(params.size() == analytic.size(), "grad_check: parameter/gradient lists differ");
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t t = 0; t < params.size(); ++t) {
        require(params[t].values.size() == analytic[t].values.size(), "grad_check: tensor shape mismatch");
        for (std::size_t i = 0; i < params[t].values.size(); ++i)
            coords.emplace_back(t, i);
    }
    if (max_coords != 0) {
        max_coords = std::max<std::size_t>(max_coords, 200);
        if (coords.size() > max_coords) {
            Rng rng = make_rng(hash64(seed, "grad_check"));
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords);
            std::sort(coords.begin(), coords.end());
        }
    }

    GradCheckResult res;
    res.coordinates = coords.size();
    for (auto [t, i] : coords) {
        double& theta = params[t].values[i];
        const double saved = theta;
        theta = saved + eps;
        const double up = loss();
        theta = saved - eps;
        const double down = loss();
        theta = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[t].values[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst_tensor = params[t].name + "[" + std::to_string(i) + "]";
        }
    }
    return res;
}

} // namespace mvkid
