#include "helpers.hpp"

#include "mvkid/network.hpp"

#include <doctest.h>

#include <cmath>

using namespace mvkid;
using mvkid::test::make_view;

namespace {

GruCell scalar_cell(double wz, double uz, double wr, double ur, double w, double u)
{
    GruCell c = GruCell::zeros(1, 1);
    c.w_update(0, 0) = wz;
    c.u_update(0, 0) = uz;
    c.w_reset(0, 0) = wr;
    c.u_reset(0, 0) = ur;
    c.w_cand(0, 0) = w;
    c.u_cand(0, 0) = u;
    return c;
}

} // namespace

TEST_CASE("gru step with only the candidate input weight set")
{
    // z = r = 0.5, c = tanh(1), h' = 0.5 tanh(1)
    const GruCell c = scalar_cell(0, 0, 0, 0, 1, 0);
    const double x[] = {1.0}, h[] = {0.0};
    CHECK(gru_step(c, x, h)[0] == doctest::Approx(0.3807970779778824).epsilon(1e-12));
}

TEST_CASE("gru recursion over three steps halves the state each step")
{
    const GruCell c = scalar_cell(0, 0, 0, 0, 1, 0);
    const auto seq = make_view({{1.0}, {0.0}, {0.0}}, 1);
    const auto out = gru_forward(c, seq);
    CHECK(out.final_state[0] == doctest::Approx(0.125 * std::tanh(1.0)).epsilon(1e-12));
    CHECK(out.states(0, 0) == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-12));
}

TEST_CASE("bigru concatenates forward and reverse final states")
{
    const GruCell f = scalar_cell(0.5, -0.3, 0.2, 0.4, 1.0, 0.7);
    const GruCell b = scalar_cell(-0.4, 0.1, 0.3, -0.2, 0.8, -0.5);
    const auto seq = make_view({{0.3}, {0.9}}, 1, 3);
    const Vector h = bigru_encode(f, b, seq);
    REQUIRE(h.size() == 2);
    CHECK(h[0] == doctest::Approx(0.5092237475064497).epsilon(1e-12));
    CHECK(h[1] == doctest::Approx(0.21545100740556428).epsilon(1e-12));
}

TEST_CASE("padding rows do not change the encoding")
{
    Rng rng(7);
    const GruCell f = GruCell::random(3, 4, rng), b = GruCell::random(3, 4, rng);
    auto short_seq = make_view({{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}}, 3);
    auto padded = make_view({{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}}, 3, 5);
    for (std::size_t t = 2; t < 7; ++t)
        for (std::size_t k = 0; k < 3; ++k)
            padded.values(t, k) = 99.0; // garbage behind the mask
    CHECK(bigru_encode(f, b, short_seq) == bigru_encode(f, b, padded));
    const auto out = gru_forward(f, padded);
    for (std::size_t t = 2; t < 7; ++t)
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(out.states(t, k) == out.final_state[k]);
}

TEST_CASE("softmax and cross-entropy match hand values")
{
    const double logits[] = {1.0, 2.0, 3.0};
    const Vector p = softmax(logits);
    CHECK(p[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.24472847105479767).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));

    const double probs[] = {0.7, 0.3};
    CHECK(cross_entropy(probs, 1) == doctest::Approx(1.2039728043259361).epsilon(1e-10));

    const double big[] = {1000.0, 1001.0, 1002.0};
    const Vector q = softmax(big);
    CHECK(q[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and sums to one")
{
    Rng rng(3);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector l(5);
        for (double& x : l)
            x = n(rng);
        Vector shifted = l;
        for (double& x : shifted)
            x += 17.25;
        const Vector a = softmax(l), b = softmax(shifted);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            sum += a[i];
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cross-entropy logit gradient matches finite differences")
{
    const double logits[] = {0.3, -1.2, 2.0, 0.1};
    const Vector p = softmax(logits);
    const Vector g = cross_entropy_logit_grad(p, 2);
    for (std::size_t k = 0; k < 4; ++k) {
        double lp[4], lm[4];
        std::copy(std::begin(logits), std::end(logits), lp);
        std::copy(std::begin(logits), std::end(logits), lm);
        lp[k] += 1e-6;
        lm[k] -= 1e-6;
        const double num = (cross_entropy(softmax(lp), 2) - cross_entropy(softmax(lm), 2)) / 2e-6;
        CHECK(g[k] == doctest::Approx(num).epsilon(1e-6));
    }
}

TEST_CASE("random cell initialisation respects the uniform limits")
{
    Rng rng(11);
    const GruCell c = GruCell::random(10, 8, rng);
    const double lim_in = std::sqrt(6.0 / 18.0), lim_rec = std::sqrt(6.0 / 16.0);
    for (double x : c.w_update.data)
        CHECK(std::abs(x) <= lim_in);
    for (double x : c.u_cand.data)
        CHECK(std::abs(x) <= lim_rec);
    for (double x : c.b_reset)
        CHECK(x == 0.0);
}

TEST_CASE("network gradient check at H=4, K=3 over ten seeds")
{
    NetworkShape shape;
    shape.hidden_size = 4;
    shape.fusion_size = 6;
    shape.n_classes = 3;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Network net = Network::random(shape, seed);
        Rng rng(seed * 101);
        const EncodedSession x = mvkid::test::random_session(rng, 5);
        const auto r = network_grad_check(net, x, seed % 3, 1e-5);
        CHECK(r.coordinates == net.parameter_count());
        worst = std::max(worst, r.max_rel_error);
    }
    INFO("worst relative error " << worst);
    CHECK(worst < 1e-4);
}

TEST_CASE("gradient check without biases and with a single view")
{
    NetworkShape shape;
    shape.views = {false, true, false};
    shape.hidden_size = 3;
    shape.fusion_size = 4;
    shape.n_classes = 2;
    shape.use_bias = false;
    const Network net = Network::random(shape, 5);
    Rng rng(5);
    const auto x = mvkid::test::random_session(rng, 4);
    CHECK(network_grad_check(net, x, 1, 1e-5).max_rel_error < 1e-4);

    Network grad = Network::zeros(shape);
    network_backward(net, x, 1, grad);
    for (const auto& t : grad.tensors())
        if (t.name.find(".b_") != std::string::npos)
            for (double g : t.values)
                CHECK(g == 0.0);
}

TEST_CASE("network tensor names are stable")
{
    NetworkShape shape;
    shape.hidden_size = 2;
    shape.fusion_size = 3;
    const Network net = Network::random(shape, 1);
    const auto t = net.tensors();
    CHECK(t.front().name == "alphabet.fwd.w_update");
    CHECK(t.back().name == "output.b");
    std::size_t total = 0;
    for (const auto& x : t)
        total += x.values.size();
    CHECK(total == net.parameter_count());
}
