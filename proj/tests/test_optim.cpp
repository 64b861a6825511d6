#include "mvkid/optim.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace mvkid;

namespace {

struct Scalar {
    Vector theta;
    Vector grad;

    explicit Scalar(double t, double g = 0.0) : theta{t}, grad{g} {}
    std::vector<TensorRef> p() { return {{"theta", theta}}; }
    std::vector<ConstTensorRef> g() const { return {{"theta", grad}}; }
};

} // namespace

TEST_CASE("nadam single step matches the hand computation")
{
    Scalar s(0.0, 1.0);
    auto st = NadamState::zeros_like(s.p());
    nadam_step(s.p(), s.g(), st, {});
    CHECK(s.theta[0] == doctest::Approx(-0.00203167845236346).epsilon(1e-12));
    CHECK(st.t == 1);
    CHECK(st.m[0][0] == doctest::Approx(0.025));
    CHECK(st.v[0][0] == doctest::Approx(0.001));
}

TEST_CASE("nadam keeps moving on zero gradients after a step")
{
    Scalar s(0.0, 1.0);
    auto st = NadamState::zeros_like(s.p());
    nadam_step(s.p(), s.g(), st, {});
    const double after1 = s.theta[0];
    s.grad[0] = 0.0;
    nadam_step(s.p(), s.g(), st, {});
    const double after2 = s.theta[0];
    nadam_step(s.p(), s.g(), st, {});
    const double after3 = s.theta[0];
    CHECK(after2 == doctest::Approx(-0.0020697253270419466).epsilon(1e-12));
    CHECK(after3 == doctest::Approx(-0.002112315250776575).epsilon(1e-12));
    CHECK(after3 != after2);
    CHECK(std::abs(after3 - after2) < std::abs(after1));
}

TEST_CASE("nadam zero gradient on a fresh state is a fixed point")
{
    Scalar s(0.7, 0.0);
    auto st = NadamState::zeros_like(s.p());
    nadam_step(s.p(), s.g(), st, {});
    CHECK(s.theta[0] == 0.7);
    CHECK(st.m[0][0] == 0.0);
    CHECK(st.v[0][0] == 0.0);
}

TEST_CASE("nadam refuses non-finite gradients without mutating")
{
    Scalar s(0.5, std::numeric_limits<double>::quiet_NaN());
    auto st = NadamState::zeros_like(s.p());
    CHECK_THROWS_AS(nadam_step(s.p(), s.g(), st, {}), NonFiniteGradient);
    CHECK(s.theta[0] == 0.5);
    CHECK(st.t == 0);
}

TEST_CASE("momentum schedule")
{
    NadamHyper h;
    CHECK(nadam_momentum(h, 1) == doctest::Approx(0.975 * (1.0 - 0.5 * std::pow(0.96, 0.004))));
    CHECK(nadam_momentum(h, 2) > nadam_momentum(h, 1));
}

TEST_CASE("sgd arithmetic and closed form on a quadratic")
{
    Scalar s(1.0, 2.0);
    sgd_step(s.p(), s.g(), 0.0);
    CHECK(s.theta[0] == 1.0);
    sgd_step(s.p(), s.g(), 0.1);
    CHECK(s.theta[0] == doctest::Approx(0.8));

    Scalar q(1.0);
    for (int k = 1; k <= 10; ++k) {
        q.grad[0] = 2.0 * q.theta[0];
        sgd_step(q.p(), q.g(), 0.25);
        CHECK(q.theta[0] == doctest::Approx(std::pow(0.5, k)).epsilon(1e-14));
    }
}

TEST_CASE("global norm clipping")
{
    Vector a{3.0}, b{4.0};
    std::vector<TensorRef> g{{"a", a}, {"b", b}};
    std::vector<ConstTensorRef> cg{{"a", a}, {"b", b}};
    CHECK(global_norm(cg) == doctest::Approx(5.0));
    CHECK(clip_global_norm(g, 10.0) == doctest::Approx(5.0));
    CHECK(a[0] == 3.0);
    CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(b[0] == doctest::Approx(0.8));
}
