#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ecgad/autodiff.hpp"
#include "ecgad/errors.hpp"
#include "ecgad/rng.hpp"
#include "testutil.hpp"

using namespace ecgad;
using ad::Tensor;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    int n = 1;
    for (int d : shape) n *= d;
    ad::Array v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
    return Tensor::variable(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul produces the hand-computed product") {
    ad::Array a(6);
    a << 1, 2, 3, 4, 5, 6;  // 2x3
    ad::Array b(6);
    b << 7, 8, 9, 10, 11, 12;  // 3x2
    Tensor out = ad::matmul(Tensor::constant({2, 3}, a), Tensor::constant({3, 2}, b));
    CHECK(out.value()[0] == 58);   // 1*7+2*9+3*11
    CHECK(out.value()[1] == 64);
    CHECK(out.value()[2] == 139);
    CHECK(out.value()[3] == 154);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    try {
        ad::matmul(a, b);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(4,2)") != std::string::npos);
    }
}

TEST_CASE("softmax of a constant row is uniform") {
    Tensor out = ad::softmax(Tensor::zeros({3}));
    for (int i = 0; i < 3; ++i) CHECK(out.value()[i] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("conv1d with kernel [1,-1] is the first difference") {
    ad::Array x(5);
    x << 1, 4, 9, 16, 25;
    ad::Array w(2);
    w << -1, 1;  // y[t] = x[t+1] - x[t] for kernel index order (k=0,1)
    Tensor out = ad::conv1d(Tensor::constant({1, 5}, x), Tensor::constant({1, 1, 2}, w), Tensor(),
                            1, 0);
    REQUIRE(out.shape() == std::vector<int>{1, 4});
    CHECK(out.value()[0] == 3);
    CHECK(out.value()[1] == 5);
    CHECK(out.value()[2] == 7);
    CHECK(out.value()[3] == 9);
}

TEST_CASE("d(x^2)/dx at 3 is 6") {
    Tensor x = Tensor::variable({1}, ad::Array::Constant(1, 3.0));
    Tensor loss = ad::sum(ad::square(x));
    ad::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("relu subgradient is 0 at negatives") {
    ad::Array v(2);
    v << -1.0, 2.0;
    Tensor x = Tensor::variable({2}, v);
    Tensor loss = ad::sum(ad::relu(x));
    ad::backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("backward twice without reset doubles parameter gradients") {
    Tensor x = Tensor::variable({1}, ad::Array::Constant(1, 2.0));
    for (int pass = 0; pass < 2; ++pass) {
        Tensor loss = ad::sum(ad::square(x));
        ad::backward(loss);
    }
    CHECK(x.grad()[0] == doctest::Approx(8.0));
}

TEST_CASE("non-scalar backward is a contract error") {
    Tensor x = Tensor::variable({3}, ad::Array::Zero(3));
    Tensor y = ad::square(x);
    CHECK_THROWS_AS(ad::backward(y), ContractError);
}

TEST_CASE("every primitive matches central finite differences") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);

        {  // elementwise chain: mixes add/sub/mul/div/log/exp ops
            Tensor a = randn({8}, rng);
            Tensor b = randn({8}, rng);
            auto loss = [&] {
                Tensor pos_b = ad::add_scalar(ad::softplus(b), 0.5);   // > 0.5
                Tensor t = ad::div(a, pos_b);
                t = ad::mul(t, ad::sigmoid(a));
                t = ad::add(t, ad::exp(ad::scale(b, 0.3)));
                t = ad::sub(t, ad::gelu(a));
                t = ad::add(t, ad::log(ad::add_scalar(ad::square(a), 1.0)));
                return ad::sum(t);
            };
            CHECK(testutil::grad_check({a, b}, loss, 8, seed) < 1e-4);
        }
        {  // matmul + softmax + layer_norm + mean
            Tensor x = randn({4, 6}, rng);
            Tensor w = randn({6, 5}, rng, 0.5);
            Tensor gamma = randn({5}, rng, 0.2);
            Tensor beta = randn({5}, rng, 0.2);
            auto loss = [&] {
                Tensor h = ad::matmul(x, w);
                h = ad::layer_norm(h, gamma, beta);
                h = ad::softmax(h);
                return ad::mean(h * h);
            };
            CHECK(testutil::grad_check({x, w, gamma, beta}, loss, 12, seed) < 1e-4);
        }
        {  // conv1d strided + padded, with bias, plus upsample
            Tensor x = randn({2, 17}, rng);
            Tensor w = randn({3, 2, 5}, rng, 0.4);
            Tensor bias = randn({3}, rng, 0.2);
            auto loss = [&] {
                Tensor h = ad::conv1d(x, w, bias, 3, 2);
                h = ad::gelu(h);
                h = ad::upsample_nn(h, 2);
                return ad::sum(ad::square(h));
            };
            CHECK(testutil::grad_check({x, w, bias}, loss, 12, seed) < 1e-4);
        }
        {  // concat + slice + transpose + mean_axis0 + add_rowvec
            Tensor a = randn({3, 4}, rng);
            Tensor b = randn({2, 4}, rng);
            Tensor c = randn({4}, rng);
            auto loss = [&] {
                Tensor t = ad::concat({a, b}, 0);         // (5,4)
                t = ad::add_rowvec(t, c);
                Tensor s = ad::slice(t, 1, 1, 2);          // (5,2)
                s = ad::transpose(s);                       // (2,5)
                Tensor m = ad::mean_axis0(ad::transpose(s));  // (2)
                return ad::sum(ad::square(m)) + ad::mean(ad::square(t));
            };
            CHECK(testutil::grad_check({a, b, c}, loss, 10, seed) < 1e-4);
        }
        {  // pow_scalar away from zero
            Tensor a = randn({6}, rng);
            auto loss = [&] {
                Tensor p = ad::add_scalar(ad::softplus(a), 0.3);
                return ad::sum(ad::pow_scalar(p, 2.5));
            };
            CHECK(testutil::grad_check({a}, loss, 6, seed) < 1e-4);
        }
    }
}

TEST_CASE("attention: one token attends to itself") {
    Rng rng(3);
    Tensor v = randn({1, 4}, rng);
    Tensor out = ad::attention(v, v, v, 2);
    for (int i = 0; i < 4; ++i) CHECK(out.value()[i] == doctest::Approx(v.value()[i]));
}

TEST_CASE("attention: two identical keys share the weight equally") {
    ad::Array q(2);
    q << 1.0, -0.5;
    ad::Array k(4);
    k << 0.3, 0.7, 0.3, 0.7;  // two identical key rows
    ad::Array v(4);
    v << 1.0, 0.0, 0.0, 1.0;
    Tensor out = ad::attention(Tensor::constant({1, 2}, q), Tensor::constant({2, 2}, k),
                               Tensor::constant({2, 2}, v), 1);
    CHECK(out.value()[0] == doctest::Approx(0.5));
    CHECK(out.value()[1] == doctest::Approx(0.5));
}

TEST_CASE("attention gradient matches finite differences") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(100 + seed);
        Tensor q = randn({5, 6}, rng, 0.7);
        Tensor k = randn({5, 6}, rng, 0.7);
        Tensor v = randn({5, 6}, rng, 0.7);
        auto loss = [&] { return ad::sum(ad::square(ad::attention(q, k, v, 3))); };
        CHECK(testutil::grad_check({q, k, v}, loss, 10, seed) < 1e-4);
    }
}

TEST_CASE("attention rejects indivisible head counts") {
    Tensor q = Tensor::zeros({2, 6});
    CHECK_THROWS_AS(ad::attention(q, q, q, 4), ContractError);
}

TEST_CASE("adamw: zero gradient and zero decay leave parameters unchanged") {
    Tensor w = Tensor::variable({3}, ad::Array::Constant(3, 1.5));
    ad::AdamW opt({{"w", w}}, 0.0);
    w.grad() = ad::Array::Zero(3);
    opt.step(0.1);
    for (int i = 0; i < 3; ++i) CHECK(w.value()[i] == 1.5);
}

TEST_CASE("adamw: one step on w^2 descends") {
    Tensor w = Tensor::variable({1}, ad::Array::Constant(1, 1.0));
    ad::AdamW opt({{"w", w}}, 0.0);
    Tensor loss = ad::sum(ad::square(w));
    ad::backward(loss);
    opt.step(0.1);
    CHECK(w.value()[0] < 1.0);
}

TEST_CASE("adamw: 200 steps reach the quadratic minimizer") {
    // f(w) = sum (w - c)^2, minimizer c
    ad::Array c(2);
    c << 0.3, -1.2;
    Tensor target = Tensor::constant({2}, c);
    Tensor w = Tensor::variable({2}, ad::Array::Zero(2));
    ad::AdamW opt({{"w", w}}, 0.0);
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        Tensor loss = ad::sum(ad::square(w - target));
        ad::backward(loss);
        opt.step(0.05);
    }
    CHECK(std::abs(w.value()[0] - 0.3) < 1e-3);
    CHECK(std::abs(w.value()[1] + 1.2) < 1e-3);
}

TEST_CASE("adamw decay is decoupled") {
    // with zero gradient, decay shrinks weights by exactly lr*wd*w per step
    Tensor w = Tensor::variable({1}, ad::Array::Constant(1, 2.0));
    ad::AdamW opt({{"w", w}}, 0.01);
    w.grad() = ad::Array::Zero(1);
    opt.step(0.1);
    CHECK(w.value()[0] == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0));
}

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(ad::cosine_lr(0, 100, 0.5) == doctest::Approx(0.5));
    CHECK(ad::cosine_lr(100, 100, 0.5) == doctest::Approx(0.0));
    CHECK(ad::cosine_lr(50, 100, 0.5) == doctest::Approx(0.25));
}

TEST_CASE("forward values are bit-identical across runs") {
    auto run = [] {
        Rng rng(42);
        Tensor x = randn({4, 8}, rng);
        Tensor w = randn({8, 8}, rng);
        Tensor out = ad::softmax(ad::matmul(ad::gelu(x), w));
        return out.value();
    };
    ad::Array a = run(), b = run();
    for (int i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("no-grad mode skips graph construction") {
    Tensor x = Tensor::variable({2}, ad::Array::Constant(2, 1.0));
    ad::NoGradGuard ng;
    Tensor y = ad::square(x);
    CHECK_FALSE(y.requires_grad());
}
