#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ecgad/errors.hpp"
#include "ecgad/losses.hpp"
#include "ecgad/rng.hpp"
#include "testutil.hpp"

using namespace ecgad;
using ad::Tensor;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<int>(v.size()));
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Tensor var(const Eigen::VectorXd& v) {
    return Tensor::variable({static_cast<int>(v.size())}, v.array());
}

}  // namespace

TEST_CASE("loss_res: perfect reconstruction with unit sigma is exactly zero") {
    Eigen::VectorXd x = vec({0.5, -1.0, 2.0});
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(3);
    CHECK(loss_res_value(x, x, ones, x, x, ones) == 0.0);
}

TEST_CASE("loss_res: single-point hand case 1/2 + ln 2") {
    const double v = loss_res_value(vec({1.0}), vec({0.0}), vec({2.0}), {}, {}, {});
    CHECK(v == doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-12));
    CHECK(v == doctest::Approx(1.19314718055994531).epsilon(1e-12));
}

TEST_CASE("loss_res at the optimal sigma equals 1 + ln e^2") {
    // d/dsigma [e^2/sigma + ln sigma] = 0  =>  sigma* = e^2
    const double e = 0.37;
    const double e2 = e * e;
    const double v = loss_res_value(vec({e}), vec({0.0}), vec({e2}), {}, {}, {});
    CHECK(v == doctest::Approx(1.0 + std::log(e2)).epsilon(1e-12));

    // and sigma* is a minimum: nearby sigmas are worse
    for (double delta : {-0.01, 0.01}) {
        const double v2 = loss_res_value(vec({e}), vec({0.0}), vec({e2 + delta}), {}, {}, {});
        CHECK(v2 > v);
    }
}

TEST_CASE("loss_res gradient sign flips at sigma = e^2") {
    const double e = 0.8;
    auto dloss_dsigma = [&](double sigma) {
        const double h = 1e-7;
        const double up = loss_res_value(vec({e}), vec({0.0}), vec({sigma + h}), {}, {}, {});
        const double dn = loss_res_value(vec({e}), vec({0.0}), vec({sigma - h}), {}, {}, {});
        return (up - dn) / (2 * h);
    };
    CHECK(dloss_dsigma(e * e - 0.05) < 0.0);
    CHECK(dloss_dsigma(e * e + 0.05) > 0.0);
}

TEST_CASE("loss_res rejects non-positive sigma") {
    CHECK_THROWS_AS(loss_res_value(vec({1.0}), vec({0.0}), vec({0.0}), {}, {}, {}), ContractError);
    CHECK_THROWS_AS(loss_res_value(vec({1.0}), vec({0.0}), vec({-1.0}), {}, {}, {}),
                    ContractError);
}

TEST_CASE("loss_trend hand cases") {
    CHECK(loss_trend_value(vec({1.0, 2.0}), vec({1.0, 2.0})) == 0.0);
    CHECK(loss_trend_value(vec({1.0, 2.0}), vec({0.0, 0.0})) == doctest::Approx(5.0));
    CHECK_THROWS_AS(loss_trend_value(vec({1.0}), vec({1.0, 2.0})), ContractError);

    Rng rng(1);
    Eigen::VectorXd a(40), b(40);
    for (int i = 0; i < 40; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    const Eigen::VectorXd d = a - b;
    CHECK(loss_trend_value(a, b) == doctest::Approx(d.dot(d)).epsilon(1e-12));
}

TEST_CASE("loss_pred hand cases and oracle") {
    CHECK(loss_pred_value(vec({1.0, 2.0}), vec({1.0, 2.0})) == 0.0);
    CHECK(loss_pred_value(vec({0.0, 2.0}), vec({0.0, 0.0})) == doctest::Approx(2.0));

    Rng rng(2);
    Eigen::VectorXd t(7), that(7);
    for (int i = 0; i < 7; ++i) {
        t[i] = rng.normal();
        that[i] = rng.normal();
    }
    double acc = 0.0;
    for (int i = 0; i < 7; ++i) acc += (t[i] - that[i]) * (t[i] - that[i]);
    CHECK(loss_pred_value(t, that) == doctest::Approx(acc / 7.0).epsilon(1e-12));

    CHECK_THROWS_AS(loss_pred_value(Eigen::VectorXd(), Eigen::VectorXd()), ContractError);
}

TEST_CASE("loss_ad composition and linearity in alpha") {
    ad::NoGradGuard ng;
    Tensor res = Tensor::scalar(2.0), trend = Tensor::scalar(3.0), pred = Tensor::scalar(5.0);
    CHECK(loss_ad(res, trend, pred, 0.0, 0.0).item() == 2.0);
    CHECK(loss_ad(res, trend, pred, 1.0, 1.0).item() == 10.0);  // plain sum at the defaults
    const double at1 = loss_ad(res, trend, pred, 1.0, 0.5).item();
    const double at2 = loss_ad(res, trend, pred, 2.0, 0.5).item();
    CHECK(at2 - at1 == doctest::Approx(3.0));  // slope = trend term
}

TEST_CASE("loss_cls with zero gammas and zero margin is binary cross-entropy") {
    AsymmetricLossConfig cfg;
    cfg.gamma_pos = 0.0;
    cfg.gamma_neg = 0.0;
    cfg.tau = 0.0;
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 6;
        Eigen::VectorXd y(n), yhat(n);
        for (int i = 0; i < n; ++i) {
            y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
            yhat[i] = rng.uniform(0.02, 0.98);
        }
        double bce = 0.0;
        for (int i = 0; i < n; ++i)
            bce += -y[i] * std::log(yhat[i]) - (1.0 - y[i]) * std::log(1.0 - yhat[i]);
        CHECK(std::abs(loss_cls_value(y, yhat, cfg) - bce) < 1e-10);
    }
}

TEST_CASE("loss_cls: easy negative below the margin contributes zero") {
    AsymmetricLossConfig cfg;
    cfg.gamma_pos = 0.0;
    cfg.gamma_neg = 4.0;
    cfg.tau = 0.05;
    CHECK(loss_cls_value(vec({0.0}), vec({0.03}), cfg) == 0.0);
    // and with gamma_neg = 0 too (log(1 - 0) = 0)
    cfg.gamma_neg = 0.0;
    cfg.gamma_pos = 0.0;
    CHECK(loss_cls_value(vec({0.0}), vec({0.03}), cfg) == 0.0);
}

TEST_CASE("loss_cls: positive focusing hand case") {
    AsymmetricLossConfig cfg;
    cfg.gamma_pos = 1.0;
    cfg.gamma_neg = 1.0;
    cfg.tau = 0.0;
    const double v = loss_cls_value(vec({1.0}), vec({0.5}), cfg);
    CHECK(v == doctest::Approx(0.5 * -std::log(0.5)).epsilon(1e-12));
    CHECK(v == doctest::Approx(0.34657359).epsilon(1e-6));
}

TEST_CASE("loss_cls monotonicity") {
    AsymmetricLossConfig cfg;  // defaults: gp=0, gn=4, tau=0.05
    // positive label: loss strictly decreases as yhat rises
    double prev = 1e300;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double v = loss_cls_value(vec({1.0}), vec({p}), cfg);
        CHECK(v < prev);
        prev = v;
    }
    // negative label above the margin: loss strictly increases
    prev = -1.0;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double v = loss_cls_value(vec({0.0}), vec({p}), cfg);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("loss_cls rejects predictions outside (0,1)") {
    AsymmetricLossConfig cfg;
    CHECK_THROWS_AS(loss_cls_value(vec({1.0}), vec({0.0}), cfg), ContractError);
    CHECK_THROWS_AS(loss_cls_value(vec({1.0}), vec({1.0}), cfg), ContractError);
}

TEST_CASE("gamma ordering is enforced") {
    AsymmetricLossConfig cfg;
    cfg.gamma_pos = 3.0;
    cfg.gamma_neg = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("all losses match finite differences") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(40 + seed);
        const int n = 12;

        {  // loss_res through x_hat and sigma
            Eigen::VectorXd x(n);
            for (int i = 0; i < n; ++i) x[i] = rng.normal();
            Tensor xhat = var(Eigen::VectorXd::Zero(n));
            for (int i = 0; i < n; ++i) xhat.value()[i] = rng.normal();
            Tensor sigma_raw = var(Eigen::VectorXd::Zero(n));
            for (int i = 0; i < n; ++i) sigma_raw.value()[i] = rng.normal();
            Tensor x_c = Tensor::constant({n}, x.array());
            auto loss = [&] {
                Tensor sigma = ad::add_scalar(ad::softplus(sigma_raw), 1e-6);
                return loss_res(x_c, xhat, sigma, Tensor(), Tensor(), Tensor());
            };
            CHECK(testutil::grad_check({xhat, sigma_raw}, loss, 10, seed) < 1e-4);
        }
        {  // loss_trend + loss_pred + composite through both branches
            Eigen::VectorXd x(n), t(7);
            for (int i = 0; i < n; ++i) x[i] = rng.normal();
            for (int i = 0; i < 7; ++i) t[i] = rng.normal();
            Tensor xhat_t = var(Eigen::VectorXd::Zero(n));
            for (int i = 0; i < n; ++i) xhat_t.value()[i] = rng.normal();
            Tensor that = var(Eigen::VectorXd::Zero(7));
            for (int i = 0; i < 7; ++i) that.value()[i] = rng.normal();
            Tensor x_c = Tensor::constant({n}, x.array());
            Tensor t_c = Tensor::constant({7}, t.array());
            auto loss = [&] {
                Tensor res = Tensor::scalar(0.0);
                return loss_ad(res, loss_trend(x_c, xhat_t), loss_pred(t_c, that), 0.7, 1.3);
            };
            CHECK(testutil::grad_check({xhat_t, that}, loss, 10, seed) < 1e-4);
        }
        {  // loss_cls through logits; probabilities kept away from the tau kink
            AsymmetricLossConfig cfg;
            Eigen::VectorXd y(n);
            for (int i = 0; i < n; ++i) y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
            Tensor logits = var(Eigen::VectorXd::Zero(n));
            for (int i = 0; i < n; ++i) {
                double p;
                do {
                    p = rng.uniform(0.02, 0.98);
                } while (std::abs(p - cfg.tau) < 5e-3);
                logits.value()[i] = std::log(p / (1.0 - p));
            }
            Tensor y_c = Tensor::constant({n}, y.array());
            auto loss = [&] { return loss_cls(y_c, ad::sigmoid(logits), cfg); };
            CHECK(testutil::grad_check({logits}, loss, 12, seed) < 1e-4);
        }
    }
}
