#include "ecgad/losses.hpp"

#include "ecgad/errors.hpp"

namespace ecgad {

using ad::Tensor;

void AsymmetricLossConfig::validate() const {
    require(gamma_pos >= 0.0 && gamma_neg >= 0.0, "asymmetric loss: gammas must be >= 0");
    require(gamma_neg >= gamma_pos, "asymmetric loss: gamma_neg must be >= gamma_pos");
    require(tau >= 0.0 && tau < 1.0, "asymmetric loss: tau must be in [0,1)");
}

namespace {

Tensor branch_res(const Tensor& x, const Tensor& xhat, const Tensor& sigma) {
    require(x.shape() == xhat.shape() && x.shape() == sigma.shape(),
            "loss_res: mismatched lengths");
    require((sigma.value() > 0.0).all(), "loss_res: sigma must be strictly positive");
    return ad::sum(ad::square(x - xhat) / sigma + ad::log(sigma));
}

Tensor as_const(const Eigen::VectorXd& v) {
    return Tensor::constant({static_cast<int>(v.size())}, v.array());
}

}  // namespace

Tensor loss_res(const Tensor& x_g, const Tensor& xhat_g, const Tensor& sigma_g, const Tensor& x_l,
                const Tensor& xhat_l, const Tensor& sigma_l) {
    Tensor total = branch_res(x_g, xhat_g, sigma_g);
    const bool has_local = x_l.defined() && x_l.numel() > 0;
    if (has_local) total = total + branch_res(x_l, xhat_l, sigma_l);
    return total;
}

Tensor loss_trend(const Tensor& x_g, const Tensor& xhat_t) {
    require(x_g.shape() == xhat_t.shape(), "loss_trend: length mismatch");
    return ad::sum(ad::square(x_g - xhat_t));
}

Tensor loss_pred(const Tensor& t_attr, const Tensor& that_attr) {
    require(t_attr.numel() > 0, "loss_pred: empty attribute vector");
    require(t_attr.shape() == that_attr.shape(), "loss_pred: length mismatch");
    return ad::mean(ad::square(t_attr - that_attr));
}

Tensor loss_ad(const Tensor& res, const Tensor& trend, const Tensor& pred, double alpha,
               double beta) {
    require(alpha >= 0.0 && beta >= 0.0, "loss_ad: trade-offs must be >= 0");
    Tensor total = res;
    if (trend.defined()) total = total + ad::scale(trend, alpha);
    if (pred.defined()) total = total + ad::scale(pred, beta);
    return total;
}

Tensor loss_cls(const Tensor& y, const Tensor& y_hat, const AsymmetricLossConfig& cfg) {
    cfg.validate();
    require(y.shape() == y_hat.shape(), "loss_cls: length mismatch");
    require((y_hat.value() > 0.0).all() && (y_hat.value() < 1.0).all(),
            "loss_cls: predictions must lie strictly inside (0,1)");

    Tensor one = Tensor::full(y.shape(), 1.0);
    // positive term: -y (1 - yhat)^{g+} log yhat
    Tensor pos = ad::neg(y * ad::pow_scalar(one - y_hat, cfg.gamma_pos) * ad::log(y_hat));
    // negative term with the shifted probability m = max(yhat - tau, 0):
    // -(1 - y) m^{g-} log(1 - m); both factors vanish when yhat <= tau.
    Tensor shifted = ad::relu(ad::add_scalar(y_hat, -cfg.tau));
    Tensor neg =
        ad::neg((one - y) * ad::pow_scalar(shifted, cfg.gamma_neg) * ad::log(one - shifted));
    return ad::sum(pos + neg);
}

double loss_res_value(const Eigen::VectorXd& x_g, const Eigen::VectorXd& xhat_g,
                      const Eigen::VectorXd& sigma_g, const Eigen::VectorXd& x_l,
                      const Eigen::VectorXd& xhat_l, const Eigen::VectorXd& sigma_l) {
    ad::NoGradGuard ng;
    return loss_res(as_const(x_g), as_const(xhat_g), as_const(sigma_g), as_const(x_l),
                    as_const(xhat_l), as_const(sigma_l))
        .item();
}

double loss_trend_value(const Eigen::VectorXd& x_g, const Eigen::VectorXd& xhat_t) {
    ad::NoGradGuard ng;
    return loss_trend(as_const(x_g), as_const(xhat_t)).item();
}

double loss_pred_value(const Eigen::VectorXd& t, const Eigen::VectorXd& that) {
    ad::NoGradGuard ng;
    return loss_pred(as_const(t), as_const(that)).item();
}

double loss_cls_value(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat,
                      const AsymmetricLossConfig& cfg) {
    ad::NoGradGuard ng;
    return loss_cls(as_const(y), as_const(y_hat), cfg).item();
}

}  // namespace ecgad
