#pragma once

#include <Eigen/Core>

#include "ecgad/autodiff.hpp"

namespace ecgad {

// Asymmetric multi-label loss settings. gamma_neg >= gamma_pos so easy
// negatives are down-weighted harder than positives.
struct AsymmetricLossConfig {
    double gamma_pos = 0.0;
    double gamma_neg = 4.0;
    double tau = 0.05;  // probability margin in [0,1)

    void validate() const;
};

// Uncertainty-aware restoration loss: sum over global and local points of
// (x - x_hat)^2 / sigma + log sigma. Pass empty local tensors for the
// global-only configuration. Sigmas must be strictly positive.
ad::Tensor loss_res(const ad::Tensor& x_g, const ad::Tensor& xhat_g, const ad::Tensor& sigma_g,
                    const ad::Tensor& x_l, const ad::Tensor& xhat_l, const ad::Tensor& sigma_l);

// Squared Euclidean distance between the original global signal and the
// trend-path reconstruction.
ad::Tensor loss_trend(const ad::Tensor& x_g, const ad::Tensor& xhat_t);

// Mean squared error over the normalized attribute vector.
ad::Tensor loss_pred(const ad::Tensor& t_attr, const ad::Tensor& that_attr);

// Composite objective: res + alpha * trend + beta * pred.
ad::Tensor loss_ad(const ad::Tensor& res, const ad::Tensor& trend, const ad::Tensor& pred,
                   double alpha, double beta);

// Asymmetric classification loss over multi-hot labels; y in {0,1}^n,
// y_hat in (0,1)^n. The shifted probability max(y_hat - tau, 0) is used in
// both the focusing weight and the log of the negative term, which therefore
// vanishes for easy negatives below the margin.
ad::Tensor loss_cls(const ad::Tensor& y, const ad::Tensor& y_hat, const AsymmetricLossConfig& cfg);

// Plain-number convenience wrappers (evaluate the same graphs under NoGrad).
double loss_res_value(const Eigen::VectorXd& x_g, const Eigen::VectorXd& xhat_g,
                      const Eigen::VectorXd& sigma_g, const Eigen::VectorXd& x_l,
                      const Eigen::VectorXd& xhat_l, const Eigen::VectorXd& sigma_l);
double loss_trend_value(const Eigen::VectorXd& x_g, const Eigen::VectorXd& xhat_t);
double loss_pred_value(const Eigen::VectorXd& t, const Eigen::VectorXd& that);
double loss_cls_value(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat,
                      const AsymmetricLossConfig& cfg);

}  // namespace ecgad
