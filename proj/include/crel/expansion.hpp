#pragma once

#include <Eigen/Dense>
#include <utility>

#include "crel/dataset.hpp"
#include "crel/estimating.hpp"
#include "crel/models.hpp"
#include "crel/tensor.hpp"

namespace crel {

// Sample moment tensors of the estimating function at a fixed theta.
// omega is the cross-product matrix, v1/v2 the first and second derivative
// averages (sign-flipped), K = V' Omega^-1 V the empirical information and
// tau the lower Cholesky factor of K^-1.
struct MomentTensors {
  int d = 0;
  int n = 0;
  Eigen::MatrixXd omega;
  Eigen::MatrixXd omega_inv;
  Eigen::MatrixXd v1;        // (k, r)
  Tensor3 v2;                // (k, r, s)
  Tensor3 omega_deriv;       // (k, l, t) = d (Omega^-1)_{kl} / d theta_t
  Tensor3 alpha3;
  Tensor4 alpha4;
  Eigen::MatrixXd K;
  Eigen::MatrixXd nu_inv;    // K^-1
  Eigen::MatrixXd tau;       // lower triangular, tau tau' = K^-1
};

struct ExpansionCoeffs {
  Tensor3 G;
  Tensor4 J;
  double h1 = 0.0;
  double h2 = 0.0;
};

// quartic-term coefficients; (3/4, 1/4) at gamma = -1, else ((4-g^2)/4, (2-g^2)/4)
std::pair<double, double> h_coeffs(double gamma);

MomentTensors compute_tensors(const Dataset& data, const EstimatingFunction& psi,
                              const Eigen::VectorXd& theta);

// Ratio-statistic approximation from sample moments, on the unnormalized
// scale.  order 1 is the quadratic form n psi_bar' Omega^-1 psi_bar; order 2
// adds the cubic alpha term; order 3 adds the h1/h2 quartic terms.
double gelr_expansion(const MomentTensors& tensors, const Eigen::VectorXd& psi_bar,
                      double gamma, int order);

Tensor3 G_tensor(const MomentTensors& tensors);
Tensor4 J_tensor(const MomentTensors& tensors, double gamma);
ExpansionCoeffs expansion_coeffs(const MomentTensors& tensors, double gamma);

// theta_hat_1 + Phi^-1(alpha) sqrt(nu^11 / n)
double quantile_expansion_first(const Eigen::VectorXd& theta_hat, const MomentTensors& tensors,
                                double alpha, int n);

// Solves the calibrated-pivot equation for the posterior quantile.  The
// quadratic coefficient reuses the same tau-G contraction as the constant
// shift; both enter the calibration as displayed.  Throws ExpansionError when
// the pivot is not monotone on the search bracket.
double quantile_expansion_higher(const Eigen::VectorXd& theta_hat, const MomentTensors& tensors,
                                 const ExpansionCoeffs& coeffs, const Prior& prior, double alpha,
                                 int n, double gamma);

// standardized pivot sqrt(n) (theta01 - theta_hat_1) / sqrt(nu^11)
double z_n(double theta01, const Eigen::VectorXd& theta_hat, const MomentTensors& tensors, int n);

}  // namespace crel
