#pragma once

#include <Eigen/Dense>
#include <vector>

#include "crel/dataset.hpp"
#include "crel/estimating.hpp"

namespace crel {

struct LambdaSolution {
  double gamma = 0.0;
  Eigen::VectorXd lambda;
  double residual_norm = 0.0;  // ||sum_i w_i psi_i||_inf at the solution
  int iterations = 0;
  bool in_domain = true;  // 1 + lambda' psi_i > 0 everywhere (>= 1/n for gamma = 0)
};

struct CRWeights {
  Eigen::VectorXd weights;
  double gamma = 0.0;
};

struct GELRValue {
  double value = 0.0;  // +inf sentinel when hull_ok is false
  bool hull_ok = true;
};

// True iff 0 is interior to the convex hull of the psi rows (all-zero rows
// count as degenerate-feasible).  d = 1 reduces to a sign change; d > 1 runs
// a phase-1 simplex for a strictly positive combination summing to zero.
bool convex_hull_check(const Eigen::MatrixXd& psi);

// Inner dual solve for lambda_gamma.  gamma within 1e-6 of 0 or -1 is routed
// to the closed EL/ET branches.  Throws HullError when the hull check fails
// and ConvergenceError after 200 damped Newton steps.
LambdaSolution solve_lambda(const Eigen::MatrixXd& psi, double gamma);

CRWeights weights_from_lambda(const Eigen::MatrixXd& psi, const LambdaSolution& solution);

GELRValue gelr_from_matrix(const Eigen::MatrixXd& psi, double gamma);
GELRValue gelr(const Dataset& data, const EstimatingFunction& psi,
               const Eigen::VectorXd& theta, double gamma);

// Two-group closed form for the median score; +inf sentinel when F_n(theta)
// is 0 or 1.
GELRValue gelr_median_closed_form(const Dataset& data, double theta);

struct ProfilePoint {
  double theta = 0.0;
  double gelr = 0.0;
  double parametric = 0.0;
  bool has_parametric = false;
};

// Per-grid-point ratio values; with laplace_parametric also the Laplace
// log-likelihood-ratio curve 2 sum(|x_i - theta| - |x_i - median|).
std::vector<ProfilePoint> profile_curve(const Dataset& data, const EstimatingFunction& psi,
                                        const std::vector<double>& grid, double gamma,
                                        bool laplace_parametric = false);

}  // namespace crel
