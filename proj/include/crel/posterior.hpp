#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "crel/crel_core.hpp"
#include "crel/dataset.hpp"
#include "crel/estimating.hpp"
#include "crel/models.hpp"

namespace crel {

struct PosteriorConfig {
  int chain_length = 50000;
  int burn_in = 5000;
  Eigen::VectorXd proposal_scale;  // empty selects the automatic scale
  bool adapt = true;               // tune the scale during burn-in, then freeze
  std::uint64_t seed = 0;
  int thin = 1;
};

struct PosteriorSample {
  Eigen::MatrixXd draws;  // retained draws, one row per kept iteration
  double acceptance_rate = 0.0;
  Eigen::VectorXd ess;
  std::vector<double> log_post_trace;
  int inner_failures = 0;  // proposals with an undefined posterior value
  Eigen::VectorXd frozen_scale;
};

struct QuantileEstimate {
  double level = 0.0;
  double value = 0.0;
  double mc_se = 0.0;  // batch-means standard error
};

// -l_gamma(theta)/2 + xi(theta); -inf outside the hull or when the inner
// solve fails (failures are also counted, see log_posterior_failures).
double log_posterior(const Dataset& data, const EstimatingFunction& psi, const Prior& prior,
                     const Eigen::VectorXd& theta, double gamma);
long log_posterior_failures();

// Random-walk Metropolis over an arbitrary log density.  Deterministic given
// the config seed; scale adaptation stops at the end of burn-in so retained
// draws come from a fixed kernel.
PosteriorSample run_metropolis(const std::function<double(const Eigen::VectorXd&)>& log_post,
                               const Eigen::VectorXd& start, const Eigen::VectorXd& scale,
                               const PosteriorConfig& config);

PosteriorSample sample_posterior(const Dataset& data, const EstimatingFunction& psi,
                                 const Prior& prior, const PosteriorConfig& config, double gamma);

PosteriorSample sample_parametric_posterior(const Dataset& data, const ParametricModel& model,
                                            const Prior& prior, const PosteriorConfig& config);

QuantileEstimate posterior_quantile(const PosteriorSample& sample, int component, double alpha);
double posterior_cdf_at(const PosteriorSample& sample, int component, double t);

}  // namespace crel
