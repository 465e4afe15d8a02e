#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>

#include "crel/dataset.hpp"
#include "crel/rng.hpp"
#include "crel/tensor.hpp"

namespace crel {

// Parametric model oracle: per-observation log density with score and
// information tensors.  info2/info3 are the expected (Fisher) versions;
// observed_* average the actual derivatives over a dataset and fall back
// to the expected forms where the log density is not smooth enough.
class ParametricModel {
 public:
  virtual ~ParametricModel() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual double log_density(const Eigen::VectorXd& row, const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd score(const Eigen::VectorXd& row, const Eigen::VectorXd& theta) const;
  virtual Eigen::MatrixXd score_jacobian(const Eigen::VectorXd& row,
                                         const Eigen::VectorXd& theta) const;
  virtual bool smooth_score() const { return true; }

  virtual Eigen::MatrixXd info2(const Eigen::VectorXd& theta) const = 0;
  virtual Tensor3 info3(const Eigen::VectorXd& theta) const;

  // -(1/n) sum_i d^2 log f(x_i; theta) / dtheta^2
  virtual Eigen::MatrixXd observed_info(const Dataset& data, const Eigen::VectorXd& theta) const;
  // -(1/n) sum_i d^3 log f(x_i; theta) / dtheta^3
  virtual Tensor3 observed_info3(const Dataset& data, const Eigen::VectorXd& theta) const;

  virtual Eigen::VectorXd mle(const Dataset& data) const;

  // density of a single univariate observation, for quadrature
  double density1(double x, double theta) const;
};

using ModelPtr = std::shared_ptr<const ParametricModel>;

ModelPtr laplace_model(double scale = 1.0);       // location parameter, fixed scale
ModelPtr normal_model(double sd = 1.0);           // mean parameter, fixed sd
ModelPtr exponential_model();                     // mean parameter
ModelPtr poisson_regression_model(int n_covariates);  // rows (y, x1..xd), log link

// Log-prior with derivative access; xi = log pi up to an additive constant.
class Prior {
 public:
  virtual ~Prior() = default;
  virtual int dim() const = 0;
  virtual double xi(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd grad_xi(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::MatrixXd hess_xi(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd mode() const = 0;
  virtual std::string describe() const = 0;
};

using PriorPtr = std::shared_ptr<const Prior>;

PriorPtr flat_prior(int dim);
PriorPtr normal_prior(Eigen::VectorXd mean, Eigen::VectorXd sd);
PriorPtr normal_prior(double mean, double sd);

// One-parameter exponential family in mean parametrization; x = U(y) makes
// the likelihood score factor into the mean estimating function x - theta.
struct ExponentialFamilyModel {
  std::string name;
  std::function<double(double)> sufficient_stat;   // U(y)
  std::function<double(double)> natural_param;     // vartheta(theta)
  std::function<double(double)> log_partition;     // Gamma(vartheta)
  std::function<double(double)> mean_param;        // Gamma'(vartheta)
  std::function<double(RngStream&, double)> sample_y;  // y given mean theta
};

ExponentialFamilyModel expfam_exponential();
ExponentialFamilyModel expfam_normal();   // unit variance
ExponentialFamilyModel expfam_poisson();
ExponentialFamilyModel expfam_by_name(const std::string& name);

struct ContaminationConfig {
  double clean_fraction = 0.9;
  double outlier_mean = 42.5;
  double outlier_spread = 0.01;
  bool spread_is_variance = true;  // paper leaves variance-vs-sd ambiguous
};

Dataset generate_laplace(int n, double theta, std::uint64_t seed);
Dataset generate_normal(int n, double mean, double sd, std::uint64_t seed);
Dataset generate_exponential(int n, double mean, std::uint64_t seed);

// Poisson regression responses with a contaminated share replaced by
// rounded Normal(outlier_mean, spread) draws; design is (1, z1, z2) with
// z1, z2 empirically standardized.
Dataset generate_contaminated_poisson(int n, const Eigen::Vector3d& beta,
                                      const ContaminationConfig& config, std::uint64_t seed);

}  // namespace crel
