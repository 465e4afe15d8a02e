#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "crel/dataset.hpp"
#include "crel/models.hpp"

namespace crel {

// Estimating function psi(x_i, theta) in R^d with derivative access.
// Implementations are immutable and safe to share across threads.
class EstimatingFunction {
 public:
  virtual ~EstimatingFunction() = default;

  // 0 means the dimension is taken from the data (GLM families)
  virtual int dim() const = 0;
  virtual bool smooth() const = 0;
  virtual std::string label() const = 0;
  virtual Eigen::VectorXd evaluate(const Dataset& data, int i,
                                   const Eigen::VectorXd& theta) const = 0;

  // d psi / d theta for observation i; numeric central differences unless an
  // analytic form is provided.  Non-smooth families throw NonSmoothError.
  virtual Eigen::MatrixXd jacobian(const Dataset& data, int i,
                                   const Eigen::VectorXd& theta) const;
  virtual bool has_analytic_jacobian() const { return false; }

  // n x d matrix of psi values; the batch entry point used by the solvers
  virtual Eigen::MatrixXd psi_matrix(const Dataset& data, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd mean_value(const Dataset& data, const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd mean_jacobian(const Dataset& data, const Eigen::VectorXd& theta) const;
};

using PsiPtr = std::shared_ptr<const EstimatingFunction>;

PsiPtr psi_mean();
PsiPtr psi_median();
PsiPtr psi_huber(double c);
PsiPtr psi_tukey(double k);
PsiPtr psi_glm(const std::string& link = "log", const std::string& variance = "poisson");
PsiPtr psi_glm_robust(double c, const std::string& link = "log",
                      const std::string& variance = "poisson");
PsiPtr psi_ml_score(ModelPtr model);

// by-name factory for CLI/config use; tuning = NaN picks the family default
PsiPtr make_psi(const std::string& name, double tuning);

struct MEstimate {
  Eigen::VectorXd theta_hat;
  double residual_norm = 0.0;  // ||sum_i psi||_inf at the root
  int iterations = 0;
};

MEstimate solve_m_estimate(const EstimatingFunction& psi, const Dataset& data,
                           Eigen::VectorXd theta0);

// E[psi_c((Y - mu)/sqrt(mu))] under Poisson(mu), by exact finite summation
// over a window whose truncated tail mass is far below 1e-12.
class PoissonHuberExpectation {
 public:
  explicit PoissonHuberExpectation(double c);
  double exact(double mu) const;
  double value(double mu) const { return exact(mu); }
  static std::shared_ptr<const PoissonHuberExpectation> shared(double c);

 private:
  double c_;
};

}  // namespace crel
