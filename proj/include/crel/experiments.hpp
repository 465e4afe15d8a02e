#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "crel/dataset.hpp"
#include "crel/estimating.hpp"
#include "crel/models.hpp"
#include "crel/posterior.hpp"

namespace crel {

struct BiasReport {
  double alpha = 0.0;
  double bias_coverage = 0.0;
  double bias_quantile = 0.0;
  double r_term = 0.0;
  double rstar_term = 0.0;
  double eff_inv = 0.0;
};

struct CoverageCell {
  std::string psi;
  double gamma = 0.0;
  int component = 0;  // parameter index (regression studies)
  double alpha = 0.0;
  double value = 0.0;
  int reps_used = 0;
};

struct CoverageResult {
  std::vector<CoverageCell> cells;
  std::uint64_t seed = 0;
  int M = 0;
  int n = 0;
  std::vector<double> gammas;
  std::vector<std::string> psis;
  std::vector<double> alphas;
  std::string metric;
  int failed_reps = 0;

  const CoverageCell& cell(const std::string& psi, double gamma, double alpha,
                           int component = 0) const;
};

// Monte Carlo / chain-length knobs for the repeated-sampling studies.
struct StudySettings {
  int chain_length = 16000;
  int burn_in = 3000;
  int ref_chain_mult = 4;  // reference posterior runs this many times longer
  int threads = 0;         // 0 = hardware concurrency
};

// asy.var(M-estimator) / asy.var(ML) for a scalar parameter; closed forms
// for the mean/median/ML score, quadrature for Huber and biweight.
double asymptotic_efficiency_inv(const EstimatingFunction& psi, const ParametricModel& model);

// phi(z_a) z_a (sqrt(eff_inv) - 1); requires eff_inv >= 1
double bias_coverage(double alpha, double eff_inv);
// z_a sqrt(var_ml) (sqrt(eff_inv) - 1)
double bias_quantile(double alpha, double eff_inv, double var_ml);

double r_term(const Dataset& data, const EstimatingFunction& psi, const ParametricModel& model,
              const Prior& prior, double alpha);
// orthogonal-parameter form including the prior-gradient and cubic corrections
double rstar_term(const Dataset& data, const EstimatingFunction& psi,
                  const ParametricModel& model, const Prior& prior, double alpha);

BiasReport bias_report(const Dataset& data, const EstimatingFunction& psi,
                       const ParametricModel& model, const Prior& prior, double alpha,
                       double var_ml);

// Location study: theta ~ N(0,1), x | theta ~ Laplace(theta, 1).  Per cell
// the replication-median of rho(q_gel(alpha)) - alpha, where rho is the CDF
// of the parametric Laplace posterior on the same data.
CoverageResult coverage_simulation(int M, int n, const std::vector<double>& gammas,
                                   const std::vector<std::string>& psi_names,
                                   const std::vector<double>& alphas, std::uint64_t seed,
                                   const StudySettings& settings);

// Contaminated Poisson regression study: per cell the replication-median of
// |q_gel - q_reference| for beta_1 and beta_2.  The reference posterior
// defaults to the Poisson posterior on the clean counterpart of the same
// draw; conditioning it on the contaminated data instead makes the corrupted
// classical fit trivially closest and inverts the robust-vs-classical
// ordering, so that mode is opt-in.
CoverageResult glm_accuracy_simulation(int M, int n, const std::vector<double>& gammas,
                                       std::uint64_t seed, const StudySettings& settings,
                                       bool clean_reference = true, double huber_c = 1.6,
                                       const ContaminationConfig& config = {});

struct VarianceStudyResult {
  std::vector<double> gammas;
  std::vector<double> variances;          // per-gamma variance of the quantile
  Eigen::MatrixXd quantiles;              // reps x gammas, paired by dataset
  std::uint64_t seed = 0;
  int M = 0, n = 0;
  double alpha = 0.0;
  std::string family;

  // mean and standard error of the per-rep squared-deviation difference
  // between two gamma columns (paired comparison of variances)
  void paired_variance_diff(int col_a, int col_b, double* diff, double* se) const;
};

VarianceStudyResult theorem5_variance_study(const std::string& family, int n, int M,
                                            const std::vector<double>& gammas, double alpha,
                                            std::uint64_t seed, const StudySettings& settings);

// line-oriented rendering with a provenance header
std::string coverage_table_csv(const CoverageResult& result);
std::string coverage_table_text(const CoverageResult& result);

}  // namespace crel
