#include "crel/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>

#include "crel/errors.hpp"
#include "crel/expansion.hpp"
#include "crel/parallel.hpp"
#include "crel/rng.hpp"
#include "crel/stats.hpp"

namespace crel {

namespace {

std::uint64_t derive_seed(std::uint64_t master, int rep, int slot) {
  return mix64(master + UINT64_C(0x9E3779B97F4A7C15) *
                             (static_cast<std::uint64_t>(rep) * 64 + slot + 1));
}

Dataset one_row(double x) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = x;
  return Dataset::from_matrix(std::move(m));
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

const CoverageCell& CoverageResult::cell(const std::string& psi, double gamma, double alpha,
                                         int component) const {
  for (const CoverageCell& c : cells) {
    if (c.psi == psi && c.component == component && std::fabs(c.gamma - gamma) < 1e-12 &&
        std::fabs(c.alpha - alpha) < 1e-12)
      return c;
  }
  throw DomainError("CoverageResult::cell: no such cell");
}

double asymptotic_efficiency_inv(const EstimatingFunction& psi, const ParametricModel& model) {
  if (model.dim() != 1)
    throw DomainError("asymptotic_efficiency_inv: scalar parameter required");
  Eigen::VectorXd theta(1);
  theta[0] = (model.name() == "exponential") ? 1.0 : 0.0;
  const double fisher = model.info2(theta)(0, 0);

  if (psi.label() == "ml-score:" + model.name()) return 1.0;

  if (psi.label() == "median") {
    double f0 = model.density1(theta[0], theta[0]);
    if (f0 <= 0.0) throw QuadratureError("efficiency: density vanishes at the centre");
    return (0.25 / (f0 * f0)) * fisher;
  }

  double lo = (model.name() == "exponential") ? 0.0 : theta[0] - 60.0;
  double hi = (model.name() == "exponential") ? 60.0 : theta[0] + 60.0;

  auto integrate = [&](const std::function<double(double)>& g) {
    // panelled adaptive quadrature keeps kinks of the score harmless
    const int panels = 64;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
      double a = lo + (hi - lo) * p / panels;
      double b = lo + (hi - lo) * (p + 1) / panels;
      total += stats::adaptive_simpson(g, a, b, 1e-13);
    }
    return total;
  };

  double omega = integrate([&](double x) {
    double v = psi.evaluate(one_row(x), 0, theta)[0];
    return v * v * model.density1(x, theta[0]);
  });
  double v_slope = integrate([&](double x) {
    return -psi.jacobian(one_row(x), 0, theta)(0, 0) * model.density1(x, theta[0]);
  });
  if (!std::isfinite(omega) || !std::isfinite(v_slope) || std::fabs(v_slope) < 1e-12)
    throw QuadratureError("efficiency: sandwich moments not integrable");
  return (omega / (v_slope * v_slope)) * fisher;
}

double bias_coverage(double alpha, double eff_inv) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("bias_coverage: alpha outside (0,1)");
  if (eff_inv < 1.0) throw DomainError("bias_coverage: efficiency inverse below 1");
  double z = stats::normal_quantile(alpha);
  return stats::normal_pdf(z) * z * (std::sqrt(eff_inv) - 1.0);
}

double bias_quantile(double alpha, double eff_inv, double var_ml) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("bias_quantile: alpha outside (0,1)");
  if (eff_inv < 1.0) throw DomainError("bias_quantile: efficiency inverse below 1");
  if (!(var_ml > 0.0)) throw DomainError("bias_quantile: var_ml must be positive");
  return stats::normal_quantile(alpha) * std::sqrt(var_ml) * (std::sqrt(eff_inv) - 1.0);
}

double r_term(const Dataset& data, const EstimatingFunction& psi, const ParametricModel& model,
              const Prior& prior, double alpha) {
  (void)prior;
  const int n = data.n();
  Eigen::VectorXd theta_ml = model.mle(data);
  Eigen::VectorXd theta_m = solve_m_estimate(psi, data, theta_ml).theta_hat;
  Eigen::MatrixXd L = model.observed_info(data, theta_ml);
  Eigen::MatrixXd L_inv = L.inverse();
  MomentTensors t = compute_tensors(data, psi, theta_m);
  double z = stats::normal_quantile(alpha);
  double l11 = L_inv(0, 0);
  double nu11 = t.nu_inv(0, 0);
  return std::sqrt(static_cast<double>(n)) * (theta_m[0] - theta_ml[0]) / std::sqrt(l11) +
         (std::sqrt(nu11 / l11) - 1.0) * z;
}

double rstar_term(const Dataset& data, const EstimatingFunction& psi,
                  const ParametricModel& model, const Prior& prior, double alpha) {
  const int n = data.n();
  Eigen::VectorXd theta_ml = model.mle(data);
  Eigen::VectorXd theta_m = solve_m_estimate(psi, data, theta_ml).theta_hat;
  double L11 = model.observed_info(data, theta_ml)(0, 0);
  double L111 = model.observed_info3(data, theta_ml)(0, 0, 0);
  MomentTensors t = compute_tensors(data, psi, theta_m);
  double nu11 = t.K(0, 0);
  double G111 = G_tensor(t)(0, 0, 0);
  double xi_m = prior.grad_xi(theta_m)[0];
  double xi_ml = prior.grad_xi(theta_ml)[0];
  double z = stats::normal_quantile(alpha);
  double ratio = L11 / nu11;
  double sqrt_n = std::sqrt(static_cast<double>(n));
  return sqrt_n * std::sqrt(L11) * (theta_m[0] - theta_ml[0]) +
         (std::sqrt(ratio) - 1.0) * z +
         (xi_m * ratio - xi_ml) / (sqrt_n * std::sqrt(L11)) +
         (G111 * ratio * ratio - L111 / 3.0) * (1.0 + 0.5 * z * z) / (sqrt_n * L11);
}

BiasReport bias_report(const Dataset& data, const EstimatingFunction& psi,
                       const ParametricModel& model, const Prior& prior, double alpha,
                       double var_ml) {
  BiasReport r;
  r.alpha = alpha;
  r.eff_inv = asymptotic_efficiency_inv(psi, model);
  r.bias_coverage = bias_coverage(alpha, r.eff_inv);
  r.bias_quantile = bias_quantile(alpha, r.eff_inv, var_ml);
  r.r_term = r_term(data, psi, model, prior, alpha);
  r.rstar_term = rstar_term(data, psi, model, prior, alpha);
  return r;
}

CoverageResult coverage_simulation(int M, int n, const std::vector<double>& gammas,
                                   const std::vector<std::string>& psi_names,
                                   const std::vector<double>& alphas, std::uint64_t seed,
                                   const StudySettings& settings) {
  if (M < 1 || n < 2) throw DomainError("coverage_simulation: bad M or n");
  PriorPtr prior = normal_prior(0.0, 1.0);
  ModelPtr model = laplace_model();
  std::vector<PsiPtr> psis;
  for (const std::string& name : psi_names)
    psis.push_back(make_psi(name, std::numeric_limits<double>::quiet_NaN()));

  const int npsi = static_cast<int>(psis.size());
  const int ngam = static_cast<int>(gammas.size());
  const int nalpha = static_cast<int>(alphas.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> values(
      static_cast<std::size_t>(npsi) * ngam * nalpha, std::vector<double>(M, nan));
  std::vector<int> rep_failed(M, 0);

  parallel_reps(M, settings.threads > 0 ? settings.threads : default_threads(), [&](int rep) {
    try {
      RngStream ds = RngStream::substream(seed, static_cast<std::uint64_t>(rep) * 64);
      double theta_true = ds.normal();
      Eigen::MatrixXd obs(n, 1);
      for (int i = 0; i < n; ++i) obs(i, 0) = ds.laplace(theta_true, 1.0);
      Dataset data = Dataset::from_matrix(std::move(obs));

      PosteriorConfig ref_cfg;
      ref_cfg.chain_length = settings.chain_length * settings.ref_chain_mult;
      ref_cfg.burn_in = settings.burn_in * settings.ref_chain_mult;
      ref_cfg.seed = derive_seed(seed, rep, 1);
      PosteriorSample ref = sample_parametric_posterior(data, *model, *prior, ref_cfg);

      for (int ip = 0; ip < npsi; ++ip) {
        for (int ig = 0; ig < ngam; ++ig) {
          PosteriorConfig cfg;
          cfg.chain_length = settings.chain_length;
          cfg.burn_in = settings.burn_in;
          cfg.seed = derive_seed(seed, rep, 2 + ip * ngam + ig);
          try {
            PosteriorSample gel = sample_posterior(data, *psis[ip], *prior, cfg, gammas[ig]);
            for (int ia = 0; ia < nalpha; ++ia) {
              double q = posterior_quantile(gel, 0, alphas[ia]).value;
              double u = posterior_cdf_at(ref, 0, q);
              values[(static_cast<std::size_t>(ip) * ngam + ig) * nalpha + ia][rep] =
                  u - alphas[ia];
            }
          } catch (const std::exception&) {
            rep_failed[rep] = 1;
          }
        }
      }
    } catch (const std::exception&) {
      rep_failed[rep] = 1;
    }
  });

  CoverageResult out;
  out.seed = seed;
  out.M = M;
  out.n = n;
  out.gammas = gammas;
  out.psis = psi_names;
  out.alphas = alphas;
  out.metric = "median bias in coverage";
  for (int f : rep_failed) out.failed_reps += f;
  for (int ip = 0; ip < npsi; ++ip)
    for (int ig = 0; ig < ngam; ++ig)
      for (int ia = 0; ia < nalpha; ++ia) {
        std::vector<double> good;
        for (double v : values[(static_cast<std::size_t>(ip) * ngam + ig) * nalpha + ia])
          if (std::isfinite(v)) good.push_back(v);
        CoverageCell c;
        c.psi = psi_names[ip];
        c.gamma = gammas[ig];
        c.alpha = alphas[ia];
        c.reps_used = static_cast<int>(good.size());
        c.value = good.empty() ? nan : stats::median(good);
        out.cells.push_back(c);
      }
  return out;
}

CoverageResult glm_accuracy_simulation(int M, int n, const std::vector<double>& gammas,
                                       std::uint64_t seed, const StudySettings& settings,
                                       bool clean_reference, double huber_c,
                                       const ContaminationConfig& config) {
  if (M < 1 || n < 4) throw DomainError("glm_accuracy_simulation: bad M or n");
  Eigen::Vector3d beta_true(0.5, 2.2, 1.2);
  Eigen::VectorXd m0 = beta_true;
  PriorPtr prior = normal_prior(m0, Eigen::VectorXd::Ones(3));
  ModelPtr model = poisson_regression_model(3);
  std::vector<std::string> psi_names = {"glm", "glm-robust"};
  std::vector<PsiPtr> psis = {psi_glm(), psi_glm_robust(huber_c)};
  std::vector<double> alphas = {0.025, 0.5, 0.975};
  const std::vector<int> components = {1, 2};

  const int npsi = 2, ngam = static_cast<int>(gammas.size()),
            nalpha = static_cast<int>(alphas.size()),
            ncomp = static_cast<int>(components.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> values(
      static_cast<std::size_t>(npsi) * ngam * nalpha * ncomp, std::vector<double>(M, nan));
  std::vector<int> rep_failed(M, 0);

  parallel_reps(M, settings.threads > 0 ? settings.threads : default_threads(), [&](int rep) {
    try {
      Dataset data =
          generate_contaminated_poisson(n, beta_true, config, derive_seed(seed, rep, 0));
      Dataset ref_data = data;
      if (clean_reference) {
        ContaminationConfig clean = config;
        clean.clean_fraction = 1.0;
        ref_data = generate_contaminated_poisson(n, beta_true, clean, derive_seed(seed, rep, 0));
      }
      PosteriorConfig ref_cfg;
      ref_cfg.chain_length = settings.chain_length * settings.ref_chain_mult;
      ref_cfg.burn_in = settings.burn_in * settings.ref_chain_mult;
      ref_cfg.seed = derive_seed(seed, rep, 1);
      PosteriorSample ref = sample_parametric_posterior(ref_data, *model, *prior, ref_cfg);

      for (int ip = 0; ip < npsi; ++ip) {
        for (int ig = 0; ig < ngam; ++ig) {
          PosteriorConfig cfg;
          cfg.chain_length = settings.chain_length;
          cfg.burn_in = settings.burn_in;
          cfg.seed = derive_seed(seed, rep, 2 + ip * ngam + ig);
          try {
            PosteriorSample gel = sample_posterior(data, *psis[ip], *prior, cfg, gammas[ig]);
            for (int ic = 0; ic < ncomp; ++ic)
              for (int ia = 0; ia < nalpha; ++ia) {
                double q = posterior_quantile(gel, components[ic], alphas[ia]).value;
                double qr = posterior_quantile(ref, components[ic], alphas[ia]).value;
                std::size_t idx =
                    ((static_cast<std::size_t>(ip) * ngam + ig) * nalpha + ia) * ncomp + ic;
                values[idx][rep] = std::fabs(q - qr);
              }
          } catch (const std::exception&) {
            rep_failed[rep] = 1;
          }
        }
      }
    } catch (const std::exception&) {
      rep_failed[rep] = 1;
    }
  });

  CoverageResult out;
  out.seed = seed;
  out.M = M;
  out.n = n;
  out.gammas = gammas;
  out.psis = psi_names;
  out.alphas = alphas;
  out.metric = clean_reference ? "median |q - q_ref| (clean reference)"
                               : "median |q - q_ref| (contaminated reference)";
  for (int f : rep_failed) out.failed_reps += f;
  for (int ip = 0; ip < npsi; ++ip)
    for (int ig = 0; ig < ngam; ++ig)
      for (int ia = 0; ia < nalpha; ++ia)
        for (int ic = 0; ic < ncomp; ++ic) {
          std::vector<double> good;
          std::size_t idx =
              ((static_cast<std::size_t>(ip) * ngam + ig) * nalpha + ia) * ncomp + ic;
          for (double v : values[idx])
            if (std::isfinite(v)) good.push_back(v);
          CoverageCell c;
          c.psi = psi_names[ip];
          c.gamma = gammas[ig];
          c.alpha = alphas[ia];
          c.component = components[ic];
          c.reps_used = static_cast<int>(good.size());
          c.value = good.empty() ? nan : stats::median(good);
          out.cells.push_back(c);
        }
  return out;
}

void VarianceStudyResult::paired_variance_diff(int col_a, int col_b, double* diff,
                                               double* se) const {
  const int m = static_cast<int>(quantiles.rows());
  double mean_a = quantiles.col(col_a).mean();
  double mean_b = quantiles.col(col_b).mean();
  std::vector<double> v(m);
  for (int i = 0; i < m; ++i) {
    double da = quantiles(i, col_a) - mean_a;
    double db = quantiles(i, col_b) - mean_b;
    v[i] = da * da - db * db;
  }
  *diff = stats::mean(v);
  *se = std::sqrt(stats::variance(v) / m);
}

VarianceStudyResult theorem5_variance_study(const std::string& family, int n, int M,
                                            const std::vector<double>& gammas, double alpha,
                                            std::uint64_t seed, const StudySettings& settings) {
  if (M < 2 || n < 2) throw DomainError("theorem5_variance_study: bad M or n");
  ExponentialFamilyModel fam = expfam_by_name(family);
  const double theta_true = 1.0;
  PriorPtr prior = flat_prior(1);
  PsiPtr psi = psi_mean();
  const int ngam = static_cast<int>(gammas.size());

  VarianceStudyResult out;
  out.gammas = gammas;
  out.seed = seed;
  out.M = M;
  out.n = n;
  out.alpha = alpha;
  out.family = family;
  out.quantiles.resize(M, ngam);

  parallel_reps(M, settings.threads > 0 ? settings.threads : default_threads(), [&](int rep) {
    RngStream ds = RngStream::substream(seed, static_cast<std::uint64_t>(rep) * 64);
    Eigen::MatrixXd obs(n, 1);
    for (int i = 0; i < n; ++i) obs(i, 0) = fam.sufficient_stat(fam.sample_y(ds, theta_true));
    Dataset data = Dataset::from_matrix(std::move(obs));
    // one proposal stream per replication, shared across gammas, so the
    // comparison is paired both in data and in chain noise
    std::uint64_t chain_seed = derive_seed(seed, rep, 1);
    for (int ig = 0; ig < ngam; ++ig) {
      PosteriorConfig cfg;
      cfg.chain_length = settings.chain_length;
      cfg.burn_in = settings.burn_in;
      cfg.seed = chain_seed;
      PosteriorSample gel = sample_posterior(data, *psi, *prior, cfg, gammas[ig]);
      out.quantiles(rep, ig) = posterior_quantile(gel, 0, alpha).value;
    }
  });

  out.variances.resize(ngam);
  for (int ig = 0; ig < ngam; ++ig) {
    std::vector<double> col(out.quantiles.col(ig).data(), out.quantiles.col(ig).data() + M);
    out.variances[ig] = stats::variance(col);
  }
  return out;
}

std::string coverage_table_csv(const CoverageResult& r) {
  std::ostringstream os;
  os << "# metric = " << r.metric << "\n";
  os << "# seed = " << r.seed << "\n# M = " << r.M << "\n# n = " << r.n << "\n";
  os << "# gammas =";
  for (double g : r.gammas) os << " " << fmt(g);
  os << "\n# psis =";
  for (const std::string& p : r.psis) os << " " << p;
  os << "\n# alphas =";
  for (double a : r.alphas) os << " " << fmt(a);
  os << "\n# failed_reps = " << r.failed_reps << "\n";
  os << "psi,gamma,component,alpha,value,reps_used\n";
  for (const CoverageCell& c : r.cells)
    os << c.psi << "," << fmt(c.gamma) << "," << c.component << "," << fmt(c.alpha) << ","
       << fmt(c.value) << "," << c.reps_used << "\n";
  return os.str();
}

std::string coverage_table_text(const CoverageResult& r) {
  std::ostringstream os;
  os << r.metric << "  (seed " << r.seed << ", M " << r.M << ", n " << r.n << ")\n";
  bool has_components = false;
  for (const CoverageCell& c : r.cells) has_components = has_components || c.component != 0;
  std::vector<int> components;
  for (const CoverageCell& c : r.cells)
    if (std::find(components.begin(), components.end(), c.component) == components.end())
      components.push_back(c.component);

  char buf[64];
  os << "component  alpha ";
  for (const std::string& p : r.psis)
    for (double g : r.gammas) {
      std::snprintf(buf, sizeof(buf), " %14s", (p + "@" + fmt(g)).c_str());
      os << buf;
    }
  os << "\n";
  for (int comp : components)
    for (double a : r.alphas) {
      std::snprintf(buf, sizeof(buf), "%9d  %5.3f ", comp, a);
      os << buf;
      for (const std::string& p : r.psis)
        for (double g : r.gammas) {
          std::snprintf(buf, sizeof(buf), " %14.4f", r.cell(p, g, a, comp).value);
          os << buf;
        }
      os << "\n";
    }
  (void)has_components;
  return os.str();
}

}  // namespace crel
