#include "crel/posterior.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>

#include "crel/errors.hpp"
#include "crel/expansion.hpp"
#include "crel/rng.hpp"
#include "crel/stats.hpp"

namespace crel {

namespace {

std::atomic<long> g_inner_failures{0};

double column_sd(const Eigen::VectorXd& v) {
  double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / std::max<Eigen::Index>(1, v.size() - 1));
}

Eigen::VectorXd ess_estimate(const Eigen::MatrixXd& draws) {
  const int m = static_cast<int>(draws.rows());
  const int d = static_cast<int>(draws.cols());
  Eigen::VectorXd ess(d);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd x = draws.col(j);
    double mu = x.mean();
    Eigen::VectorXd c = x.array() - mu;
    double g0 = c.squaredNorm() / m;
    if (g0 <= 0) {
      ess[j] = 1.0;
      continue;
    }
    // Geyer initial positive sequence on autocovariance pairs
    double tau = 1.0;
    int max_lag = std::min(m - 2, 4000);
    for (int k = 1; k + 1 <= max_lag; k += 2) {
      double g1 = 0.0, g2 = 0.0;
      for (int i = 0; i + k < m; ++i) g1 += c[i] * c[i + k];
      for (int i = 0; i + k + 1 < m; ++i) g2 += c[i] * c[i + k + 1];
      g1 /= m;
      g2 /= m;
      double pair = (g1 + g2) / g0;
      if (pair <= 0.0) break;
      tau += 2.0 * pair;
    }
    ess[j] = std::min(static_cast<double>(m), std::max(1.0, m / tau));
  }
  return ess;
}

}  // namespace

double log_posterior(const Dataset& data, const EstimatingFunction& psi, const Prior& prior,
                     const Eigen::VectorXd& theta, double gamma) {
  try {
    GELRValue g = gelr(data, psi, theta, gamma);
    if (!g.hull_ok || !std::isfinite(g.value))
      return -std::numeric_limits<double>::infinity();
    return -0.5 * g.value + prior.xi(theta);
  } catch (const ConvergenceError&) {
    g_inner_failures.fetch_add(1, std::memory_order_relaxed);
    return -std::numeric_limits<double>::infinity();
  }
}

long log_posterior_failures() { return g_inner_failures.load(std::memory_order_relaxed); }

PosteriorSample run_metropolis(const std::function<double(const Eigen::VectorXd&)>& log_post,
                               const Eigen::VectorXd& start, const Eigen::VectorXd& scale,
                               const PosteriorConfig& config) {
  const int d = static_cast<int>(start.size());
  if (config.burn_in < 0 || config.burn_in >= config.chain_length)
    throw DomainError("run_metropolis: need 0 <= burn_in < chain_length");
  if (config.thin < 1) throw DomainError("run_metropolis: thin must be >= 1");
  if (scale.size() != d || scale.minCoeff() <= 0.0)
    throw DomainError("run_metropolis: proposal scale must be positive");

  RngStream rng(config.seed);
  Eigen::VectorXd x = start;
  double lp = log_post(x);
  if (!std::isfinite(lp))
    throw SamplerError("run_metropolis: start point has undefined posterior");

  Eigen::VectorXd s = scale;
  const int kept = (config.chain_length - config.burn_in + config.thin - 1) / config.thin;
  PosteriorSample out;
  out.draws.resize(kept, d);
  out.log_post_trace.reserve(kept);

  int accepted_post = 0, proposals_post = 0;
  int burn_failures = 0;
  int window_acc = 0, window_len = 0;
  constexpr int kWindow = 100;
  int row = 0;

  for (int it = 0; it < config.chain_length; ++it) {
    const bool in_burn = it < config.burn_in;
    Eigen::VectorXd y(d);
    for (int j = 0; j < d; ++j) y[j] = x[j] + s[j] * rng.normal();
    double lpy = log_post(y);
    bool accept = false;
    if (std::isfinite(lpy)) {
      double logr = lpy - lp;
      accept = (logr >= 0.0) || (std::log(rng.uniform01()) < logr);
    } else if (in_burn) {
      ++burn_failures;
    }
    if (accept) {
      x = y;
      lp = lpy;
    }
    if (in_burn) {
      ++window_len;
      if (accept) ++window_acc;
      if (config.adapt && window_len == kWindow) {
        double rate = static_cast<double>(window_acc) / kWindow;
        s *= std::exp(0.8 * (rate - 0.3));
        window_acc = 0;
        window_len = 0;
      }
      if (it + 1 == config.burn_in && burn_failures * 2 > config.burn_in)
        throw SamplerError("run_metropolis: more than half of burn-in proposals failed");
    } else {
      ++proposals_post;
      if (accept) ++accepted_post;
      if ((it - config.burn_in) % config.thin == 0) {
        out.draws.row(row++) = x.transpose();
        out.log_post_trace.push_back(lp);
      }
    }
  }
  out.draws.conservativeResize(row, d);
  out.acceptance_rate =
      proposals_post > 0 ? static_cast<double>(accepted_post) / proposals_post : 0.0;
  out.ess = ess_estimate(out.draws);
  out.inner_failures = burn_failures;
  out.frozen_scale = s;
  return out;
}

PosteriorSample sample_posterior(const Dataset& data, const EstimatingFunction& psi,
                                 const Prior& prior, const PosteriorConfig& config, double gamma) {
  data.validate();
  // chain starts at the M-estimator
  Eigen::VectorXd start;
  if (data.has_glm()) {
    Eigen::VectorXd b0 = Eigen::VectorXd::Zero(data.design->cols());
    MEstimate classical = solve_m_estimate(*psi_glm(), data, b0);
    start = (psi.label() == "glm") ? classical.theta_hat
                                   : solve_m_estimate(psi, data, classical.theta_hat).theta_hat;
  } else {
    Eigen::VectorXd t0(1);
    std::vector<double> col(data.obs.col(0).data(), data.obs.col(0).data() + data.n());
    t0[0] = stats::median(std::move(col));
    start = solve_m_estimate(psi, data, t0).theta_hat;
  }

  Eigen::VectorXd scale = config.proposal_scale;
  if (scale.size() == 0) {
    scale.resize(start.size());
    bool have_tensors = false;
    try {
      MomentTensors t = compute_tensors(data, psi, start);
      for (int j = 0; j < scale.size(); ++j)
        scale[j] = 2.4 * std::sqrt(t.nu_inv(j, j) / data.n());
      have_tensors = scale.allFinite() && scale.minCoeff() > 0.0;
    } catch (const std::exception&) {
      have_tensors = false;
    }
    if (!have_tensors) {
      for (int j = 0; j < scale.size(); ++j)
        scale[j] = 2.4 * column_sd(data.obs.col(std::min<Eigen::Index>(j, data.p() - 1))) /
                   std::sqrt(static_cast<double>(data.n()));
    }
  }

  auto lp = [&data, &psi, &prior, gamma](const Eigen::VectorXd& th) {
    return log_posterior(data, psi, prior, th, gamma);
  };
  return run_metropolis(lp, start, scale, config);
}

PosteriorSample sample_parametric_posterior(const Dataset& data, const ParametricModel& model,
                                            const Prior& prior, const PosteriorConfig& config) {
  data.validate();
  Eigen::VectorXd start = model.mle(data);
  Eigen::MatrixXd info = model.observed_info(data, start);
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  Eigen::VectorXd scale(start.size());
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd cov =
        llt.solve(Eigen::MatrixXd::Identity(start.size(), start.size())) / data.n();
    for (int j = 0; j < scale.size(); ++j) scale[j] = 2.4 * std::sqrt(cov(j, j));
  } else {
    scale.setConstant(2.4 / std::sqrt(static_cast<double>(data.n())));
  }
  auto lp = [&data, &model, &prior](const Eigen::VectorXd& th) {
    double s = prior.xi(th);
    if (!std::isfinite(s)) return -std::numeric_limits<double>::infinity();
    for (int i = 0; i < data.n(); ++i) {
      s += model.log_density(data.obs.row(i).transpose(), th);
      if (!std::isfinite(s)) return -std::numeric_limits<double>::infinity();
    }
    return s;
  };
  return run_metropolis(lp, start, scale, config);
}

QuantileEstimate posterior_quantile(const PosteriorSample& sample, int component, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("posterior_quantile: alpha outside (0,1)");
  const int m = static_cast<int>(sample.draws.rows());
  if (m < 2) throw DegenerateError("posterior_quantile: chain too short");
  Eigen::VectorXd col = sample.draws.col(component);
  if ((col.array() == col[0]).all())
    throw DegenerateError("posterior_quantile: degenerate chain");
  if (sample.ess.size() > component && sample.ess[component] < 100.0)
    std::cerr << "posterior_quantile: warning, ESS below 100 for component " << component
              << "\n";

  std::vector<double> sorted(col.data(), col.data() + m);
  std::sort(sorted.begin(), sorted.end());
  QuantileEstimate q;
  q.level = alpha;
  q.value = stats::sample_quantile_sorted(sorted, alpha);

  // sectioning: quantile per contiguous batch, spread of batch values
  const int batches = std::min(32, m / 2);
  const int len = m / batches;
  std::vector<double> batch_q(batches);
  std::vector<double> buf;
  for (int b = 0; b < batches; ++b) {
    buf.assign(col.data() + b * len, col.data() + (b + 1) * len);
    std::sort(buf.begin(), buf.end());
    batch_q[b] = stats::sample_quantile_sorted(buf, alpha);
  }
  q.mc_se = std::sqrt(stats::variance(batch_q) / batches);
  return q;
}

double posterior_cdf_at(const PosteriorSample& sample, int component, double t) {
  const int m = static_cast<int>(sample.draws.rows());
  if (m == 0) throw DegenerateError("posterior_cdf_at: empty chain");
  int count = 0;
  for (int i = 0; i < m; ++i)
    if (sample.draws(i, component) < t) ++count;
  return static_cast<double>(count) / m;
}

}  // namespace crel
