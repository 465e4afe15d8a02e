#include "crel/estimating.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "crel/errors.hpp"

namespace crel {

namespace {

double fd_step(double x) { return std::max(1e-5, 1e-5 * std::fabs(x)); }

double huber_psi(double u, double c) {
  if (u > c) return c;
  if (u < -c) return -c;
  return u;
}

double huber_dpsi(double u, double c) { return (std::fabs(u) <= c) ? 1.0 : 0.0; }

}  // namespace

Eigen::MatrixXd EstimatingFunction::jacobian(const Dataset& data, int i,
                                             const Eigen::VectorXd& theta) const {
  const int d = static_cast<int>(theta.size());
  Eigen::MatrixXd J(d, d);
  Eigen::VectorXd t = theta;
  for (int r = 0; r < d; ++r) {
    double h = fd_step(theta[r]);
    t[r] = theta[r] + h;
    Eigen::VectorXd up = evaluate(data, i, t);
    t[r] = theta[r] - h;
    Eigen::VectorXd dn = evaluate(data, i, t);
    t[r] = theta[r];
    J.col(r) = (up - dn) / (2.0 * h);
  }
  return J;
}

Eigen::MatrixXd EstimatingFunction::psi_matrix(const Dataset& data,
                                               const Eigen::VectorXd& theta) const {
  const int n = data.n();
  Eigen::VectorXd first = evaluate(data, 0, theta);
  Eigen::MatrixXd m(n, first.size());
  m.row(0) = first.transpose();
  for (int i = 1; i < n; ++i) m.row(i) = evaluate(data, i, theta).transpose();
  return m;
}

Eigen::VectorXd EstimatingFunction::mean_value(const Dataset& data,
                                               const Eigen::VectorXd& theta) const {
  return psi_matrix(data, theta).colwise().mean().transpose();
}

Eigen::MatrixXd EstimatingFunction::mean_jacobian(const Dataset& data,
                                                  const Eigen::VectorXd& theta) const {
  const int d = static_cast<int>(theta.size());
  if (has_analytic_jacobian()) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < data.n(); ++i) J += jacobian(data, i, theta);
    return J / data.n();
  }
  Eigen::MatrixXd J(d, d);
  Eigen::VectorXd t = theta;
  for (int r = 0; r < d; ++r) {
    double h = fd_step(theta[r]);
    t[r] = theta[r] + h;
    Eigen::VectorXd up = mean_value(data, t);
    t[r] = theta[r] - h;
    Eigen::VectorXd dn = mean_value(data, t);
    t[r] = theta[r];
    J.col(r) = (up - dn) / (2.0 * h);
  }
  return J;
}

namespace {

class MeanScore final : public EstimatingFunction {
 public:
  int dim() const override { return 1; }
  bool smooth() const override { return true; }
  std::string label() const override { return "mean"; }
  Eigen::VectorXd evaluate(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    Eigen::VectorXd v(1);
    v[0] = data.obs(i, 0) - th[0];
    return v;
  }
  Eigen::MatrixXd jacobian(const Dataset&, int, const Eigen::VectorXd&) const override {
    Eigen::MatrixXd J(1, 1);
    J(0, 0) = -1.0;
    return J;
  }
  bool has_analytic_jacobian() const override { return true; }
};

// +1/2 on x - theta <= 0, -1/2 otherwise (boundary in the positive branch)
class MedianScore final : public EstimatingFunction {
 public:
  int dim() const override { return 1; }
  bool smooth() const override { return false; }
  std::string label() const override { return "median"; }
  Eigen::VectorXd evaluate(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    Eigen::VectorXd v(1);
    v[0] = (data.obs(i, 0) - th[0] <= 0.0) ? 0.5 : -0.5;
    return v;
  }
  Eigen::MatrixXd jacobian(const Dataset&, int, const Eigen::VectorXd&) const override {
    throw NonSmoothError("median score has no jacobian");
  }
};

class HuberScore final : public EstimatingFunction {
 public:
  explicit HuberScore(double c) : c_(c) {
    if (!(c > 0)) throw DomainError("psi_huber: c must be positive");
  }
  int dim() const override { return 1; }
  bool smooth() const override { return true; }
  std::string label() const override { return "huber"; }
  Eigen::VectorXd evaluate(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    Eigen::VectorXd v(1);
    v[0] = huber_psi(data.obs(i, 0) - th[0], c_);
    return v;
  }
  Eigen::MatrixXd jacobian(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    Eigen::MatrixXd J(1, 1);
    J(0, 0) = -huber_dpsi(data.obs(i, 0) - th[0], c_);
    return J;
  }
  bool has_analytic_jacobian() const override { return true; }

 private:
  double c_;
};

class TukeyScore final : public EstimatingFunction {
 public:
  explicit TukeyScore(double k) : k_(k) {
    if (!(k > 0)) throw DomainError("psi_tukey: k must be positive");
  }
  int dim() const override { return 1; }
  bool smooth() const override { return true; }
  std::string label() const override { return "biweight"; }
  Eigen::VectorXd evaluate(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    double u = data.obs(i, 0) - th[0];
    Eigen::VectorXd v(1);
    if (std::fabs(u) > k_) {
      v[0] = 0.0;
    } else {
      double t = 1.0 - (u / k_) * (u / k_);
      v[0] = u * t * t;
    }
    return v;
  }
  Eigen::MatrixXd jacobian(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    double u = data.obs(i, 0) - th[0];
    Eigen::MatrixXd J(1, 1);
    if (std::fabs(u) > k_) {
      J(0, 0) = 0.0;
    } else {
      double s = (u / k_) * (u / k_);
      J(0, 0) = -(1.0 - s) * (1.0 - 5.0 * s);
    }
    return J;
  }
  bool has_analytic_jacobian() const override { return true; }

 private:
  double k_;
};

void require_poisson_log(const std::string& link, const std::string& variance) {
  if (link != "log" || variance != "poisson")
    throw DomainError("glm psi: only the Poisson log-link family is supported");
}

void require_glm_data(const Dataset& data) {
  if (!data.has_glm()) throw SchemaError("glm psi: dataset lacks response/design");
}

// per-observation quasi-likelihood summand (y_i - mu_i) x_ij for the
// Poisson log link, where V(mu) = mu cancels d mu / d beta_j = mu x_ij
class GlmQuasiScore final : public EstimatingFunction {
 public:
  GlmQuasiScore(std::string link, std::string variance) {
    require_poisson_log(link, variance);
  }
  int dim() const override { return 0; }  // resolved from the design matrix
  bool smooth() const override { return true; }
  std::string label() const override { return "glm"; }
  Eigen::VectorXd evaluate(const Dataset& data, int i, const Eigen::VectorXd& beta) const override {
    require_glm_data(data);
    Eigen::VectorXd x = data.design->row(i).transpose();
    double mu = std::exp(x.dot(beta));
    return ((*data.response)[i] - mu) * x;
  }
  Eigen::MatrixXd jacobian(const Dataset& data, int i, const Eigen::VectorXd& beta) const override {
    require_glm_data(data);
    Eigen::VectorXd x = data.design->row(i).transpose();
    double mu = std::exp(x.dot(beta));
    return -mu * x * x.transpose();
  }
  bool has_analytic_jacobian() const override { return true; }
};

// Huber quasi-likelihood: psi_c of the Pearson residual, variance-scaled,
// minus the average of its fitted-model expectation (keeps the estimating
// equation unbiased at the model).
class RobustGlmScore final : public EstimatingFunction {
 public:
  RobustGlmScore(double c, std::string link, std::string variance) : c_(c) {
    if (!(c > 0)) throw DomainError("psi_glm_robust: c must be positive");
    require_poisson_log(link, variance);
    expectation_ = PoissonHuberExpectation::shared(c);
  }
  int dim() const override { return 0; }
  bool smooth() const override { return true; }
  std::string label() const override { return "glm-robust"; }

  Eigen::VectorXd evaluate(const Dataset& data, int i, const Eigen::VectorXd& beta) const override {
    require_glm_data(data);
    return raw_term(data, i, beta) - correction(data, beta);
  }

  Eigen::MatrixXd psi_matrix(const Dataset& data, const Eigen::VectorXd& beta) const override {
    require_glm_data(data);
    const int n = data.n();
    const int d = static_cast<int>(data.design->cols());
    Eigen::VectorXd corr = correction(data, beta);
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i) m.row(i) = (raw_term(data, i, beta) - corr).transpose();
    return m;
  }

 private:
  Eigen::VectorXd raw_term(const Dataset& data, int i, const Eigen::VectorXd& beta) const {
    Eigen::VectorXd x = data.design->row(i).transpose();
    double mu = std::exp(x.dot(beta));
    double sq = std::sqrt(mu);
    double r = ((*data.response)[i] - mu) / sq;
    return huber_psi(r, c_) * sq * x;
  }
  Eigen::VectorXd correction(const Dataset& data, const Eigen::VectorXd& beta) const {
    const int n = data.n();
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(data.design->cols());
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x = data.design->row(i).transpose();
      double mu = std::exp(x.dot(beta));
      corr += expectation_->value(mu) * std::sqrt(mu) * x;
    }
    return corr / n;
  }

  double c_;
  std::shared_ptr<const PoissonHuberExpectation> expectation_;
};

class MlScore final : public EstimatingFunction {
 public:
  explicit MlScore(ModelPtr model) : model_(std::move(model)) {}
  int dim() const override { return model_->dim(); }
  bool smooth() const override { return model_->smooth_score(); }
  std::string label() const override { return "ml-score:" + model_->name(); }
  Eigen::VectorXd evaluate(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    return model_->score(data.obs.row(i).transpose(), th);
  }
  Eigen::MatrixXd jacobian(const Dataset& data, int i, const Eigen::VectorXd& th) const override {
    return model_->score_jacobian(data.obs.row(i).transpose(), th);
  }
  bool has_analytic_jacobian() const override { return model_->smooth_score(); }

 private:
  ModelPtr model_;
};

}  // namespace

PsiPtr psi_mean() { return std::make_shared<MeanScore>(); }
PsiPtr psi_median() { return std::make_shared<MedianScore>(); }
PsiPtr psi_huber(double c) { return std::make_shared<HuberScore>(c); }
PsiPtr psi_tukey(double k) { return std::make_shared<TukeyScore>(k); }
PsiPtr psi_glm(const std::string& link, const std::string& variance) {
  return std::make_shared<GlmQuasiScore>(link, variance);
}
PsiPtr psi_glm_robust(double c, const std::string& link, const std::string& variance) {
  return std::make_shared<RobustGlmScore>(c, link, variance);
}
PsiPtr psi_ml_score(ModelPtr model) { return std::make_shared<MlScore>(std::move(model)); }

PsiPtr make_psi(const std::string& name, double tuning) {
  bool has_tuning = std::isfinite(tuning);
  if (name == "mean") return psi_mean();
  if (name == "median") return psi_median();
  if (name == "huber") return psi_huber(has_tuning ? tuning : 1.345);
  if (name == "tukey" || name == "biweight") return psi_tukey(has_tuning ? tuning : 4.685);
  if (name == "glm" || name == "glm-poisson") return psi_glm();
  if (name == "glm-robust" || name == "glm-poisson-robust")
    return psi_glm_robust(has_tuning ? tuning : 1.6);
  throw DomainError("make_psi: unknown family '" + name + "'");
}

MEstimate solve_m_estimate(const EstimatingFunction& psi, const Dataset& data,
                           Eigen::VectorXd theta0) {
  data.validate();
  if (!theta0.allFinite()) throw DomainError("solve_m_estimate: non-finite start");

  if (!psi.smooth() && psi.dim() == 1) {
    // sort-based root for the median-type score
    std::vector<double> x(data.obs.col(0).data(), data.obs.col(0).data() + data.n());
    std::sort(x.begin(), x.end());
    MEstimate est;
    est.theta_hat.resize(1);
    std::size_t m = x.size();
    est.theta_hat[0] = (m % 2 == 1) ? x[m / 2] : 0.5 * (x[m / 2 - 1] + x[m / 2]);
    est.residual_norm =
        psi.mean_value(data, est.theta_hat).lpNorm<Eigen::Infinity>() * data.n();
    est.iterations = 0;
    return est;
  }

  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd g = psi.mean_value(data, theta);
  const double tol = 1e-12 * std::max(1.0, g.lpNorm<Eigen::Infinity>());
  for (int it = 0; it < 200; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= std::max(tol, 1e-13)) {
      MEstimate est;
      est.theta_hat = theta;
      est.residual_norm = g.lpNorm<Eigen::Infinity>() * data.n();
      est.iterations = it;
      return est;
    }
    Eigen::MatrixXd J = psi.mean_jacobian(data, theta);
    Eigen::VectorXd step = J.fullPivLu().solve(-g);
    if (!step.allFinite()) throw ConvergenceError("solve_m_estimate: singular jacobian");
    double t = 1.0;
    bool moved = false;
    for (int half = 0; half < 50; ++half) {
      Eigen::VectorXd cand = theta + t * step;
      Eigen::VectorXd gc = psi.mean_value(data, cand);
      if (gc.allFinite() && gc.norm() < g.norm()) {
        theta = cand;
        g = gc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  if (g.lpNorm<Eigen::Infinity>() <= 1e-8) {
    MEstimate est;
    est.theta_hat = theta;
    est.residual_norm = g.lpNorm<Eigen::Infinity>() * data.n();
    est.iterations = 200;
    return est;
  }
  throw ConvergenceError("solve_m_estimate: no root after 200 damped Newton steps");
}

PoissonHuberExpectation::PoissonHuberExpectation(double c) : c_(c) {
  if (!(c > 0)) throw DomainError("PoissonHuberExpectation: c must be positive");
}

double PoissonHuberExpectation::exact(double mu) const {
  if (mu <= 0.0) return 0.0;
  double sq = std::sqrt(mu);
  double half_width = 25.0 * sq + 30.0;
  long lo = std::max(0L, static_cast<long>(std::floor(mu - half_width)));
  long hi = static_cast<long>(std::ceil(mu + half_width));
  // anchor the pmf at the window centre and recur outwards
  long y0 = std::max(lo, std::min(hi, static_cast<long>(mu)));
  double log_p0 = y0 * std::log(mu) - mu - std::lgamma(static_cast<double>(y0) + 1.0);
  double p0 = std::exp(log_p0);
  double total = 0.0;
  double p = p0;
  for (long y = y0; y <= hi; ++y) {
    total += p * huber_psi((y - mu) / sq, c_);
    p *= mu / static_cast<double>(y + 1);
  }
  p = p0;
  for (long y = y0 - 1; y >= lo; --y) {
    p *= static_cast<double>(y + 1) / mu;
    total += p * huber_psi((y - mu) / sq, c_);
  }
  return total;
}

std::shared_ptr<const PoissonHuberExpectation> PoissonHuberExpectation::shared(double c) {
  static std::mutex mu;
  static std::map<long long, std::shared_ptr<const PoissonHuberExpectation>> cache;
  std::lock_guard<std::mutex> lock(mu);
  long long key = std::llround(c * 1e9);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto ptr = std::make_shared<const PoissonHuberExpectation>(c);
  cache[key] = ptr;
  return ptr;
}

}  // namespace crel
