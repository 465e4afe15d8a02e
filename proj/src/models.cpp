#include "crel/models.hpp"

#include <algorithm>
#include <cmath>

#include "crel/errors.hpp"

namespace crel {

namespace {

double fd_step(double x) { return std::max(1e-5, 1e-5 * std::fabs(x)); }

}  // namespace

Eigen::VectorXd ParametricModel::score(const Eigen::VectorXd& row,
                                       const Eigen::VectorXd& theta) const {
  const int d = dim();
  Eigen::VectorXd g(d);
  Eigen::VectorXd t = theta;
  for (int r = 0; r < d; ++r) {
    double h = fd_step(theta[r]);
    t[r] = theta[r] + h;
    double up = log_density(row, t);
    t[r] = theta[r] - h;
    double dn = log_density(row, t);
    t[r] = theta[r];
    g[r] = (up - dn) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd ParametricModel::score_jacobian(const Eigen::VectorXd& row,
                                                const Eigen::VectorXd& theta) const {
  const int d = dim();
  Eigen::MatrixXd J(d, d);
  Eigen::VectorXd t = theta;
  for (int r = 0; r < d; ++r) {
    double h = fd_step(theta[r]);
    t[r] = theta[r] + h;
    Eigen::VectorXd up = score(row, t);
    t[r] = theta[r] - h;
    Eigen::VectorXd dn = score(row, t);
    t[r] = theta[r];
    J.col(r) = (up - dn) / (2.0 * h);
  }
  return J;
}

Tensor3 ParametricModel::info3(const Eigen::VectorXd& theta) const {
  // default: differentiate the expected information numerically
  const int d = dim();
  Tensor3 out(d);
  Eigen::VectorXd t = theta;
  for (int r = 0; r < d; ++r) {
    double h = fd_step(theta[r]);
    t[r] = theta[r] + h;
    Eigen::MatrixXd up = info2(t);
    t[r] = theta[r] - h;
    Eigen::MatrixXd dn = info2(t);
    t[r] = theta[r];
    Eigen::MatrixXd der = (up - dn) / (2.0 * h);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out(i, j, r) = der(i, j);
  }
  return out.symmetrized();
}

Eigen::MatrixXd ParametricModel::observed_info(const Dataset& data,
                                               const Eigen::VectorXd& theta) const {
  const int d = dim();
  const int n = data.n();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd t = theta;
  for (int r = 0; r < d; ++r) {
    double h = fd_step(theta[r]);
    t[r] = theta[r] + h;
    Eigen::VectorXd up = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) up += score(data.obs.row(i).transpose(), t);
    t[r] = theta[r] - h;
    Eigen::VectorXd dn = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) dn += score(data.obs.row(i).transpose(), t);
    t[r] = theta[r];
    H.col(r) = -(up - dn) / (2.0 * h * n);
  }
  return 0.5 * (H + H.transpose());
}

Tensor3 ParametricModel::observed_info3(const Dataset& data,
                                        const Eigen::VectorXd& theta) const {
  const int d = dim();
  Tensor3 out(d);
  Eigen::VectorXd t = theta;
  for (int r = 0; r < d; ++r) {
    double h = 10.0 * fd_step(theta[r]);
    t[r] = theta[r] + h;
    Eigen::MatrixXd up = observed_info(data, t);
    t[r] = theta[r] - h;
    Eigen::MatrixXd dn = observed_info(data, t);
    t[r] = theta[r];
    Eigen::MatrixXd der = (up - dn) / (2.0 * h);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out(i, j, r) = der(i, j);
  }
  return out.symmetrized();
}

Eigen::VectorXd ParametricModel::mle(const Dataset& data) const {
  // damped Newton on the total score
  const int d = dim();
  const int n = data.n();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  auto total_score = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) s += score(data.obs.row(i).transpose(), th);
    return s;
  };
  Eigen::VectorXd s = total_score(theta);
  for (int it = 0; it < 200; ++it) {
    if (s.lpNorm<Eigen::Infinity>() <= 1e-10 * n) return theta;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < n; ++i) J += score_jacobian(data.obs.row(i).transpose(), theta);
    Eigen::VectorXd step = J.fullPivLu().solve(-s);
    double t = 1.0;
    for (int half = 0; half < 40; ++half) {
      Eigen::VectorXd cand = theta + t * step;
      Eigen::VectorXd sc = total_score(cand);
      if (sc.allFinite() && sc.norm() < s.norm()) {
        theta = cand;
        s = sc;
        break;
      }
      t *= 0.5;
    }
  }
  throw ConvergenceError("mle: Newton failed for " + name());
}

double ParametricModel::density1(double x, double theta) const {
  Eigen::VectorXd row(1), th(1);
  row[0] = x;
  th[0] = theta;
  return std::exp(log_density(row, th));
}

namespace {

class LaplaceModel final : public ParametricModel {
 public:
  explicit LaplaceModel(double scale) : b_(scale) {
    if (scale <= 0) throw DomainError("laplace_model: scale must be positive");
  }
  std::string name() const override { return "laplace"; }
  int dim() const override { return 1; }
  double log_density(const Eigen::VectorXd& row, const Eigen::VectorXd& th) const override {
    return -std::fabs(row[0] - th[0]) / b_ - std::log(2.0 * b_);
  }
  Eigen::VectorXd score(const Eigen::VectorXd& row, const Eigen::VectorXd& th) const override {
    Eigen::VectorXd s(1);
    s[0] = (row[0] - th[0] >= 0 ? 1.0 : -1.0) / b_;
    return s;
  }
  Eigen::MatrixXd score_jacobian(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
    throw NonSmoothError("laplace score has no pointwise derivative");
  }
  bool smooth_score() const override { return false; }
  Eigen::MatrixXd info2(const Eigen::VectorXd&) const override {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = 1.0 / (b_ * b_);
    return m;
  }
  Tensor3 info3(const Eigen::VectorXd&) const override { return Tensor3(1); }
  // second derivative of |x - theta| vanishes a.e.; report the expected
  // information instead of the useless pointwise average
  Eigen::MatrixXd observed_info(const Dataset&, const Eigen::VectorXd& th) const override {
    return info2(th);
  }
  Tensor3 observed_info3(const Dataset&, const Eigen::VectorXd&) const override {
    return Tensor3(1);
  }
  Eigen::VectorXd mle(const Dataset& data) const override {
    std::vector<double> x(data.obs.col(0).data(), data.obs.col(0).data() + data.n());
    std::sort(x.begin(), x.end());
    Eigen::VectorXd out(1);
    std::size_t m = x.size();
    out[0] = (m % 2 == 1) ? x[m / 2] : 0.5 * (x[m / 2 - 1] + x[m / 2]);
    return out;
  }

 private:
  double b_;
};

class NormalModel final : public ParametricModel {
 public:
  explicit NormalModel(double sd) : sd_(sd) {
    if (sd <= 0) throw DomainError("normal_model: sd must be positive");
  }
  std::string name() const override { return "normal"; }
  int dim() const override { return 1; }
  double log_density(const Eigen::VectorXd& row, const Eigen::VectorXd& th) const override {
    double z = (row[0] - th[0]) / sd_;
    return -0.5 * z * z - std::log(sd_) - 0.5 * std::log(2.0 * M_PI);
  }
  Eigen::VectorXd score(const Eigen::VectorXd& row, const Eigen::VectorXd& th) const override {
    Eigen::VectorXd s(1);
    s[0] = (row[0] - th[0]) / (sd_ * sd_);
    return s;
  }
  Eigen::MatrixXd score_jacobian(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
    Eigen::MatrixXd J(1, 1);
    J(0, 0) = -1.0 / (sd_ * sd_);
    return J;
  }
  Eigen::MatrixXd info2(const Eigen::VectorXd&) const override {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = 1.0 / (sd_ * sd_);
    return m;
  }
  Tensor3 info3(const Eigen::VectorXd&) const override { return Tensor3(1); }
  Tensor3 observed_info3(const Dataset&, const Eigen::VectorXd&) const override {
    return Tensor3(1);
  }
  Eigen::VectorXd mle(const Dataset& data) const override {
    Eigen::VectorXd out(1);
    out[0] = data.obs.col(0).mean();
    return out;
  }

 private:
  double sd_;
};

class ExponentialModel final : public ParametricModel {
 public:
  std::string name() const override { return "exponential"; }
  int dim() const override { return 1; }
  double log_density(const Eigen::VectorXd& row, const Eigen::VectorXd& th) const override {
    if (th[0] <= 0 || row[0] < 0) return -std::numeric_limits<double>::infinity();
    return -std::log(th[0]) - row[0] / th[0];
  }
  Eigen::VectorXd score(const Eigen::VectorXd& row, const Eigen::VectorXd& th) const override {
    Eigen::VectorXd s(1);
    s[0] = (row[0] - th[0]) / (th[0] * th[0]);
    return s;
  }
  Eigen::MatrixXd score_jacobian(const Eigen::VectorXd& row, const Eigen::VectorXd& th) const override {
    Eigen::MatrixXd J(1, 1);
    double t = th[0];
    J(0, 0) = -1.0 / (t * t) - 2.0 * (row[0] - t) / (t * t * t);
    return J;
  }
  Eigen::MatrixXd info2(const Eigen::VectorXd& th) const override {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = 1.0 / (th[0] * th[0]);
    return m;
  }
  Tensor3 info3(const Eigen::VectorXd& th) const override {
    // -E d^3 log f = -4 / theta^3
    Tensor3 t(1);
    t(0, 0, 0) = -4.0 / (th[0] * th[0] * th[0]);
    return t;
  }
  Eigen::MatrixXd observed_info(const Dataset& data, const Eigen::VectorXd& th) const override {
    double t = th[0];
    double xbar = data.obs.col(0).mean();
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = -1.0 / (t * t) + 2.0 * xbar / (t * t * t);
    return m;
  }
  Tensor3 observed_info3(const Dataset& data, const Eigen::VectorXd& th) const override {
    double t = th[0];
    double xbar = data.obs.col(0).mean();
    Tensor3 out(1);
    out(0, 0, 0) = 2.0 / (t * t * t) - 6.0 * xbar / (t * t * t * t);
    return out;
  }
  Eigen::VectorXd mle(const Dataset& data) const override {
    Eigen::VectorXd out(1);
    out[0] = data.obs.col(0).mean();
    return out;
  }
};

class PoissonRegressionModel final : public ParametricModel {
 public:
  explicit PoissonRegressionModel(int n_covariates) : d_(n_covariates) {
    if (n_covariates < 1) throw DomainError("poisson_regression_model: need covariates");
  }
  std::string name() const override { return "poisson-regression"; }
  int dim() const override { return d_; }
  // row = (y, x1..xd); the log y! term is dropped (constant in beta)
  double log_density(const Eigen::VectorXd& row, const Eigen::VectorXd& beta) const override {
    double eta = row.tail(d_).dot(beta);
    return row[0] * eta - std::exp(eta);
  }
  Eigen::VectorXd score(const Eigen::VectorXd& row, const Eigen::VectorXd& beta) const override {
    double eta = row.tail(d_).dot(beta);
    return (row[0] - std::exp(eta)) * row.tail(d_);
  }
  Eigen::MatrixXd score_jacobian(const Eigen::VectorXd& row, const Eigen::VectorXd& beta) const override {
    double mu = std::exp(row.tail(d_).dot(beta));
    return -mu * row.tail(d_) * row.tail(d_).transpose();
  }
  Eigen::MatrixXd info2(const Eigen::VectorXd&) const override {
    throw DomainError("poisson-regression: expected information needs a covariate law; use observed_info");
  }
  Eigen::MatrixXd observed_info(const Dataset& data, const Eigen::VectorXd& beta) const override {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d_, d_);
    for (int i = 0; i < data.n(); ++i) {
      Eigen::VectorXd x = data.obs.row(i).transpose().tail(d_);
      H += std::exp(x.dot(beta)) * x * x.transpose();
    }
    return H / data.n();
  }
  Tensor3 observed_info3(const Dataset& data, const Eigen::VectorXd& beta) const override {
    Tensor3 t(d_);
    for (int i = 0; i < data.n(); ++i) {
      Eigen::VectorXd x = data.obs.row(i).transpose().tail(d_);
      double mu = std::exp(x.dot(beta));
      for (int a = 0; a < d_; ++a)
        for (int b = 0; b < d_; ++b)
          for (int c = 0; c < d_; ++c) t(a, b, c) += mu * x[a] * x[b] * x[c];
    }
    for (int a = 0; a < d_; ++a)
      for (int b = 0; b < d_; ++b)
        for (int c = 0; c < d_; ++c) t(a, b, c) /= data.n();
    return t;
  }

 private:
  int d_;
};

}  // namespace

ModelPtr laplace_model(double scale) { return std::make_shared<LaplaceModel>(scale); }
ModelPtr normal_model(double sd) { return std::make_shared<NormalModel>(sd); }
ModelPtr exponential_model() { return std::make_shared<ExponentialModel>(); }
ModelPtr poisson_regression_model(int n_covariates) {
  return std::make_shared<PoissonRegressionModel>(n_covariates);
}

namespace {

class FlatPrior final : public Prior {
 public:
  explicit FlatPrior(int dim) : d_(dim) {}
  int dim() const override { return d_; }
  double xi(const Eigen::VectorXd&) const override { return 0.0; }
  Eigen::VectorXd grad_xi(const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Zero(d_);
  }
  Eigen::MatrixXd hess_xi(const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Zero(d_, d_);
  }
  Eigen::VectorXd mode() const override { return Eigen::VectorXd::Zero(d_); }
  std::string describe() const override { return "flat"; }

 private:
  int d_;
};

class NormalPrior final : public Prior {
 public:
  NormalPrior(Eigen::VectorXd mean, Eigen::VectorXd sd)
      : mean_(std::move(mean)), sd_(std::move(sd)) {
    if (mean_.size() != sd_.size()) throw DomainError("normal_prior: size mismatch");
    for (Eigen::Index i = 0; i < sd_.size(); ++i)
      if (sd_[i] <= 0) throw DomainError("normal_prior: sd must be positive");
  }
  int dim() const override { return static_cast<int>(mean_.size()); }
  double xi(const Eigen::VectorXd& th) const override {
    double s = 0.0;
    for (Eigen::Index i = 0; i < mean_.size(); ++i) {
      double z = (th[i] - mean_[i]) / sd_[i];
      s -= 0.5 * z * z;
    }
    return s;
  }
  Eigen::VectorXd grad_xi(const Eigen::VectorXd& th) const override {
    Eigen::VectorXd g(mean_.size());
    for (Eigen::Index i = 0; i < mean_.size(); ++i)
      g[i] = -(th[i] - mean_[i]) / (sd_[i] * sd_[i]);
    return g;
  }
  Eigen::MatrixXd hess_xi(const Eigen::VectorXd&) const override {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mean_.size(), mean_.size());
    for (Eigen::Index i = 0; i < mean_.size(); ++i) h(i, i) = -1.0 / (sd_[i] * sd_[i]);
    return h;
  }
  Eigen::VectorXd mode() const override { return mean_; }
  std::string describe() const override {
    std::string s = "normal:";
    for (Eigen::Index i = 0; i < mean_.size(); ++i) {
      if (i) s += ";";
      s += std::to_string(mean_[i]) + "," + std::to_string(sd_[i]);
    }
    return s;
  }

 private:
  Eigen::VectorXd mean_, sd_;
};

}  // namespace

PriorPtr flat_prior(int dim) { return std::make_shared<FlatPrior>(dim); }
PriorPtr normal_prior(Eigen::VectorXd mean, Eigen::VectorXd sd) {
  return std::make_shared<NormalPrior>(std::move(mean), std::move(sd));
}
PriorPtr normal_prior(double mean, double sd) {
  Eigen::VectorXd m(1), s(1);
  m[0] = mean;
  s[0] = sd;
  return std::make_shared<NormalPrior>(m, s);
}

ExponentialFamilyModel expfam_exponential() {
  ExponentialFamilyModel m;
  m.name = "exponential";
  m.sufficient_stat = [](double y) { return y; };
  m.natural_param = [](double theta) { return -1.0 / theta; };
  m.log_partition = [](double v) { return -std::log(-v); };
  m.mean_param = [](double v) { return -1.0 / v; };
  m.sample_y = [](RngStream& rng, double theta) { return rng.exponential(theta); };
  return m;
}

ExponentialFamilyModel expfam_normal() {
  ExponentialFamilyModel m;
  m.name = "normal";
  m.sufficient_stat = [](double y) { return y; };
  m.natural_param = [](double theta) { return theta; };
  m.log_partition = [](double v) { return 0.5 * v * v; };
  m.mean_param = [](double v) { return v; };
  m.sample_y = [](RngStream& rng, double theta) { return rng.normal(theta, 1.0); };
  return m;
}

ExponentialFamilyModel expfam_poisson() {
  ExponentialFamilyModel m;
  m.name = "poisson";
  m.sufficient_stat = [](double y) { return y; };
  m.natural_param = [](double theta) { return std::log(theta); };
  m.log_partition = [](double v) { return std::exp(v); };
  m.mean_param = [](double v) { return std::exp(v); };
  m.sample_y = [](RngStream& rng, double theta) {
    return static_cast<double>(rng.poisson(theta));
  };
  return m;
}

ExponentialFamilyModel expfam_by_name(const std::string& name) {
  if (name == "exponential") return expfam_exponential();
  if (name == "normal") return expfam_normal();
  if (name == "poisson") return expfam_poisson();
  throw DomainError("expfam_by_name: unknown family " + name);
}

Dataset generate_laplace(int n, double theta, std::uint64_t seed) {
  if (n < 1) throw DomainError("generate_laplace: n must be >= 1");
  RngStream rng(seed);
  Eigen::MatrixXd m(n, 1);
  for (int i = 0; i < n; ++i) m(i, 0) = rng.laplace(theta, 1.0);
  return Dataset::from_matrix(std::move(m));
}

Dataset generate_normal(int n, double mean, double sd, std::uint64_t seed) {
  if (n < 1) throw DomainError("generate_normal: n must be >= 1");
  RngStream rng(seed);
  Eigen::MatrixXd m(n, 1);
  for (int i = 0; i < n; ++i) m(i, 0) = rng.normal(mean, sd);
  return Dataset::from_matrix(std::move(m));
}

Dataset generate_exponential(int n, double mean, std::uint64_t seed) {
  if (n < 1) throw DomainError("generate_exponential: n must be >= 1");
  RngStream rng(seed);
  Eigen::MatrixXd m(n, 1);
  for (int i = 0; i < n; ++i) m(i, 0) = rng.exponential(mean);
  return Dataset::from_matrix(std::move(m));
}

Dataset generate_contaminated_poisson(int n, const Eigen::Vector3d& beta,
                                      const ContaminationConfig& config, std::uint64_t seed) {
  if (n < 2) throw DomainError("generate_contaminated_poisson: n must be >= 2");
  if (!(config.clean_fraction > 0.0 && config.clean_fraction <= 1.0))
    throw DomainError("generate_contaminated_poisson: clean_fraction outside (0,1]");

  RngStream cov_rng = RngStream::substream(seed, 0);

  Eigen::VectorXd z1(n), z2(n);
  for (int i = 0; i < n; ++i) z1[i] = cov_rng.normal(3.0, std::sqrt(0.7));
  for (int i = 0; i < n; ++i) z2[i] = cov_rng.uniform(1.0, 1.5);
  auto standardize = [n](Eigen::VectorXd& v) {
    double m = v.mean();
    double s2 = (v.array() - m).square().sum() / n;
    v = (v.array() - m) / std::sqrt(s2);
  };
  standardize(z1);
  standardize(z2);

  Eigen::MatrixXd design(n, 3);
  design.col(0).setOnes();
  design.col(1) = z1;
  design.col(2) = z2;

  double outlier_sd =
      config.spread_is_variance ? std::sqrt(config.outlier_spread) : config.outlier_spread;
  Eigen::VectorXd y(n);
  // one response stream per observation, so a clean_fraction = 1 rerun of the
  // same seed is the exact clean counterpart of a contaminated draw
  for (int i = 0; i < n; ++i) {
    RngStream resp_rng = RngStream::substream(seed, 100 + static_cast<std::uint64_t>(i));
    double mu = std::exp(design.row(i).dot(beta));
    bool clean = resp_rng.uniform01() <= config.clean_fraction;
    double poisson_draw = static_cast<double>(resp_rng.poisson(mu));
    if (clean) {
      y[i] = poisson_draw;
    } else {
      double v = resp_rng.normal(config.outlier_mean, outlier_sd);
      y[i] = std::max(0.0, std::round(v));
    }
  }
  return Dataset::glm(std::move(y), std::move(design));
}

}  // namespace crel
