#include <doctest.h>

#include <cmath>

#include "crel/errors.hpp"
#include "crel/estimating.hpp"
#include "crel/rng.hpp"
#include "crel/stats.hpp"

using namespace crel;

namespace {

Dataset row1(double x) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = x;
  return Dataset::from_matrix(std::move(m));
}

Eigen::VectorXd theta1(double t) {
  Eigen::VectorXd v(1);
  v[0] = t;
  return v;
}

}  // namespace

TEST_CASE("mean score values and m-estimate") {
  PsiPtr psi = psi_mean();
  CHECK(psi->evaluate(row1(2.0), 0, theta1(0.5))[0] == doctest::Approx(1.5));
  CHECK(psi->evaluate(row1(0.7), 0, theta1(0.7))[0] == doctest::Approx(0.0));
  Dataset d = Dataset::from_vector({-1, 0, 2});
  MEstimate est = solve_m_estimate(*psi, d, theta1(0.0));
  CHECK(est.theta_hat[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(est.residual_norm <= 1e-8 * d.n());
}

TEST_CASE("median score branch values and tie convention") {
  PsiPtr psi = psi_median();
  CHECK(psi->evaluate(row1(1.0), 0, theta1(2.0))[0] == doctest::Approx(0.5));
  CHECK(psi->evaluate(row1(3.0), 0, theta1(2.0))[0] == doctest::Approx(-0.5));
  CHECK(psi->evaluate(row1(2.0), 0, theta1(2.0))[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(psi->jacobian(row1(1.0), 0, theta1(0.0)), NonSmoothError);

  Dataset d = Dataset::from_vector({1, 2, 3, 4, 5});
  CHECK(solve_m_estimate(*psi, d, theta1(0.0)).theta_hat[0] == doctest::Approx(3.0));
}

TEST_CASE("huber score clips and matches the mean inside") {
  CHECK_THROWS_AS(psi_huber(0.0), DomainError);
  PsiPtr psi = psi_huber(1.345);
  CHECK(psi->evaluate(row1(2.0), 0, theta1(0.0))[0] == doctest::Approx(1.345));
  CHECK(psi->evaluate(row1(0.3), 0, theta1(0.0))[0] == doctest::Approx(0.3));
  CHECK(psi->evaluate(row1(-5.0), 0, theta1(0.0))[0] == doctest::Approx(-1.345));

  // data tight enough that clipping never fires: root equals the mean
  Dataset d = Dataset::from_vector({-0.5, 0.1, 0.4, -0.2, 0.2});
  double xbar = d.obs.col(0).mean();
  MEstimate est = solve_m_estimate(*psi, d, theta1(0.0));
  CHECK(est.theta_hat[0] == doctest::Approx(xbar).epsilon(1e-10));
}

TEST_CASE("tukey biweight values") {
  CHECK_THROWS_AS(psi_tukey(-1.0), DomainError);
  PsiPtr psi = psi_tukey(4.685);
  CHECK(psi->evaluate(row1(5.0), 0, theta1(0.0))[0] == 0.0);
  double expected = 1.0 * std::pow(1.0 - std::pow(1.0 / 4.685, 2), 2);
  CHECK(expected == doctest::Approx(0.9109562955).epsilon(1e-9));
  CHECK(psi->evaluate(row1(1.0), 0, theta1(0.0))[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(psi->evaluate(row1(0.0), 0, theta1(0.0))[0] == 0.0);
  // near zero the correction is cubic: psi(u) = u - 2u^3/k^2 + ...
  double u = 1e-3;
  CHECK(std::fabs(psi->evaluate(row1(u), 0, theta1(0.0))[0] - u) < 1e-6);
}

TEST_CASE("huber approaches the mean score as c grows") {
  PsiPtr big = psi_huber(1e6);
  PsiPtr mean = psi_mean();
  for (double x : {-3.0, 0.0, 7.0}) {
    CHECK(big->evaluate(row1(x), 0, theta1(0.2))[0] ==
          doctest::Approx(mean->evaluate(row1(x), 0, theta1(0.2))[0]).epsilon(1e-12));
  }
}

TEST_CASE("analytic jacobians agree with central differences on random points") {
  RngStream rng(314);
  std::vector<PsiPtr> psis = {psi_mean(), psi_huber(1.345), psi_tukey(4.685)};
  for (const PsiPtr& psi : psis) {
    for (int trial = 0; trial < 100; ++trial) {
      double x = rng.normal(0.0, 2.0);
      double t = rng.normal(0.0, 1.0);
      Dataset d = row1(x);
      double h = 1e-6;
      double up = psi->evaluate(d, 0, theta1(t + h))[0];
      double dn = psi->evaluate(d, 0, theta1(t - h))[0];
      double numeric = (up - dn) / (2.0 * h);
      double analytic = psi->jacobian(d, 0, theta1(t))(0, 0);
      // kink neighbourhoods excluded: the derivative jump makes the
      // comparison meaningless within h of the threshold
      if (std::fabs(std::fabs(x - t) - 1.345) < 1e-4) continue;
      if (std::fabs(std::fabs(x - t) - 4.685) < 1e-4) continue;
      CHECK(std::fabs(numeric - analytic) <= 1e-5 * std::max(1.0, std::fabs(analytic)));
    }
  }
}

TEST_CASE("glm quasi-score for the poisson log link") {
  CHECK_THROWS_AS(psi_glm("identity", "normal"), DomainError);
  PsiPtr psi = psi_glm();
  Dataset d = generate_contaminated_poisson(40, {0.5, 2.2, 1.2}, {}, 9);
  Eigen::VectorXd beta(3);
  beta << 0.5, 2.2, 1.2;

  // summand is (y - mu) x
  int i = 7;
  Eigen::VectorXd x = d.design->row(i).transpose();
  double mu = std::exp(x.dot(beta));
  Eigen::VectorXd v = psi->evaluate(d, i, beta);
  CHECK((v - ((*d.response)[i] - mu) * x).lpNorm<Eigen::Infinity>() < 1e-10);

  // zero residual gives a zero summand
  Dataset dz = d;
  (*dz.response)[i] = mu;
  dz.obs(i, 0) = mu;
  CHECK(psi->evaluate(dz, i, beta).lpNorm<Eigen::Infinity>() < 1e-12);

  Dataset plain = Dataset::from_vector({1, 2, 3});
  CHECK_THROWS_AS(psi->evaluate(plain, 0, beta), SchemaError);
}

TEST_CASE("robust glm matches classical glm in the large-c limit") {
  PsiPtr classical = psi_glm();
  PsiPtr robust = psi_glm_robust(1e6);
  ContaminationConfig clean;
  clean.clean_fraction = 1.0;
  Dataset d = generate_contaminated_poisson(60, {0.5, 1.0, 0.6}, clean, 13);
  Eigen::VectorXd beta(3);
  beta << 0.5, 1.0, 0.6;
  Eigen::MatrixXd a = classical->psi_matrix(d, beta);
  Eigen::MatrixXd b = robust->psi_matrix(d, beta);
  // with c this large the clip never fires and the correction vanishes
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("poisson huber expectation matches a wide brute-force sum") {
  auto fast = PoissonHuberExpectation::shared(1.6);
  auto brute = [](double c, double mu) {
    long hi = static_cast<long>(std::ceil(mu + 40.0 * std::sqrt(mu) + 200.0));
    double total = 0.0;
    for (long y = 0; y <= hi; ++y) {
      double lp = y * std::log(mu) - mu - std::lgamma(static_cast<double>(y) + 1.0);
      double r = (y - mu) / std::sqrt(mu);
      double clipped = std::max(-c, std::min(c, r));
      total += std::exp(lp) * clipped;
    }
    return total;
  };
  RngStream rng(2718);
  for (int trial = 0; trial < 25; ++trial) {
    double mu = std::exp(rng.uniform(std::log(1e-6), std::log(2e4)));
    CHECK(std::fabs(fast->value(mu) - brute(1.6, mu)) < 1e-12);
  }
  // near-symmetry limit: expectation tends to 0 for large mu
  CHECK(std::fabs(fast->exact(5e4)) < 0.01);
}

TEST_CASE("unbiasedness monte carlo at the generating model") {
  // location families at Laplace(0.3, 1)
  RngStream rng(515);
  for (const PsiPtr& psi : {psi_mean(), psi_median(), psi_huber(1.345), psi_tukey(4.685)}) {
    const int reps = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < reps; ++i) {
      double v = psi->evaluate(row1(rng.laplace(0.3, 1.0)), 0, theta1(0.3))[0];
      s += v;
      s2 += v * v;
    }
    double mean = s / reps;
    double sd = std::sqrt(s2 / reps - mean * mean);
    CHECK(std::fabs(mean) <= 3.0 * sd / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("glm unbiasedness monte carlo on clean data") {
  // fixed design, responses redrawn per replication
  ContaminationConfig clean;
  clean.clean_fraction = 1.0;
  Eigen::Vector3d beta(0.5, 2.2, 1.2);
  Dataset base = generate_contaminated_poisson(100, beta, clean, 41);
  PsiPtr classical = psi_glm();
  PsiPtr robust = psi_glm_robust(1.6);
  RngStream rng(42);

  const int reps = 1000;
  for (const PsiPtr& psi : {classical, robust}) {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    Eigen::Vector3d acc2 = Eigen::Vector3d::Zero();
    Dataset d = base;
    for (int r = 0; r < reps; ++r) {
      for (int i = 0; i < d.n(); ++i) {
        double mu = std::exp(d.design->row(i).dot(beta));
        double y = static_cast<double>(rng.poisson(mu));
        (*d.response)[i] = y;
        d.obs(i, 0) = y;
      }
      Eigen::VectorXd m = psi->psi_matrix(d, beta).colwise().mean();
      acc += m;
      acc2 += m.cwiseProduct(m);
    }
    for (int j = 0; j < 3; ++j) {
      double mean = acc[j] / reps;
      double sd = std::sqrt(acc2[j] / reps - mean * mean);
      CHECK(std::fabs(mean) <= 3.0 * sd / std::sqrt(static_cast<double>(reps)));
    }
  }
}

TEST_CASE("robust glm m-estimate solves its own equation") {
  Dataset d = generate_contaminated_poisson(120, {0.5, 2.2, 1.2}, {}, 99);
  PsiPtr classical = psi_glm();
  PsiPtr robust = psi_glm_robust(1.6);
  MEstimate fit0 = solve_m_estimate(*classical, d, Eigen::VectorXd::Zero(3));
  MEstimate fit1 = solve_m_estimate(*robust, d, fit0.theta_hat);
  CHECK(fit0.residual_norm <= 1e-8 * d.n());
  CHECK(fit1.residual_norm <= 1e-8 * d.n());
  // the robust fit should sit nearer the truth on contaminated data
  Eigen::Vector3d truth(0.5, 2.2, 1.2);
  CHECK((fit1.theta_hat - truth).norm() < (fit0.theta_hat - truth).norm());
}

TEST_CASE("make_psi factory") {
  CHECK(make_psi("mean", NAN)->label() == "mean");
  CHECK(make_psi("huber", NAN)->label() == "huber");
  CHECK(make_psi("tukey", 3.0)->label() == "biweight");
  CHECK(make_psi("glm-robust", NAN)->label() == "glm-robust");
  CHECK_THROWS_AS(make_psi("unknown", NAN), DomainError);
}
