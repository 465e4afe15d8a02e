#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "crel/dataset.hpp"
#include "crel/errors.hpp"
#include "crel/models.hpp"
#include "crel/stats.hpp"

using namespace crel;

TEST_CASE("generators are pure functions of the seed") {
  Dataset a = generate_laplace(1, 0.0, 99);
  Dataset b = generate_laplace(1, 0.0, 99);
  CHECK(a.obs(0, 0) == b.obs(0, 0));

  Dataset c = generate_contaminated_poisson(50, {0.5, 2.2, 1.2}, {}, 7);
  Dataset d = generate_contaminated_poisson(50, {0.5, 2.2, 1.2}, {}, 7);
  CHECK((c.obs - d.obs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("laplace sample median approaches the location") {
  Dataset big = generate_laplace(100000, 3.0, 11);
  std::vector<double> x(big.obs.col(0).data(), big.obs.col(0).data() + big.n());
  // asymptotic sd of the median is 1/sqrt(n); allow three of them
  CHECK(std::fabs(stats::median(x) - 3.0) < 0.02);
  double mean = big.obs.col(0).mean();
  double var = (big.obs.col(0).array() - mean).square().sum() / big.n();
  CHECK(var == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("contaminated poisson respects the clean fraction and rounding") {
  ContaminationConfig cfg;
  Dataset data = generate_contaminated_poisson(10000, {0.5, 2.2, 1.2}, cfg, 21);
  int outliers = 0;
  for (int i = 0; i < data.n(); ++i) {
    double y = (*data.response)[i];
    CHECK(y >= 0.0);
    CHECK(y == std::round(y));
    if (y >= 42.0 && y <= 43.0) ++outliers;
  }
  // some clean draws can also land on 42/43, so this is a loose band
  double share = static_cast<double>(outliers) / data.n();
  CHECK(std::fabs(share - 0.10) < 0.015);
}

TEST_CASE("standardized covariates have mean zero and unit variance") {
  Dataset data = generate_contaminated_poisson(500, {0.5, 2.2, 1.2}, {}, 5);
  for (int j = 1; j <= 2; ++j) {
    double mean = data.design->col(j).mean();
    double var = (data.design->col(j).array() - mean).square().sum() / data.n();
    CHECK(std::fabs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK((data.design->col(0).array() == 1.0).all());
}

TEST_CASE("ecdf") {
  Dataset data = Dataset::from_vector({1, 2, 3, 4});
  CHECK(ecdf(data, 2.5) == doctest::Approx(0.5));
  CHECK(ecdf(data, 0.9) == 0.0);
  CHECK(ecdf(data, 4.0) == 1.0);
  CHECK(ecdf(data, 2.0) == doctest::Approx(0.5));  // boundary point counts
}

TEST_CASE("analytic information matches numeric second derivatives for smooth models") {
  ModelPtr normal = normal_model(1.3);
  Dataset data = generate_normal(200, 0.4, 1.3, 17);
  Eigen::VectorXd th(1);
  th[0] = 0.25;
  double h = 1e-4;
  auto neg_mean_loglik = [&](const ModelPtr& m, const Dataset& ds, double t) {
    Eigen::VectorXd tv(1);
    tv[0] = t;
    double s = 0.0;
    for (int i = 0; i < ds.n(); ++i) s -= m->log_density(ds.obs.row(i).transpose(), tv);
    return s / ds.n();
  };
  double numeric = (neg_mean_loglik(normal, data, th[0] + h) -
                    2.0 * neg_mean_loglik(normal, data, th[0]) +
                    neg_mean_loglik(normal, data, th[0] - h)) /
                   (h * h);
  CHECK(numeric == doctest::Approx(normal->info2(th)(0, 0)).epsilon(1e-5));

  ModelPtr expm = exponential_model();
  Dataset ed = generate_exponential(150, 1.0, 23);
  Eigen::VectorXd te(1);
  te[0] = 1.1;
  double numeric_e =
      (neg_mean_loglik(expm, ed, te[0] + h) - 2.0 * neg_mean_loglik(expm, ed, te[0]) +
       neg_mean_loglik(expm, ed, te[0] - h)) /
      (h * h);
  CHECK(numeric_e == doctest::Approx(expm->observed_info(ed, te)(0, 0)).epsilon(1e-4));
}

TEST_CASE("laplace model reports the expected information") {
  ModelPtr lap = laplace_model();
  Dataset data = generate_laplace(50, 0.0, 3);
  Eigen::VectorXd th(1);
  th[0] = 0.1;
  CHECK(lap->info2(th)(0, 0) == 1.0);
  CHECK(lap->observed_info(data, th)(0, 0) == 1.0);
  std::vector<double> col(data.obs.col(0).data(), data.obs.col(0).data() + data.n());
  CHECK(lap->mle(data)[0] == doctest::Approx(stats::median(col)));
}

TEST_CASE("exponential family score identity is exact") {
  for (const char* name : {"exponential", "normal", "poisson"}) {
    ExponentialFamilyModel fam = expfam_by_name(name);
    for (double theta : {0.5, 1.0, 2.5}) {
      double vartheta = fam.natural_param(theta);
      CHECK(std::fabs(fam.mean_param(vartheta) - theta) < 1e-12);
      for (double y : {0.0, 1.0, 3.0}) {
        double x = fam.sufficient_stat(y);
        CHECK(std::fabs((x - fam.mean_param(vartheta)) - (x - theta)) < 1e-12);
      }
    }
  }
}

TEST_CASE("priors expose consistent derivatives and modes") {
  PriorPtr p = normal_prior(0.7, 2.0);
  Eigen::VectorXd m = p->mode();
  CHECK(p->grad_xi(m).lpNorm<Eigen::Infinity>() < 1e-6);
  Eigen::VectorXd th(1);
  th[0] = 1.5;
  double h = 1e-6;
  Eigen::VectorXd up(1), dn(1);
  up[0] = th[0] + h;
  dn[0] = th[0] - h;
  CHECK((p->xi(up) - p->xi(dn)) / (2 * h) == doctest::Approx(p->grad_xi(th)[0]).epsilon(1e-6));
  CHECK(p->hess_xi(th)(0, 0) == doctest::Approx(-0.25));

  PriorPtr f = flat_prior(2);
  CHECK(f->xi(Eigen::VectorXd::Zero(2)) == 0.0);
  CHECK(f->hess_xi(Eigen::VectorXd::Zero(2)).norm() == 0.0);
}

TEST_CASE("csv round trip and schema errors") {
  std::string path = "/tmp/crel_test_roundtrip.csv";
  Dataset d = generate_contaminated_poisson(25, {0.5, 2.2, 1.2}, {}, 31);
  save_csv(path, d);
  Dataset back = load_csv(path);
  REQUIRE(back.has_glm());
  CHECK((back.obs - d.obs).cwiseAbs().maxCoeff() < 1e-9);

  std::ofstream bad(path);
  bad << "v1\n1\nnot_a_number\n";
  bad.close();
  CHECK_THROWS_AS(load_csv(path), ParseError);
  std::remove(path.c_str());

  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  Dataset half;
  half.obs = Eigen::MatrixXd::Zero(3, 1);
  half.response = y;
  CHECK_THROWS_AS(half.validate(), SchemaError);
}
