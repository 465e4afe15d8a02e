#include "crel/expansion.hpp"

#include <cmath>

#include "crel/errors.hpp"
#include "crel/stats.hpp"

namespace crel {

namespace {

double fd_step1(double x) { return std::max(1e-5, 1e-5 * std::fabs(x)); }
double fd_step2(double x) { return std::max(1e-4, 1e-4 * std::fabs(x)); }

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success)
    throw SingularityError(std::string(what) + ": matrix not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

std::pair<double, double> h_coeffs(double gamma) {
  if (gamma == -1.0) return {0.75, 0.25};
  return {(4.0 - gamma * gamma) / 4.0, (2.0 - gamma * gamma) / 4.0};
}

MomentTensors compute_tensors(const Dataset& data, const EstimatingFunction& psi,
                              const Eigen::VectorXd& theta) {
  MomentTensors t;
  Eigen::MatrixXd pm = psi.psi_matrix(data, theta);
  t.n = static_cast<int>(pm.rows());
  t.d = static_cast<int>(pm.cols());
  const int n = t.n, d = t.d;

  t.omega = (pm.transpose() * pm) / n;
  t.omega = 0.5 * (t.omega + t.omega.transpose());
  t.omega_inv = spd_inverse(t.omega, "compute_tensors: omega");

  t.v1 = -psi.mean_jacobian(data, theta);

  // second derivatives of the psi average, central differences
  t.v2 = Tensor3(d);
  {
    Eigen::VectorXd base = psi.mean_value(data, theta);
    Eigen::VectorXd th = theta;
    for (int r = 0; r < d; ++r) {
      double hr = fd_step2(theta[r]);
      for (int s = r; s < d; ++s) {
        Eigen::VectorXd der(d);
        if (s == r) {
          th[r] = theta[r] + hr;
          Eigen::VectorXd up = psi.mean_value(data, th);
          th[r] = theta[r] - hr;
          Eigen::VectorXd dn = psi.mean_value(data, th);
          th[r] = theta[r];
          der = (up - 2.0 * base + dn) / (hr * hr);
        } else {
          double hs = fd_step2(theta[s]);
          th[r] = theta[r] + hr;
          th[s] = theta[s] + hs;
          Eigen::VectorXd pp = psi.mean_value(data, th);
          th[s] = theta[s] - hs;
          Eigen::VectorXd pn = psi.mean_value(data, th);
          th[r] = theta[r] - hr;
          Eigen::VectorXd nn = psi.mean_value(data, th);
          th[s] = theta[s] + hs;
          Eigen::VectorXd np = psi.mean_value(data, th);
          th[r] = theta[r];
          th[s] = theta[s];
          der = (pp - pn - np + nn) / (4.0 * hr * hs);
        }
        for (int k = 0; k < d; ++k) {
          t.v2(k, r, s) = -der[k];
          t.v2(k, s, r) = -der[k];
        }
      }
    }
  }

  // d (Omega^-1) / d theta by central differences of the inverse
  t.omega_deriv = Tensor3(d);
  {
    Eigen::VectorXd th = theta;
    for (int r = 0; r < d; ++r) {
      double h = fd_step1(theta[r]);
      th[r] = theta[r] + h;
      Eigen::MatrixXd pu = psi.psi_matrix(data, th);
      Eigen::MatrixXd up = spd_inverse((pu.transpose() * pu) / n, "compute_tensors: omega+");
      th[r] = theta[r] - h;
      Eigen::MatrixXd pd = psi.psi_matrix(data, th);
      Eigen::MatrixXd dn = spd_inverse((pd.transpose() * pd) / n, "compute_tensors: omega-");
      th[r] = theta[r];
      Eigen::MatrixXd der = (up - dn) / (2.0 * h);
      der = 0.5 * (der + der.transpose());
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) t.omega_deriv(k, l, r) = der(k, l);
    }
  }

  t.alpha3 = Tensor3(d);
  t.alpha4 = Tensor4(d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l)
        for (int m = 0; m < d; ++m) {
          double v = pm(i, k) * pm(i, l) * pm(i, m);
          t.alpha3(k, l, m) += v;
          for (int o = 0; o < d; ++o) t.alpha4(k, l, m, o) += v * pm(i, o);
        }
  }
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l)
      for (int m = 0; m < d; ++m) {
        t.alpha3(k, l, m) /= n;
        for (int o = 0; o < d; ++o) t.alpha4(k, l, m, o) /= n;
      }

  t.K = t.v1.transpose() * t.omega_inv * t.v1;
  t.K = 0.5 * (t.K + t.K.transpose());
  t.nu_inv = spd_inverse(t.K, "compute_tensors: K");
  Eigen::LLT<Eigen::MatrixXd> llt(t.nu_inv);
  if (llt.info() != Eigen::Success)
    throw SingularityError("compute_tensors: K^-1 Cholesky failed");
  t.tau = llt.matrixL();
  return t;
}

double gelr_expansion(const MomentTensors& t, const Eigen::VectorXd& psi_bar, double gamma,
                      int order) {
  if (order < 1 || order > 3) throw DomainError("gelr_expansion: order must be 1, 2 or 3");
  const int d = t.d;
  Eigen::VectorXd u = t.omega_inv * psi_bar;
  double value = psi_bar.dot(u);
  if (order >= 2) {
    double cubic = 0.0;
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l)
        for (int m = 0; m < d; ++m) cubic += u[k] * u[l] * u[m] * t.alpha3(k, l, m);
    value += (2.0 / 3.0) * cubic;
  }
  if (order >= 3) {
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(d);
    for (int o = 0; o < d; ++o)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) pi[o] += u[k] * u[l] * t.alpha3(k, l, o);
    double quart = 0.0;
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          for (int m = 0; m < d; ++m)
            quart += u[j] * u[k] * u[l] * u[m] * t.alpha4(j, k, l, m);
    auto [h1, h2] = h_coeffs(gamma);
    value += h1 * pi.dot(t.omega_inv * pi) - h2 * quart;
  }
  return t.n * value;
}

Tensor3 G_tensor(const MomentTensors& t) {
  const int d = t.d;
  Eigen::MatrixXd W = t.omega_inv * t.v1;  // (k, r)
  Tensor3 G(d);
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int tt = 0; tt < d; ++tt) {
        double term1 = 0.0, term2 = 0.0, term3 = 0.0;
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) {
            term1 += t.v1(k, r) * t.v2(l, s, tt) * t.omega_inv(k, l);
            term2 += t.v1(k, r) * t.v1(l, s) * t.omega_deriv(k, l, tt);
            for (int m = 0; m < d; ++m)
              term3 += W(k, r) * W(l, s) * W(m, tt) * t.alpha3(k, l, m);
          }
        G(r, s, tt) = term1 + term2 - (2.0 / 3.0) * term3;
      }
  return G.symmetrized();
}

Tensor4 J_tensor(const MomentTensors& t, double gamma) {
  const int d = t.d;
  Eigen::MatrixXd W = t.omega_inv * t.v1;
  auto [h1, h2] = h_coeffs(gamma);

  // C(o,l,o',l') = sum_{t,z} alpha3(o,l,t) omega^{tz} alpha3(o',l',z)
  Tensor4 C(d);
  for (int o = 0; o < d; ++o)
    for (int l = 0; l < d; ++l)
      for (int o2 = 0; o2 < d; ++o2)
        for (int l2 = 0; l2 < d; ++l2) {
          double s = 0.0;
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
              s += t.alpha3(o, l, a) * t.omega_inv(a, b) * t.alpha3(o2, l2, b);
          C(o, l, o2, l2) = s;
        }

  Tensor4 J(d);
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int tt = 0; tt < d; ++tt)
        for (int w = 0; w < d; ++w) {
          double acc = 0.0;
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
              for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e)
                  acc += W(a, r) * W(b, s) * W(c, tt) * W(e, w) *
                         (h1 * C(a, b, c, e) - h2 * t.alpha4(a, b, c, e));
          J(r, s, tt, w) = acc;
        }
  return J.symmetrized();
}

ExpansionCoeffs expansion_coeffs(const MomentTensors& t, double gamma) {
  ExpansionCoeffs c;
  c.G = G_tensor(t);
  c.J = J_tensor(t, gamma);
  auto [h1, h2] = h_coeffs(gamma);
  c.h1 = h1;
  c.h2 = h2;
  return c;
}

double quantile_expansion_first(const Eigen::VectorXd& theta_hat, const MomentTensors& t,
                                double alpha, int n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile_expansion: alpha outside (0,1)");
  return theta_hat[0] + stats::normal_quantile(alpha) * std::sqrt(t.nu_inv(0, 0) / n);
}

double quantile_expansion_higher(const Eigen::VectorXd& theta_hat, const MomentTensors& t,
                                 const ExpansionCoeffs& coeffs, const Prior& prior, double alpha,
                                 int n, double gamma) {
  (void)gamma;
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile_expansion: alpha outside (0,1)");
  const int d = t.d;
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  double T1 = 0.0, T2 = 0.0, T3 = 0.0;
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int u = 0; u < d; ++u) {
        T1 += t.tau(r, 0) * t.tau(s, 0) * t.tau(u, 0) * coeffs.G(r, s, u);
        for (int a = 1; a < d; ++a)
          T2 += t.tau(r, 0) * t.tau(s, a) * t.tau(u, a) * coeffs.G(r, s, u);
        for (int w = 0; w < d; ++w)
          T3 += t.tau(r, 0) * t.tau(s, 0) * t.tau(u, 0) * t.tau(w, 0) * coeffs.J(r, s, u, w);
      }

  Eigen::VectorXd m0 = prior.mode();
  Eigen::MatrixXd xi2 = prior.hess_xi(m0);
  double P = 0.0;
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s) P += t.tau(r, 0) * (theta_hat[s] - m0[s]) * xi2(r, s);

  const double c0 = (T1 + 1.5 * T2 - P) / sqrt_n;
  const double c2 = 0.5 * T1 / sqrt_n;
  const double c3 = 0.5 * T3 / n;
  auto ztilde = [&](double eta) { return eta + c0 + c2 * eta * eta + c3 * eta * eta * eta; };
  auto dztilde = [&](double eta) { return 1.0 + 2.0 * c2 * eta + 3.0 * c3 * eta * eta; };

  // quantile levels of interest keep eta within a few units; a wide bracket
  // would reject any sample whose quartic coefficient is slightly negative
  const double z = stats::normal_quantile(alpha);
  double lo = -6.0, hi = 6.0;
  if (dztilde(lo) <= 0.0 || dztilde(hi) <= 0.0 ||
      (c3 != 0.0 && std::fabs(-c2 / (3.0 * c3)) < 12.0 && dztilde(-c2 / (3.0 * c3)) <= 0.0))
    throw ExpansionError("quantile_expansion_higher: pivot not monotone on bracket");
  if (ztilde(lo) > z || ztilde(hi) < z)
    throw ExpansionError("quantile_expansion_higher: quantile outside bracket");

  double eta = z - c0;  // decent start
  for (int it = 0; it < 100; ++it) {
    double f = ztilde(eta) - z;
    if (std::fabs(f) < 1e-13) break;
    double df = dztilde(eta);
    double cand = eta - f / df;
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    if (ztilde(cand) > z)
      hi = std::min(hi, cand);
    else
      lo = std::max(lo, cand);
    eta = cand;
  }
  return theta_hat[0] + std::sqrt(t.nu_inv(0, 0) / n) * eta;
}

double z_n(double theta01, const Eigen::VectorXd& theta_hat, const MomentTensors& t, int n) {
  return std::sqrt(static_cast<double>(n)) * (theta01 - theta_hat[0]) /
         std::sqrt(t.nu_inv(0, 0));
}

}  // namespace crel
