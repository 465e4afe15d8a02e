#include "crel/crel_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crel/errors.hpp"

namespace crel {

namespace {

constexpr double kBranchEps = 1e-6;   // gamma routing width around 0 and -1
constexpr double kDomainFloor = 1e-10;

enum class Branch { EL, ET, General };

Branch pick_branch(double gamma) {
  if (std::fabs(gamma) < kBranchEps) return Branch::EL;
  if (std::fabs(gamma + 1.0) < kBranchEps) return Branch::ET;
  return Branch::General;
}

// phase-1 simplex: does {q >= 0 : Aq = b} have a solution?
bool lp_feasible(Eigen::MatrixXd A, Eigen::VectorXd b) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  double scale = std::max(A.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (scale > 0) {
    A /= scale;
    b /= scale;
  }
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0) {
      A.row(i) = -A.row(i);
      b[i] = -b[i];
    }
  }
  // columns: n structural, m artificial, rhs
  Eigen::MatrixXd T(m, n + m + 1);
  T.leftCols(n) = A;
  T.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  T.col(n + m) = b;
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  const double eps = 1e-11;
  for (int iter = 0; iter < 20000; ++iter) {
    // reduced cost of structural column j: -sum over artificial basic rows of
    // T(i,j); artificials never re-enter
    int enter = -1;
    for (int j = 0; j < n; ++j) {
      double dual = 0.0;
      for (int i = 0; i < m; ++i)
        if (basis[i] >= n) dual += T(i, j);
      if (-dual < -eps) {
        enter = j;  // Bland's rule: first improving column
        break;
      }
    }
    if (enter < 0) break;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (T(i, enter) > eps) {
        double ratio = T(i, n + m) / T(i, enter);
        if (ratio < best - 1e-15 || (std::fabs(ratio - best) <= 1e-15 &&
                                     (leave < 0 || basis[i] < basis[leave]))) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) break;  // unbounded column; cannot happen in phase 1
    double piv = T(leave, enter);
    T.row(leave) /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == leave) continue;
      double f = T(i, enter);
      if (f != 0.0) T.row(i) -= f * T.row(leave);
    }
    basis[leave] = enter;
  }
  double objective = 0.0;
  for (int i = 0; i < m; ++i)
    if (basis[i] >= n) objective += T(i, n + m);
  return objective <= 1e-9;
}

Eigen::VectorXd raw_weights(const Eigen::MatrixXd& psi, const Eigen::VectorXd& lambda,
                            Branch branch, double gamma) {
  const int n = static_cast<int>(psi.rows());
  Eigen::VectorXd u = Eigen::VectorXd::Ones(n) + psi * lambda;
  Eigen::VectorXd w(n);
  switch (branch) {
    case Branch::EL:
      for (int i = 0; i < n; ++i) w[i] = 1.0 / u[i];
      break;
    case Branch::ET: {
      Eigen::VectorXd e = psi * lambda;
      double shift = e.maxCoeff();
      for (int i = 0; i < n; ++i) w[i] = std::exp(e[i] - shift);
      break;
    }
    case Branch::General: {
      double expo = -1.0 / (gamma + 1.0);
      for (int i = 0; i < n; ++i) w[i] = std::exp(expo * std::log(u[i]));
      break;
    }
  }
  return w / w.sum();
}

}  // namespace

bool convex_hull_check(const Eigen::MatrixXd& psi) {
  const int n = static_cast<int>(psi.rows());
  const int d = static_cast<int>(psi.cols());
  if (n == 0) return false;
  double scale = psi.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;  // all-zero rows are degenerate-feasible
  if (d == 1) {
    return psi.col(0).minCoeff() < 0.0 && psi.col(0).maxCoeff() > 0.0;
  }
  // strictly positive combination summing to zero: p >= 1 via q = p - 1 >= 0
  Eigen::MatrixXd A = psi.transpose();
  Eigen::VectorXd b = -psi.colwise().sum().transpose();
  return lp_feasible(std::move(A), std::move(b));
}

LambdaSolution solve_lambda(const Eigen::MatrixXd& psi, double gamma) {
  if (!convex_hull_check(psi)) throw HullError("solve_lambda: 0 outside the convex hull");
  const int n = static_cast<int>(psi.rows());
  const int d = static_cast<int>(psi.cols());
  const Branch branch = pick_branch(gamma);
  const double expo = (branch == Branch::General) ? -1.0 / (gamma + 1.0) : 0.0;
  const double psi_scale = std::max(1.0, psi.cwiseAbs().maxCoeff());
  const double tol = 1e-10 * psi_scale;

  // estimating equation for lambda and its jacobian, un-normalized
  auto residual = [&](const Eigen::VectorXd& lambda, Eigen::VectorXd& g, bool& ok) {
    Eigen::VectorXd u = Eigen::VectorXd::Ones(n) + psi * lambda;
    g.setZero(d);
    ok = true;
    switch (branch) {
      case Branch::EL:
        for (int i = 0; i < n; ++i) {
          if (u[i] <= kDomainFloor) {
            ok = false;
            return;
          }
          g += psi.row(i).transpose() / u[i];
        }
        break;
      case Branch::ET:
        for (int i = 0; i < n; ++i) {
          double e = psi.row(i) * lambda;
          if (e > 700.0) {
            ok = false;
            return;
          }
          g += psi.row(i).transpose() * std::exp(e);
        }
        break;
      case Branch::General:
        for (int i = 0; i < n; ++i) {
          if (u[i] <= kDomainFloor) {
            ok = false;
            return;
          }
          double le = expo * std::log(u[i]);
          if (le > 700.0) {
            ok = false;
            return;
          }
          g += psi.row(i).transpose() * std::exp(le);
        }
        break;
    }
    g /= n;
  };

  auto jacobian = [&](const Eigen::VectorXd& lambda) -> Eigen::MatrixXd {
    Eigen::VectorXd u = Eigen::VectorXd::Ones(n) + psi * lambda;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, d);
    switch (branch) {
      case Branch::EL:
        for (int i = 0; i < n; ++i)
          J -= psi.row(i).transpose() * psi.row(i) / (u[i] * u[i]);
        break;
      case Branch::ET:
        for (int i = 0; i < n; ++i)
          J += psi.row(i).transpose() * psi.row(i) * std::exp(psi.row(i) * lambda);
        break;
      case Branch::General:
        for (int i = 0; i < n; ++i)
          J += expo * std::exp((expo - 1.0) * std::log(u[i])) * psi.row(i).transpose() *
               psi.row(i);
        break;
    }
    return J / n;
  };

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd g;
  bool ok = true;
  residual(lambda, g, ok);
  double best_res = std::numeric_limits<double>::infinity();

  LambdaSolution sol;
  sol.gamma = gamma;
  for (int it = 0; it <= 200; ++it) {
    Eigen::VectorXd w = raw_weights(psi, lambda, branch, gamma);
    double res = (psi.transpose() * w).lpNorm<Eigen::Infinity>();
    best_res = std::min(best_res, res);
    if (res <= tol) {
      sol.lambda = lambda;
      sol.residual_norm = res;
      sol.iterations = it;
      Eigen::VectorXd u = Eigen::VectorXd::Ones(n) + psi * lambda;
      sol.in_domain = u.minCoeff() > 0.0;
      if (branch == Branch::EL)
        sol.in_domain = sol.in_domain && u.minCoeff() >= 1.0 / n - 1e-12;
      return sol;
    }
    if (it == 200) break;
    Eigen::MatrixXd J = jacobian(lambda);
    Eigen::VectorXd step = J.fullPivLu().solve(-g);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      Eigen::VectorXd cand = lambda + t * step;
      Eigen::VectorXd gc;
      bool okc = true;
      residual(cand, gc, okc);
      if (okc && gc.allFinite() && gc.norm() < g.norm()) {
        lambda = cand;
        g = gc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  throw ConvergenceError("solve_lambda: no convergence, best residual " +
                         std::to_string(best_res));
}

CRWeights weights_from_lambda(const Eigen::MatrixXd& psi, const LambdaSolution& solution) {
  CRWeights w;
  w.gamma = solution.gamma;
  w.weights = raw_weights(psi, solution.lambda, pick_branch(solution.gamma), solution.gamma);
  return w;
}

GELRValue gelr_from_matrix(const Eigen::MatrixXd& psi, double gamma) {
  GELRValue out;
  LambdaSolution sol;
  try {
    sol = solve_lambda(psi, gamma);
  } catch (const HullError&) {
    out.value = std::numeric_limits<double>::infinity();
    out.hull_ok = false;
    return out;
  }
  CRWeights w = weights_from_lambda(psi, sol);
  const double n = static_cast<double>(psi.rows());
  double s = 0.0;
  for (int i = 0; i < w.weights.size(); ++i) s += std::log(n * w.weights[i]);
  out.value = -2.0 * s;
  out.hull_ok = true;
  return out;
}

GELRValue gelr(const Dataset& data, const EstimatingFunction& psi,
               const Eigen::VectorXd& theta, double gamma) {
  return gelr_from_matrix(psi.psi_matrix(data, theta), gamma);
}

GELRValue gelr_median_closed_form(const Dataset& data, double theta) {
  const double f = ecdf(data, theta);
  GELRValue out;
  if (f <= 0.0 || f >= 1.0) {
    out.value = std::numeric_limits<double>::infinity();
    out.hull_ok = false;
    return out;
  }
  const double n = static_cast<double>(data.n());
  out.value = -2.0 * (n * f * std::log(0.5 / f) + n * (1.0 - f) * std::log(0.5 / (1.0 - f)));
  out.hull_ok = true;
  return out;
}

std::vector<ProfilePoint> profile_curve(const Dataset& data, const EstimatingFunction& psi,
                                        const std::vector<double>& grid, double gamma,
                                        bool laplace_parametric) {
  std::vector<ProfilePoint> out;
  out.reserve(grid.size());
  double med = 0.0;
  if (laplace_parametric) {
    std::vector<double> x(data.obs.col(0).data(), data.obs.col(0).data() + data.n());
    std::sort(x.begin(), x.end());
    med = (x.size() % 2 == 1) ? x[x.size() / 2]
                              : 0.5 * (x[x.size() / 2 - 1] + x[x.size() / 2]);
  }
  Eigen::VectorXd th(1);
  for (double t : grid) {
    ProfilePoint p;
    p.theta = t;
    th[0] = t;
    p.gelr = gelr(data, psi, th, gamma).value;
    if (laplace_parametric) {
      double s = 0.0;
      for (int i = 0; i < data.n(); ++i)
        s += std::fabs(data.obs(i, 0) - t) - std::fabs(data.obs(i, 0) - med);
      p.parametric = 2.0 * s;
      p.has_parametric = true;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace crel
