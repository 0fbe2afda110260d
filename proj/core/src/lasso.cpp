#include "icl/lasso.hpp"

#include <cmath>
#include <ostream>

namespace icl {

namespace {

void check_rho(const LassoProblem& problem, const Vec& rho) {
  if (rho.size() != problem.p())
    throw Error(ErrorKind::DimensionMismatch, "coefficient length differs from feature count");
}

double largest_eigenvalue(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

void LassoProblem::validate() const {
  if (phi.rows() < 1 || phi.cols() < 1) throw Error(ErrorKind::DimensionMismatch, "empty design matrix");
  if (y.size() != phi.rows()) throw Error(ErrorKind::DimensionMismatch, "label count differs from N");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw Error(ErrorKind::InvalidConfig, "lambda must be >= 0");
  if (!(eta > 0) || !std::isfinite(eta)) throw Error(ErrorKind::InvalidConfig, "eta must be > 0");
  if (!phi.allFinite() || !y.allFinite()) throw Error(ErrorKind::InvalidConfig, "non-finite problem data");
  if (phi.minCoeff() < 0 || phi.maxCoeff() > 1)
    throw Error(ErrorKind::InvalidConfig, "feature entries must lie in [0, 1]");
  if ((phi.col(phi.cols() - 1).array() != 1.0).any())
    throw Error(ErrorKind::InvalidConfig, "last feature column must be all ones");
}

double soft_threshold(double z, double kappa) {
  if (kappa < 0) throw Error(ErrorKind::NegativeThreshold, "threshold must be >= 0");
  const double m = std::abs(z) - kappa;
  if (!(m > 0)) return 0.0;
  return z < 0 ? -m : m;
}

Vec soft_threshold(const Vec& z, double kappa) {
  if (kappa < 0) throw Error(ErrorKind::NegativeThreshold, "threshold must be >= 0");
  Vec out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = soft_threshold(z[i], kappa);
  return out;
}

double lasso_objective(const LassoProblem& problem, const Vec& rho) {
  check_rho(problem, rho);
  const Vec r = problem.y - problem.phi * rho;
  return r.squaredNorm() / problem.N() + problem.lambda * rho.lpNorm<1>();
}

Vec lasso_gradient(const LassoProblem& problem, const Vec& rho) {
  check_rho(problem, rho);
  return -(2.0 / problem.N()) * (problem.phi.transpose() * (problem.y - problem.phi * rho));
}

Vec ista_step(const LassoProblem& problem, const Vec& rho) {
  check_rho(problem, rho);
  const Vec z = rho + (2.0 * problem.eta / problem.N()) *
                          (problem.phi.transpose() * (problem.y - problem.phi * rho));
  return soft_threshold(z, problem.eta * problem.lambda);
}

Vec ista_step(const LassoProblem& problem, const Vec& rho, const Vec& e_next) {
  if (e_next.size() != rho.size()) throw Error(ErrorKind::DimensionMismatch, "residual length differs");
  return ista_step(problem, rho) + e_next;
}

LassoTrajectory run_ista(const LassoProblem& problem, int T, const ResidualSource& residuals) {
  if (T < 0) throw Error(ErrorKind::InvalidConfig, "iteration count must be >= 0");
  LassoTrajectory traj;
  Vec rho = Vec::Zero(problem.p());
  traj.iterates.push_back(rho);
  traj.injected_residuals.push_back(Vec::Zero(problem.p()));
  traj.objectives.push_back(lasso_objective(problem, rho));
  for (int t = 1; t <= T; ++t) {
    Vec e = residuals ? residuals(t, rho) : Vec::Zero(problem.p());
    rho = ista_step(problem, rho, e);
    traj.iterates.push_back(rho);
    traj.injected_residuals.push_back(std::move(e));
    traj.objectives.push_back(lasso_objective(problem, rho));
  }
  return traj;
}

double kkt_residual(const LassoProblem& problem, const Vec& rho) {
  const Vec g = lasso_gradient(problem, rho);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < rho.size(); ++j) {
    double r;
    if (rho[j] != 0.0)
      r = std::abs(g[j] + problem.lambda * (rho[j] > 0 ? 1.0 : -1.0));
    else
      r = std::max(std::abs(g[j]) - problem.lambda, 0.0);
    worst = std::max(worst, r);
  }
  return worst;
}

Vec oracle_solve(const LassoProblem& problem, double tol, long max_iter) {
  if (!(tol > 0)) throw Error(ErrorKind::InvalidConfig, "tolerance must be > 0");
  const int N = problem.N();
  const Mat gram = problem.phi.transpose() * problem.phi / N;
  const Vec b = problem.phi.transpose() * problem.y / N;
  const double yy = problem.y.squaredNorm() / N;
  const double lip = 2.0 * std::max(largest_eigenvalue(gram), 1e-300);

  auto smooth = [&](const Vec& r) { return r.dot(gram * r) - 2.0 * b.dot(r) + yy; };
  auto grad = [&](const Vec& r) -> Vec { return 2.0 * (gram * r - b); };
  auto objective = [&](const Vec& r) { return smooth(r) + problem.lambda * r.lpNorm<1>(); };

  // Solves the stationarity equations on the support of `x` with its signs
  // fixed. FISTA finds the support long before small coordinates settle, so
  // this certifies degenerate (p > N) instances much sooner.
  std::vector<int> polished_support;
  auto polish = [&](const Vec& x, Vec& out) {
    std::vector<int> support;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (x[j] != 0.0) support.push_back(static_cast<int>(j));
    if (support.empty() || support == polished_support) return false;
    polished_support = support;
    const auto k = static_cast<Eigen::Index>(support.size());
    Mat G(k, k);
    Vec rhs(k), xs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      xs[a] = x[support[a]];
      rhs[a] = b[support[a]] - 0.5 * problem.lambda * (xs[a] > 0 ? 1.0 : -1.0);
      for (Eigen::Index c = 0; c < k; ++c) G(a, c) = gram(support[a], support[c]);
    }
    // Minimum-norm correction keeps the polished point near x when G is singular.
    const Vec delta = G.completeOrthogonalDecomposition().solve(rhs - G * xs);
    out = Vec::Zero(x.size());
    for (Eigen::Index a = 0; a < k; ++a) {
      const double v = xs[a] + delta[a];
      if ((v > 0) != (xs[a] > 0) || v == 0.0) return false;
      out[support[a]] = v;
    }
    return kkt_residual(problem, out) <= tol;
  };

  Vec x = Vec::Zero(problem.p());
  Vec z = x;
  double tk = 1.0;
  double step = 1.0 / lip;
  double fx = objective(x);
  Vec polished;
  for (long it = 0; it < max_iter; ++it) {
    if (it % 16 == 0) {
      if (kkt_residual(problem, x) <= tol) return x;
      if (polish(x, polished)) return polished;
    }
    Vec next;
    // Backtracking keeps the quadratic upper bound valid if the eigenvalue
    // estimate is off.
    while (true) {
      const Vec gz = grad(z);
      next = soft_threshold(z - step * gz, step * problem.lambda);
      const Vec d = next - z;
      if (smooth(next) <= smooth(z) + gz.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15 * std::abs(smooth(z)))
        break;
      step *= 0.5;
    }
    const double fn = objective(next);
    if (fn > fx && tk > 1.0) {
      // Adaptive restart drops momentum on objective increase.
      z = x;
      tk = 1.0;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    z = next + ((tk - 1.0) / tn) * (next - x);
    x = next;
    fx = fn;
    tk = tn;
  }
  if (kkt_residual(problem, x) <= tol) return x;
  throw Error(ErrorKind::NoConvergence, "oracle_solve did not reach tol " + format_double(tol) +
                                            " within " + std::to_string(max_iter) + " iterations");
}

double default_lambda(double N, double sigma_hat, double C_F, double eps_dis, double eps_hat, double c1) {
  if (!(N >= 2) || sigma_hat < 0 || C_F < 0 || eps_dis < 0 || eps_hat < 0 || c1 < 0)
    throw Error(ErrorKind::InvalidConfig, "default_lambda needs N >= 2 and nonnegative inputs");
  const double r = std::log(N) / N;
  double v = std::sqrt(r) * (C_F + sigma_hat);
  if (C_F > 0) v += std::pow(r, 1.0 / 6.0) * std::pow(C_F, -1.0 / 3.0) * std::pow(eps_hat, 2.0 / 3.0) +
                    eps_dis * eps_dis / C_F;
  return c1 * v;
}

void write_trajectory_csv(std::ostream& os, const LassoTrajectory& traj, double oracle_objective) {
  os << "t,objective,gap_vs_oracle,l1_norm,injected_residual_l1\n";
  for (std::size_t t = 0; t < traj.iterates.size(); ++t) {
    os << t << ',' << format_double(traj.objectives[t]) << ','
       << format_double(traj.objectives[t] - oracle_objective) << ','
       << format_double(traj.iterates[t].lpNorm<1>()) << ','
       << format_double(traj.injected_residuals[t].lpNorm<1>()) << '\n';
  }
}

}  // namespace icl
