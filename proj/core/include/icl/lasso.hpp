#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "icl/common.hpp"

namespace icl {

struct LassoProblem {
  Mat phi;  // N x (n+1), rows are feature vectors
  Vec y;
  double lambda = 0.0;
  double eta = 0.0;

  int N() const { return static_cast<int>(phi.rows()); }
  int p() const { return static_cast<int>(phi.cols()); }
  void validate() const;

  // 1 / (2(n+1)) for p = n+1 columns.
  static double default_eta(int p) { return 1.0 / (2.0 * p); }
};

struct LassoTrajectory {
  std::vector<Vec> iterates;
  std::vector<Vec> injected_residuals;  // entry t is e_t; entry 0 is zero
  std::vector<double> objectives;
};

double soft_threshold(double z, double kappa);
Vec soft_threshold(const Vec& z, double kappa);

double lasso_objective(const LassoProblem& problem, const Vec& rho);

// Gradient of the smooth part: -(2/N) Phi^T (y - Phi rho).
Vec lasso_gradient(const LassoProblem& problem, const Vec& rho);

Vec ista_step(const LassoProblem& problem, const Vec& rho);
Vec ista_step(const LassoProblem& problem, const Vec& rho, const Vec& e_next);

// Supplies e_{t} for the step producing iterate t from iterate t-1.
using ResidualSource = std::function<Vec(int t, const Vec& rho_prev)>;

LassoTrajectory run_ista(const LassoProblem& problem, int T, const ResidualSource& residuals = {});

double kkt_residual(const LassoProblem& problem, const Vec& rho);

// High-accuracy reference minimizer (restarted FISTA with backtracking).
Vec oracle_solve(const LassoProblem& problem, double tol = 1e-8, long max_iter = 1000000);

double default_lambda(double N, double sigma_hat, double C_F, double eps_dis, double eps_hat, double c1);

// Columns: t, objective, gap_vs_oracle, l1_norm, injected_residual_l1.
void write_trajectory_csv(std::ostream& os, const LassoTrajectory& traj, double oracle_objective);

}  // namespace icl
