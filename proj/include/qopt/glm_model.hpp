#pragma once

#include <vector>

#include <Eigen/Core>

#include "qopt/sym_codec.hpp"

namespace qopt {

enum class LossKind { quadratic, logistic };

// One node's data. `target` holds per-row regression targets for quadratic
// loss and +-1 labels for logistic loss.
struct Shard {
  Eigen::MatrixXd a;
  Eigen::VectorXd target;
};

// Curvature constants a node needs about every other node's objective.
// mu/gamma bound the local Hessians uniformly in x (the constants the
// second-order algorithm quantizes against); sigma bounds how fast any local
// Hessian moves. For quadratic loss sigma is exactly 0.
struct SecondOrderConstants {
  double mu = 0.0;
  double gamma = 0.0;
  double kappa = 1.0;
  double sigma = 0.0;
};

// A distributed GLM instance together with every constant the algorithms
// consume, all computed once at setup by exact (desk-scale) linear algebra.
//
// Objectives:
//   quadratic:  f_i(x) = 1/2 ||A_i x - b_i||^2
//   logistic:   f_i(x) = sum_j log(1 + exp(-y_j a_j^T x)) + rho/2 ||x||^2
// and f = (1/n) sum_i f_i.
struct GlmProblem {
  std::vector<Shard> shards;
  LossKind loss = LossKind::quadratic;
  double rho = 0.0;  // l2 coefficient, logistic only
  int dim = 0;
  int n = 0;

  // loss curvature surrogates: eigenvalue bounds for M^{-1} grad^2 f
  double mu_l = 1.0;
  double gamma_l = 1.0;
  double kappa_l = 1.0;

  SymMatrix m;  // (1/n) sum_i A_i^T A_i
  double lam_min_m = 0.0;
  double lam_max_m = 0.0;
  double kappa_m = 1.0;

  double mu = 0.0;     // strong convexity of f
  double gamma = 0.0;  // smoothness of f
  double kappa = 1.0;

  SecondOrderConstants newton;

  Eigen::VectorXd x0;
  double dist0 = 0.0;  // max_i { ||x0 - x*||, ||x0 - x_i*|| }

  Eigen::VectorXd x_star;
  double f_star = 0.0;
  std::vector<Eigen::VectorXd> x_star_local;
  std::vector<double> f_star_local;
  double spread_c = 0.0;     // max_i ||x* - x_i*||
  double magnitude_c = 0.0;  // max_i |f_i*|
  double gamma_local_max = 0.0;
};

double local_value(const GlmProblem& prob, int i, const Eigen::VectorXd& x);
Eigen::VectorXd local_grad(const GlmProblem& prob, int i,
                           const Eigen::VectorXd& x);
SymMatrix local_hessian(const GlmProblem& prob, int i,
                        const Eigen::VectorXd& x);

double global_value(const GlmProblem& prob, const Eigen::VectorXd& x);
Eigen::VectorXd global_grad(const GlmProblem& prob, const Eigen::VectorXd& x);
SymMatrix global_hessian(const GlmProblem& prob, const Eigen::VectorXd& x);

// Builds the problem and fills every cached constant: covariance spectrum,
// curvature bounds, Hessian-Lipschitz bound, and the reference minimizers
// (full-batch Newton run to gradient norm ~1e-12). Throws when the stacked
// data matrix is not of full column rank.
GlmProblem compute_constants(std::vector<Shard> shards, LossKind loss,
                             double rho, const Eigen::VectorXd& x0);

// max_i { ||x0 - x*||, ||x0 - x_i*|| } against the stored oracle minimizers
double init_radius(const GlmProblem& prob, const Eigen::VectorXd& x0);

// Re-point the configured start; recomputes dist0 only.
void set_start(GlmProblem& prob, const Eigen::VectorXd& x0);

// Alternative distance bound from function values, sqrt(2 f(x0)/mu) style,
// usable when the oracle minimizers are treated as unknown.
double dist_bound_from_value(const GlmProblem& prob,
                             const Eigen::VectorXd& x0);

// Fallback bound max_i |f_i*| <= n f(x0) for nonnegative local losses.
double magnitude_bound_from_value(const GlmProblem& prob,
                                  const Eigen::VectorXd& x0);

}  // namespace qopt
