#include "qopt/glm_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qopt/errors.hpp"

namespace qopt {

namespace {

// sup |d^3/dt^3 log(1+e^-t)|, attained where the sigmoid is (1 +- 1/sqrt3)/2
constexpr double kLogisticThirdDerivBound = 0.09622504486493764;  // 1/(6*sqrt3)

double softplus(double t) {
  // log(1 + e^t) without overflow
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t))
                : std::exp(t) / (1.0 + std::exp(t));
}

void check_dim(const GlmProblem& prob, const Eigen::VectorXd& x,
               const char* who) {
  require_input(x.size() == prob.dim,
                std::string(who) + ": x has wrong dimension");
}

struct EigRange {
  double lam_min;
  double lam_max;
};

EigRange eig_range(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  require_input(es.info() == Eigen::Success, "eigendecomposition failed");
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

using ValueFn = std::function<double(const Eigen::VectorXd&)>;
using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using HessFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Damped Newton to (near) machine precision; the reference-minimizer oracle.
Eigen::VectorXd newton_minimize(const ValueFn& value, const GradFn& grad,
                                const HessFn& hess,
                                const Eigen::VectorXd& x_init,
                                double grad_tol = 1e-12) {
  Eigen::VectorXd x = x_init;
  Eigen::VectorXd best_x = x;
  double best_norm = grad(x).norm();
  int stall = 0;
  for (int iter = 0; iter < 120; ++iter) {
    Eigen::VectorXd g = grad(x);
    double gnorm = g.norm();
    if (gnorm < best_norm) {
      best_norm = gnorm;
      best_x = x;
      stall = 0;
    } else if (++stall >= 3) {
      break;
    }
    if (gnorm <= grad_tol) break;
    Eigen::MatrixXd h = hess(x);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    Eigen::VectorXd p;
    if (llt.info() == Eigen::Success) {
      p = llt.solve(g);
    } else {
      p = h.ldlt().solve(g);
    }
    double fx = value(x);
    double slope = g.dot(p);
    double step = 1.0;
    while (step > 1e-12 && value(x - step * p) > fx - 1e-4 * step * slope) {
      step *= 0.5;
    }
    x -= step * p;
    if (step * p.norm() <= 1e-16 * (1.0 + x.norm())) break;
  }
  return best_x;
}

}  // namespace

double local_value(const GlmProblem& prob, int i, const Eigen::VectorXd& x) {
  check_dim(prob, x, "local_value");
  const Shard& s = prob.shards.at(static_cast<std::size_t>(i));
  if (prob.loss == LossKind::quadratic) {
    return 0.5 * (s.a * x - s.target).squaredNorm();
  }
  Eigen::VectorXd z = s.a * x;
  double v = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    v += softplus(-s.target[j] * z[j]);
  }
  return v + 0.5 * prob.rho * x.squaredNorm();
}

Eigen::VectorXd local_grad(const GlmProblem& prob, int i,
                           const Eigen::VectorXd& x) {
  check_dim(prob, x, "local_grad");
  const Shard& s = prob.shards.at(static_cast<std::size_t>(i));
  if (prob.loss == LossKind::quadratic) {
    return s.a.transpose() * (s.a * x - s.target);
  }
  Eigen::VectorXd z = s.a * x;
  Eigen::VectorXd w(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    w[j] = -s.target[j] * sigmoid(-s.target[j] * z[j]);
  }
  return s.a.transpose() * w + prob.rho * x;
}

SymMatrix local_hessian(const GlmProblem& prob, int i,
                        const Eigen::VectorXd& x) {
  check_dim(prob, x, "local_hessian");
  const Shard& s = prob.shards.at(static_cast<std::size_t>(i));
  if (prob.loss == LossKind::quadratic) {
    return SymMatrix(s.a.transpose() * s.a);
  }
  Eigen::VectorXd z = s.a * x;
  Eigen::VectorXd w(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    double t = s.target[j] * z[j];
    w[j] = sigmoid(t) * sigmoid(-t);
  }
  Eigen::MatrixXd h = s.a.transpose() * w.asDiagonal() * s.a;
  h.diagonal().array() += prob.rho;
  return SymMatrix(h);
}

double global_value(const GlmProblem& prob, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (int i = 0; i < prob.n; ++i) v += local_value(prob, i, x);
  return v / prob.n;
}

Eigen::VectorXd global_grad(const GlmProblem& prob, const Eigen::VectorXd& x) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(prob.dim);
  for (int i = 0; i < prob.n; ++i) g += local_grad(prob, i, x);
  return g / prob.n;
}

SymMatrix global_hessian(const GlmProblem& prob, const Eigen::VectorXd& x) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(prob.dim, prob.dim);
  for (int i = 0; i < prob.n; ++i) h += local_hessian(prob, i, x).mat();
  return SymMatrix(h / prob.n);
}

double init_radius(const GlmProblem& prob, const Eigen::VectorXd& x0) {
  double r = (x0 - prob.x_star).norm();
  for (const auto& xs : prob.x_star_local) {
    r = std::max(r, (x0 - xs).norm());
  }
  return r;
}

void set_start(GlmProblem& prob, const Eigen::VectorXd& x0) {
  require_input(x0.size() == prob.dim, "set_start: x0 has wrong dimension");
  prob.x0 = x0;
  prob.dist0 = init_radius(prob, x0);
}

GlmProblem compute_constants(std::vector<Shard> shards, LossKind loss,
                             double rho, const Eigen::VectorXd& x0) {
  require_input(!shards.empty(), "compute_constants: no shards");
  GlmProblem prob;
  prob.loss = loss;
  prob.rho = loss == LossKind::logistic ? rho : 0.0;
  prob.n = static_cast<int>(shards.size());
  prob.dim = static_cast<int>(shards.front().a.cols());
  require_input(prob.dim >= 1, "compute_constants: empty data matrix");
  if (loss == LossKind::logistic) {
    require_input(rho > 0.0,
                  "compute_constants: logistic loss needs rho > 0 for strong "
                  "convexity");
  }

  std::int64_t m_total = 0;
  for (const Shard& s : shards) {
    require_input(s.a.cols() == prob.dim,
                  "compute_constants: shard dimension mismatch");
    require_input(s.a.rows() == s.target.size(),
                  "compute_constants: target length mismatch");
    require_input(s.a.rows() >= 1, "compute_constants: empty shard");
    if (loss == LossKind::logistic) {
      for (Eigen::Index j = 0; j < s.target.size(); ++j) {
        require_input(s.target[j] == 1.0 || s.target[j] == -1.0,
                      "compute_constants: logistic labels must be +-1");
      }
    }
    m_total += s.a.rows();
  }
  prob.shards = std::move(shards);

  // stacked-matrix rank check
  Eigen::MatrixXd stacked(m_total, prob.dim);
  {
    Eigen::Index row = 0;
    for (const Shard& s : prob.shards) {
      stacked.middleRows(row, s.a.rows()) = s.a;
      row += s.a.rows();
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  require_input(
      smin > 1e-10 * smax,
      "compute_constants: stacked data matrix is rank-deficient; full column "
      "rank is required");

  // averaged covariance and its spectrum
  Eigen::MatrixXd m_acc = Eigen::MatrixXd::Zero(prob.dim, prob.dim);
  double lam_min_local = std::numeric_limits<double>::infinity();
  double lam_max_local = 0.0;
  double sigma_bound = 0.0;
  for (const Shard& s : prob.shards) {
    Eigen::MatrixXd mi = s.a.transpose() * s.a;
    m_acc += mi;
    EigRange r = eig_range(mi);
    lam_min_local = std::min(lam_min_local, r.lam_min);
    lam_max_local = std::max(lam_max_local, r.lam_max);
    if (loss == LossKind::logistic) {
      double max_row = 0.0;
      for (Eigen::Index j = 0; j < s.a.rows(); ++j) {
        max_row = std::max(max_row, s.a.row(j).norm());
      }
      sigma_bound = std::max(
          sigma_bound, kLogisticThirdDerivBound * max_row * r.lam_max);
    }
  }
  prob.m = SymMatrix(m_acc / prob.n);
  EigRange mr = eig_range(prob.m.mat());
  prob.lam_min_m = mr.lam_min;
  prob.lam_max_m = mr.lam_max;
  require_input(prob.lam_min_m > 0.0,
                "compute_constants: averaged covariance is singular");
  prob.kappa_m = prob.lam_max_m / prob.lam_min_m;

  if (loss == LossKind::quadratic) {
    prob.mu_l = 1.0;
    prob.gamma_l = 1.0;
    prob.mu = prob.lam_min_m;
    prob.gamma = prob.lam_max_m;
    prob.newton.mu = lam_min_local;
    prob.newton.gamma = lam_max_local;
    prob.newton.sigma = 0.0;
    prob.gamma_local_max = lam_max_local;
    // local minimizers need strongly convex shards
    require_input(lam_min_local > 1e-10 * lam_max_local,
                  "compute_constants: a shard is rank-deficient; every shard "
                  "needs full column rank");
  } else {
    // The l2 term acts on x, not on the margins, so the loss curvature pair
    // is taken as the exact eigenvalue envelope of M^{-1} grad^2 f:
    //   margins contribute [0, 1/4], rho M^{-1} contributes
    //   [rho/lam_max(M), rho/lam_min(M)].
    prob.mu_l = prob.rho / prob.lam_max_m;
    prob.gamma_l = 0.25 + prob.rho / prob.lam_min_m;
    prob.mu = prob.rho;
    prob.gamma = 0.25 * prob.lam_max_m + prob.rho;
    prob.newton.mu = prob.rho;
    prob.newton.gamma = 0.25 * lam_max_local + prob.rho;
    prob.newton.sigma = sigma_bound;
    prob.gamma_local_max = prob.newton.gamma;
  }
  prob.kappa_l = prob.gamma_l / prob.mu_l;
  prob.kappa = prob.gamma / prob.mu;
  prob.newton.kappa = prob.newton.gamma / prob.newton.mu;

  // reference minimizers
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(prob.dim);
  prob.x_star = newton_minimize(
      [&](const Eigen::VectorXd& x) { return global_value(prob, x); },
      [&](const Eigen::VectorXd& x) { return global_grad(prob, x); },
      [&](const Eigen::VectorXd& x) { return global_hessian(prob, x).mat(); },
      zero);
  prob.f_star = global_value(prob, prob.x_star);
  prob.x_star_local.resize(static_cast<std::size_t>(prob.n));
  prob.f_star_local.resize(static_cast<std::size_t>(prob.n));
  prob.spread_c = 0.0;
  prob.magnitude_c = 0.0;
  for (int i = 0; i < prob.n; ++i) {
    Eigen::VectorXd xs = newton_minimize(
        [&](const Eigen::VectorXd& x) { return local_value(prob, i, x); },
        [&](const Eigen::VectorXd& x) { return local_grad(prob, i, x); },
        [&](const Eigen::VectorXd& x) {
          return local_hessian(prob, i, x).mat();
        },
        prob.x_star);
    prob.x_star_local[static_cast<std::size_t>(i)] = xs;
    double fs = local_value(prob, i, xs);
    prob.f_star_local[static_cast<std::size_t>(i)] = fs;
    prob.spread_c = std::max(prob.spread_c, (prob.x_star - xs).norm());
    prob.magnitude_c = std::max(prob.magnitude_c, std::abs(fs));
  }

  require_input(x0.size() == prob.dim,
                "compute_constants: x0 has wrong dimension");
  prob.x0 = x0;
  prob.dist0 = init_radius(prob, x0);
  return prob;
}

double dist_bound_from_value(const GlmProblem& prob,
                             const Eigen::VectorXd& x0) {
  // both losses are nonnegative, so f* >= 0 and 2 f(x0)/mu over-approximates
  // ||x0 - x*||^2; same per shard with the local strong convexity
  double d2 = 2.0 * global_value(prob, x0) / prob.mu;
  for (int i = 0; i < prob.n; ++i) {
    double mu_i;
    if (prob.loss == LossKind::quadratic) {
      const Shard& s = prob.shards[static_cast<std::size_t>(i)];
      mu_i = eig_range(s.a.transpose() * s.a).lam_min;
    } else {
      mu_i = prob.rho;
    }
    d2 = std::max(d2, 2.0 * local_value(prob, i, x0) / mu_i);
  }
  return std::sqrt(d2);
}

double magnitude_bound_from_value(const GlmProblem& prob,
                                  const Eigen::VectorXd& x0) {
  return prob.n * global_value(prob, x0);
}

}  // namespace qopt
