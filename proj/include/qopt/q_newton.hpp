#pragma once

#include <cstdint>
#include <vector>

#include "qopt/glm_model.hpp"
#include "qopt/net_sim.hpp"
#include "qopt/trace.hpp"

namespace qopt {

// Schedules for quantized Newton. G(t) = (mu/4) alpha rate^t drives the
// Hessian-estimate accuracy, P(t) = (mu/(2 sigma)) K alpha rate^t the
// direction accuracy, with rate = (1+alpha)/2. Both shrink in lockstep with
// the iterate error, so per-round bits are constant from round 1 on.
struct NewtonParams {
  double alpha = 0.5;
  double theta = 0.0625;  // alpha (1-alpha)/4
  double big_k = 4.0;     // 2/alpha
  double mu = 0.0;
  double gamma = 0.0;
  double kappa = 1.0;
  double sigma = 0.0;
  double rate = 0.75;  // (1+alpha)/2
  double g0 = 0.0;     // G(0)
  double p0 = 0.0;     // P(0)
  double ball = 0.0;   // required init radius alpha mu/(2 sigma)

  // Throws for quadratic problems: sigma = 0 would force exact Hessian
  // transport, i.e. infinitely many bits; the fixed preconditioner solver
  // covers that case.
  static NewtonParams from_problem(const GlmProblem& prob, double alpha = 0.5);
};

struct NewtonState {
  int t = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd h_global_packed;               // phi(H_t), shared
  std::vector<Eigen::VectorXd> h_local_packed;   // phi(H_t^i), master side
  SymMatrix h_global;
  Eigen::VectorXd v_global;
  std::vector<Eigen::VectorXd> v_local;
  double g_cur = 0.0;  // G(t)
  double p_cur = 0.0;  // P(t)

  // metrics of the exchange that produced the t-level estimates
  double slack_iterate = 0.0;
  double slack_hess_local = 0.0;
  double slack_hess_global = 0.0;
  double slack_dir_local = 0.0;
  double slack_dir_global = 0.0;
  std::int64_t hessian_bits = 0;
  std::int64_t direction_bits = 0;
  std::int64_t overhead_bits = 0;
};

// Steps (B)-(C): initial Hessian and direction estimation at x0. Checks the
// init ball max_i{||x0-x*||, ||x0-x_i*||} <= alpha mu/(2 sigma) against the
// oracle minimizers, then asserts all five descent inequalities at t = 0.
NewtonState newton_init(const GlmProblem& prob, const NewtonParams& params,
                        const Topology& topo, BitLedger& ledger,
                        const Eigen::VectorXd& x0);

// Steps (D)-(E): one iterate update plus requantization of Hessians (against
// each node's previous estimate) and directions. Asserts the five
// inequalities at the new round; any violated quantizer distance
// precondition aborts with the inequality named.
void newton_round(NewtonState& state, const GlmProblem& prob,
                  const NewtonParams& params, const Topology& topo,
                  BitLedger& ledger);

struct NewtonOptions {
  int max_rounds = 200;
  double target_fgap = -1.0;  // < 0: run max_rounds
  // Replace the lattice Hessian updates (t >= 1) and direction exchanges by
  // unbiased stochastic quantization of differences. No convergence
  // guarantees; invariant checks are disabled and divergence is detected
  // instead.
  bool qsgd_updates = false;
  int qsgd_levels = 16;
  std::uint64_t seed = 0;
};

Trace newton_run(const GlmProblem& prob, const NewtonParams& params,
                 const Topology& topo, BitLedger& ledger,
                 const NewtonOptions& opts);

}  // namespace qopt
