#pragma once

#include <cstdint>

#include "qopt/glm_model.hpp"
#include "qopt/net_sim.hpp"
#include "qopt/trace.hpp"

namespace qopt {

// Parameters of quantized preconditioned descent. The radius schedule
// R(t) = (gamma_l/2) K rate^t D shrinks geometrically with the iterate
// error bound, which keeps the y/eps ratio (and so the bits per round)
// constant across t.
struct QpgdParams {
  double kappa_l = 1.0;
  double xi = 0.5;     // 1 - 1/(2 kappa_l)
  double big_k = 4.0;  // 2/xi
  double delta = 0.0;  // xi (1 - xi)/4
  double eta = 1.0;    // 2/(mu_l + gamma_l)
  double dist0 = 0.0;
  double rate = 0.75;  // 1 - 1/(4 kappa_l)
  double r0 = 0.0;     // (gamma_l/2) big_k dist0

  static QpgdParams from_problem(const GlmProblem& prob);
  static QpgdParams from_problem(const GlmProblem& prob, double dist0);
};

struct PreconditionerSetup {
  SymMatrix m_bar;
  double err = 0.0;        // ||M - M_bar||_2 measured
  double err_bound = 0.0;  // lam_min(M)/(8 kappa_l)
  double slack_err = 0.0;
  double lam_min_m_bar = 0.0;
  double slack_lam_min = 0.0;  // lam_min(M_bar) - lam_min(M)/2
  std::int64_t payload_bits = 0;
};

// Steps (A) of the algorithm: every node quantizes its local covariance
// against the master's, the master averages and re-broadcasts the encoded
// average, each node decoding against its own covariance. All nodes end up
// with the same M_bar; the ledger is charged for n-1 gathers and n-1
// broadcast deliveries of packed dimension d(d+1)/2.
PreconditionerSetup setup_preconditioner(const GlmProblem& prob,
                                         const Topology& topo,
                                         BitLedger& ledger);

struct QpgdOptions {
  int max_rounds = 1000;
  double target_fgap = -1.0;  // < 0: run max_rounds unconditionally
};

struct QpgdRun {
  Trace trace;
  PreconditionerSetup precond;
};

// Full quantized run. Each round asserts the three descent inequalities
// (iterate contraction, per-node direction error, global direction error)
// and every quantizer distance precondition; a violation aborts with the
// inequality named.
QpgdRun qpgd_run(const GlmProblem& prob, const QpgdParams& params,
                 const Topology& topo, BitLedger& ledger,
                 const QpgdOptions& opts);

// Diagnostic mode: same preconditioner, exact global gradients, no direction
// quantization. Contraction factor is 1 - 1/(2 kappa_l) per round, or
// 1 - 1/kappa_l when exact_m replaces M_bar by M itself.
Trace qpgd_exact_gradient_mode(const GlmProblem& prob,
                               const QpgdParams& params, int rounds,
                               bool exact_m = false);

}  // namespace qopt
