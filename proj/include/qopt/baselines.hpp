#pragma once

#include <cstdint>

#include "qopt/glm_model.hpp"
#include "qopt/net_sim.hpp"
#include "qopt/rng.hpp"
#include "qopt/trace.hpp"

namespace qopt {

// Messages of the full-precision reference methods are priced at 32 bits per
// coordinate.
constexpr std::int64_t kFloatBits = 32;

struct BaselineOptions {
  int max_rounds = 10000;
  double target_fgap = -1.0;
};

// Plain distributed gradient descent, full-precision messages.
Trace gd_full(const GlmProblem& prob, double eta, const Topology& topo,
              BitLedger& ledger, const BaselineOptions& opts);

// Exact-preconditioner descent with eta = 2/(mu_l + gamma_l): contraction
// 1 - 1/kappa_l per round, one-step convergence on quadratics. The ledger is
// charged for the one-time full-precision covariance exchange plus the
// per-round gradient traffic.
Trace pgd_full(const GlmProblem& prob, const Topology& topo,
               BitLedger& ledger, const BaselineOptions& opts);

struct QsgdResult {
  Eigen::VectorXd value;
  std::int64_t payload_bits = 0;   // d * ceil(log2(2 levels + 1))
  std::int64_t overhead_bits = 0;  // the full-precision norm scalar
};

// Unbiased stochastic rounding onto `levels` per-coordinate levels scaled by
// ||g||_2 (E[result] = g).
QsgdResult qsgd_quantize(const Eigen::VectorXd& g, int levels, Rng& rng);
QsgdResult qsgd_quantize(const Eigen::VectorXd& g, int levels,
                         std::uint64_t rng_seed);

// Gradient descent with stochastically quantized gradient differences:
// round 0 quantizes the local gradients themselves, later rounds the change
// since the previous round, accumulated on the receiving side. Empirical
// comparator only.
Trace qsgd_gd(const GlmProblem& prob, double eta, int levels,
              const Topology& topo, BitLedger& ledger,
              const BaselineOptions& opts, std::uint64_t seed);

}  // namespace qopt
