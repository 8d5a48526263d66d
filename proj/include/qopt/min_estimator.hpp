#pragma once

#include <cstdint>

#include "qopt/glm_model.hpp"
#include "qopt/net_sim.hpp"

namespace qopt {

// Inputs of the minimum-value estimation round. C bounds the spread of the
// local minimizers around x*, c the magnitude of the local minima, gamma the
// smoothness of every local objective.
struct MinEstConfig {
  double spread_c = 0.0;
  double magnitude_c = 0.0;
  double eps = 0.0;
  double gamma = 0.0;

  static MinEstConfig from_problem(const GlmProblem& prob, double eps);
};

struct MinEstimate {
  double value = 0.0;             // the averaged quantized local values
  std::int64_t bits_per_worker = 0;
  double y = 0.0;                 // scalar quantizer distance bound used
};

// Each node quantizes f_i(x_t) against the master's f_master(x_t) with
// distance bound 2 (gamma C^2 + c) and error eps/2; the master averages. The
// result is within eps of the true minimum provided f(x_t) - f* <= eps/2,
// which is checked via ||x_t - x*|| <= sqrt(eps/gamma) against the oracle.
MinEstimate estimate_min(const GlmProblem& prob, const Eigen::VectorXd& x_t,
                         const MinEstConfig& cfg, const Topology& topo,
                         BitLedger& ledger);

}  // namespace qopt
