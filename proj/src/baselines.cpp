#include "qopt/baselines.hpp"

#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "qopt/errors.hpp"

namespace qopt {

namespace {

std::int64_t qsgd_payload_bits(int d, int levels) {
  auto symbols = static_cast<std::uint64_t>(2 * levels + 1);
  return static_cast<std::int64_t>(d) *
         static_cast<int>(std::bit_width(symbols - 1));
}

// charge one full-precision round: gradients up, averaged direction down
void charge_float_round(const Topology& topo, BitLedger& ledger,
                        const std::string& tag, int coords) {
  std::int64_t bits = static_cast<std::int64_t>(coords) * kFloatBits;
  for (int i = 0; i < topo.n; ++i) {
    if (i == topo.master) continue;
    ledger.add(tag + "_up", Direction::to_master, i, bits, 0);
  }
  for (int i = 0; i < topo.n; ++i) {
    if (i == topo.master) continue;
    ledger.add(tag + "_down", Direction::to_workers, i, bits, 0);
  }
}

// shared loop for the two full-precision descent baselines
Trace descent_loop(const GlmProblem& prob, const Topology& topo,
                   BitLedger& ledger, const BaselineOptions& opts, double eta,
                   bool preconditioned) {
  require_input(topo.n == prob.n, "baseline: topology mismatch");
  Trace trace;
  trace.slack_names = {};

  Eigen::LLT<Eigen::MatrixXd> llt;
  if (preconditioned) {
    // one-time full-precision exchange of the local covariances
    ledger.set_round(0);
    std::int64_t mat_bits = packed_len(prob.dim) * kFloatBits;
    for (int i = 0; i < prob.n; ++i) {
      if (i == topo.master) continue;
      ledger.add("precond_up", Direction::to_master, i, mat_bits, 0);
    }
    for (int i = 0; i < prob.n; ++i) {
      if (i == topo.master) continue;
      ledger.add("precond_down", Direction::to_workers, i, mat_bits, 0);
    }
    llt.compute(prob.m.mat());
    require(llt.info() == Eigen::Success,
            "baseline: covariance not positive definite");
  }

  double rate = preconditioned
                    ? 1.0 - 1.0 / prob.kappa_l
                    : (prob.kappa - 1.0) / (prob.kappa + 1.0);
  double bound = (prob.x0 - prob.x_star).norm();
  Eigen::VectorXd x = prob.x0;
  std::int64_t bits_total = 0;
  std::vector<double> err_window;

  for (int t = 0; t < opts.max_rounds; ++t) {
    ledger.set_round(t);
    RoundTrace row;
    row.t = t;
    row.err = (x - prob.x_star).norm();
    row.fgap = global_value(prob, x) - prob.f_star;
    row.bound = bound;

    err_window.push_back(row.err);
    if (t >= 10 && row.err > 10.0 * err_window[static_cast<std::size_t>(t - 10)]) {
      row.bits_total = bits_total;
      trace.rows.push_back(row);
      trace.diverged = true;
      break;
    }
    if (opts.target_fgap >= 0.0 && row.fgap <= opts.target_fgap) {
      row.bits_total = bits_total;
      trace.rows.push_back(row);
      trace.reached_target = true;
      break;
    }

    std::int64_t before = ledger.total_bits();
    charge_float_round(topo, ledger, preconditioned ? "pgd" : "gd", prob.dim);
    Eigen::VectorXd g = global_grad(prob, x);
    x -= preconditioned ? (eta * llt.solve(g)).eval() : (eta * g).eval();

    row.bits_round = ledger.total_bits() - before;
    bits_total += row.bits_round;
    row.bits_total = bits_total;
    trace.rows.push_back(row);
    bound *= rate;
  }
  trace.x_final = x;
  return trace;
}

}  // namespace

Trace gd_full(const GlmProblem& prob, double eta, const Topology& topo,
              BitLedger& ledger, const BaselineOptions& opts) {
  require_input(eta > 0.0, "gd_full: eta must be positive");
  return descent_loop(prob, topo, ledger, opts, eta, false);
}

Trace pgd_full(const GlmProblem& prob, const Topology& topo,
               BitLedger& ledger, const BaselineOptions& opts) {
  double eta = 2.0 / (prob.mu_l + prob.gamma_l);
  return descent_loop(prob, topo, ledger, opts, eta, true);
}

QsgdResult qsgd_quantize(const Eigen::VectorXd& g, int levels, Rng& rng) {
  require_input(levels >= 1, "qsgd_quantize: levels must be >= 1");
  QsgdResult out;
  double norm = g.norm();
  if (norm == 0.0) {
    out.value = Eigen::VectorXd::Zero(g.size());
    return out;  // nothing to send
  }
  out.value.resize(g.size());
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    double u = std::abs(g[j]) / norm * levels;
    double low = std::floor(u);
    double level = low + (rng.bernoulli(u - low) ? 1.0 : 0.0);
    out.value[j] = (g[j] < 0 ? -1.0 : 1.0) * level * norm / levels;
  }
  out.payload_bits = qsgd_payload_bits(static_cast<int>(g.size()), levels);
  out.overhead_bits = kScalarBits;
  return out;
}

QsgdResult qsgd_quantize(const Eigen::VectorXd& g, int levels,
                         std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return qsgd_quantize(g, levels, rng);
}

Trace qsgd_gd(const GlmProblem& prob, double eta, int levels,
              const Topology& topo, BitLedger& ledger,
              const BaselineOptions& opts, std::uint64_t seed) {
  require_input(topo.n == prob.n, "qsgd_gd: topology mismatch");
  require_input(eta > 0.0, "qsgd_gd: eta must be positive");
  Trace trace;

  // one stream per node keeps the run reproducible regardless of topology
  std::vector<Rng> node_rng;
  node_rng.reserve(static_cast<std::size_t>(prob.n) + 1);
  for (int i = 0; i <= prob.n; ++i) {
    node_rng.emplace_back(seed * 0x100000001b3ull + static_cast<std::uint64_t>(i));
  }
  Rng& master_rng = node_rng.back();

  std::vector<Eigen::VectorXd> g_hat(
      static_cast<std::size_t>(prob.n),
      Eigen::VectorXd::Zero(prob.dim));  // master-side gradient estimates
  Eigen::VectorXd g_bar = Eigen::VectorXd::Zero(prob.dim);  // broadcast value

  Eigen::VectorXd x = prob.x0;
  std::int64_t bits_total = 0;
  std::vector<double> err_window;

  for (int t = 0; t < opts.max_rounds; ++t) {
    ledger.set_round(t);
    RoundTrace row;
    row.t = t;
    row.err = (x - prob.x_star).norm();
    row.fgap = global_value(prob, x) - prob.f_star;

    err_window.push_back(row.err);
    if (t >= 10 && row.err > 10.0 * err_window[static_cast<std::size_t>(t - 10)]) {
      row.bits_total = bits_total;
      trace.rows.push_back(row);
      trace.diverged = true;
      break;
    }
    if (opts.target_fgap >= 0.0 && row.fgap <= opts.target_fgap) {
      row.bits_total = bits_total;
      trace.rows.push_back(row);
      trace.reached_target = true;
      break;
    }

    std::int64_t before = ledger.total_bits();
    std::int64_t overhead_before = ledger.total_overhead();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(prob.dim);
    for (int i = 0; i < prob.n; ++i) {
      Eigen::VectorXd g = local_grad(prob, i, x);
      // difference against the reconstructed previous value, so past
      // quantization errors are fed back instead of accumulating
      QsgdResult q = qsgd_quantize(g - g_hat[static_cast<std::size_t>(i)],
                                   levels,
                                   node_rng[static_cast<std::size_t>(i)]);
      if (i != topo.master) {
        ledger.add("qsgd_up", Direction::to_master, i, q.payload_bits,
                   q.overhead_bits);
      }
      g_hat[static_cast<std::size_t>(i)] += q.value;
      sum += g_hat[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd avg = sum / prob.n;
    QsgdResult q = qsgd_quantize(avg - g_bar, levels, master_rng);
    for (int i = 0; i < prob.n; ++i) {
      if (i == topo.master) continue;
      ledger.add("qsgd_down", Direction::to_workers, i, q.payload_bits,
                 q.overhead_bits);
    }
    g_bar += q.value;
    x -= eta * g_bar;

    row.bits_round = ledger.total_bits() - before;
    bits_total += row.bits_round;
    row.bits_total = bits_total;
    row.overhead_bits = ledger.total_overhead() - overhead_before;
    trace.rows.push_back(row);
  }
  trace.x_final = x;
  return trace;
}

}  // namespace qopt
