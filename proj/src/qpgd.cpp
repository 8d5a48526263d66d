#include "qopt/qpgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "qopt/errors.hpp"

namespace qopt {

namespace {

std::string num(double v) { return format_double(v); }

void check_distance(double dist, double bound, const std::string& what) {
  require(dist <= bound, what + ": distance " + num(dist) +
                             " exceeds bound " + num(bound));
}

double lam_min_of(const SymMatrix& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.mat(),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

QpgdParams QpgdParams::from_problem(const GlmProblem& prob) {
  return from_problem(prob, prob.dist0);
}

QpgdParams QpgdParams::from_problem(const GlmProblem& prob, double dist0) {
  require_input(prob.kappa_l >= 1.0 && std::isfinite(prob.kappa_l),
                "QpgdParams: kappa_l must be finite and >= 1");
  require_input(dist0 > 0.0, "QpgdParams: dist0 must be positive");
  QpgdParams p;
  p.kappa_l = prob.kappa_l;
  p.xi = 1.0 - 1.0 / (2.0 * prob.kappa_l);
  p.big_k = 2.0 / p.xi;
  p.delta = p.xi * (1.0 - p.xi) / 4.0;
  p.eta = 2.0 / (prob.mu_l + prob.gamma_l);
  p.dist0 = dist0;
  p.rate = 1.0 - 1.0 / (4.0 * prob.kappa_l);
  p.r0 = (prob.gamma_l / 2.0) * p.big_k * dist0;
  return p;
}

PreconditionerSetup setup_preconditioner(const GlmProblem& prob,
                                         const Topology& topo,
                                         BitLedger& ledger) {
  require_input(topo.n == prob.n, "setup_preconditioner: topology mismatch");
  const int d = prob.dim;
  const int dp = static_cast<int>(packed_len(d));
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const double eps_q =
      prob.lam_min_m / (16.0 * std::sqrt(2.0) * prob.kappa_l);
  const double y_up = 2.0 * sqrt_d * prob.n * prob.lam_max_m;
  const double y_down =
      sqrt_d * (prob.lam_min_m / (16.0 * prob.kappa_l) +
                2.0 * prob.n * prob.lam_max_m);

  std::vector<Eigen::VectorXd> packed(static_cast<std::size_t>(prob.n));
  for (int i = 0; i < prob.n; ++i) {
    const Shard& s = prob.shards[static_cast<std::size_t>(i)];
    packed[static_cast<std::size_t>(i)] =
        phi(SymMatrix(s.a.transpose() * s.a)).data;
  }
  const Eigen::VectorXd& ref_master =
      packed[static_cast<std::size_t>(topo.master)];

  PreconditionerSetup setup;

  // local covariances up, decoded at the master against its own
  QuantSpec spec_up = make_spec(dp, y_up, eps_q);
  std::vector<EncodedBlob> up_blobs;
  for (int i = 0; i < prob.n; ++i) {
    if (i == topo.master) continue;
    check_distance((packed[static_cast<std::size_t>(i)] - ref_master).norm(),
                   y_up,
                   "preconditioner gather: ||phi(M_i) - phi(M_master)|| <= "
                   "2 sqrt(d) n lam_max(M)");
    up_blobs.push_back(encode(packed[static_cast<std::size_t>(i)], spec_up));
  }
  gather(topo, ledger, "precond_up", up_blobs);
  for (const EncodedBlob& b : up_blobs) setup.payload_bits += b.payload_bits();

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dp);
  {
    std::size_t k = 0;
    for (int i = 0; i < prob.n; ++i) {
      if (i == topo.master) {
        // the master quantizes its own covariance locally, nothing is sent
        EncodedBlob self = encode(ref_master, spec_up);
        sum += decode(self, ref_master);
      } else {
        sum += decode(up_blobs[k++], ref_master);
      }
    }
  }
  Eigen::VectorXd s_avg = sum / prob.n;

  // averaged covariance down, decoded at each node against its own
  QuantSpec spec_down = make_spec(dp, y_down, eps_q);
  EncodedBlob down_blob = encode(s_avg, spec_down);
  broadcast(topo, ledger, "precond_down", down_blob);
  setup.payload_bits +=
      static_cast<std::int64_t>(topo.n - 1) * down_blob.payload_bits();

  Eigen::VectorXd m_bar_packed;
  for (int i = 0; i < prob.n; ++i) {
    check_distance(
        (s_avg - packed[static_cast<std::size_t>(i)]).norm(), y_down,
        "preconditioner broadcast: ||phi(S) - phi(M_i)|| <= sqrt(d) "
        "(lam_min(M)/(16 kappa_l) + 2 n lam_max(M))");
    Eigen::VectorXd decoded =
        decode(down_blob, packed[static_cast<std::size_t>(i)]);
    if (i == 0) {
      m_bar_packed = decoded;
    } else {
      require((decoded.array() == m_bar_packed.array()).all(),
              "preconditioner broadcast: nodes decoded different matrices");
    }
  }
  PackedSym ps;
  ps.dim = d;
  ps.data = m_bar_packed;
  setup.m_bar = phi_inv(ps);

  setup.err = spectral_norm(
      SymMatrix(prob.m.mat() - setup.m_bar.mat()));
  setup.err_bound = prob.lam_min_m / (8.0 * prob.kappa_l);
  setup.slack_err = setup.err_bound - setup.err;
  require(setup.slack_err >= 0.0,
          "preconditioner error: ||M - M_bar|| <= lam_min(M)/(8 kappa_l) "
          "violated, slack " +
              num(setup.slack_err));
  setup.lam_min_m_bar = lam_min_of(setup.m_bar);
  setup.slack_lam_min = setup.lam_min_m_bar - prob.lam_min_m / 2.0;
  require(setup.slack_lam_min >= 0.0,
          "preconditioner spectrum: lam_min(M_bar) >= lam_min(M)/2 violated, "
          "slack " +
              num(setup.slack_lam_min));
  return setup;
}

QpgdRun qpgd_run(const GlmProblem& prob, const QpgdParams& params,
                 const Topology& topo, BitLedger& ledger,
                 const QpgdOptions& opts) {
  require_input(topo.n == prob.n, "qpgd_run: topology mismatch");
  double err0 = init_radius(prob, prob.x0);
  require_input(err0 <= params.dist0,
                "qpgd_run: x0 violates the configured distance bound D");

  QpgdRun run;
  ledger.set_round(0);
  run.precond = setup_preconditioner(prob, topo, ledger);
  Eigen::LLT<Eigen::MatrixXd> m_bar_llt(run.precond.m_bar.mat());
  require(m_bar_llt.info() == Eigen::Success,
          "qpgd_run: quantized preconditioner is not positive definite");

  run.trace.slack_names = {"slack_iterate", "slack_dir_local",
                           "slack_dir_global"};

  const double y_dir_up = 4.0 * prob.n * prob.kappa_m;   // x R(t)
  const double y_dir_down = params.delta / 2.0 + y_dir_up;  // x R(t)

  Eigen::VectorXd x = prob.x0;
  std::vector<Eigen::VectorXd> v_local(static_cast<std::size_t>(prob.n));
  Eigen::VectorXd v_global;
  double radius = params.r0;
  double bound = params.dist0;
  std::int64_t bits_total = 0;

  for (int t = 0; t < opts.max_rounds; ++t) {
    ledger.set_round(t);
    RoundTrace row;
    row.t = t;
    row.err = (x - prob.x_star).norm();
    row.fgap = global_value(prob, x) - prob.f_star;
    row.bound = bound;

    if (opts.target_fgap >= 0.0 && row.fgap <= opts.target_fgap) {
      row.slacks = {row.bound - row.err, 0.0, 0.0};
      row.bits_total = bits_total;
      run.trace.rows.push_back(row);
      run.trace.reached_target = true;
      break;
    }

    const double eps_t = params.delta * radius / 2.0;
    std::int64_t bits_before = ledger.total_bits();
    std::int64_t overhead_before = ledger.total_overhead();

    std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(prob.n));
    for (int i = 0; i < prob.n; ++i) {
      w[static_cast<std::size_t>(i)] =
          m_bar_llt.solve(local_grad(prob, i, x));
    }

    // local directions up, decoded against the previous local estimates
    // (round 0: against the master's own direction)
    QuantSpec spec_up =
        make_spec(prob.dim, y_dir_up * radius, eps_t);
    std::vector<EncodedBlob> up_blobs;
    for (int i = 0; i < prob.n; ++i) {
      if (i == topo.master) continue;
      const Eigen::VectorXd& ref =
          t == 0 ? w[static_cast<std::size_t>(topo.master)]
                 : v_local[static_cast<std::size_t>(i)];
      check_distance((w[static_cast<std::size_t>(i)] - ref).norm(),
                     y_dir_up * radius,
                     "direction gather t=" + std::to_string(t) +
                         ": ||M_bar^-1 grad f_i - ref|| <= 4 n kappa(M) R(t)");
      up_blobs.push_back(encode(w[static_cast<std::size_t>(i)], spec_up));
    }
    gather(topo, ledger, "dir_up", up_blobs);
    {
      std::size_t k = 0;
      for (int i = 0; i < prob.n; ++i) {
        const Eigen::VectorXd& ref =
            t == 0 ? w[static_cast<std::size_t>(topo.master)]
                   : v_local[static_cast<std::size_t>(i)];
        if (i == topo.master) {
          EncodedBlob self =
              encode(w[static_cast<std::size_t>(i)], spec_up);
          v_local[static_cast<std::size_t>(i)] = decode(self, ref);
        } else {
          v_local[static_cast<std::size_t>(i)] = decode(up_blobs[k++], ref);
        }
      }
    }

    Eigen::VectorXd r_avg = Eigen::VectorXd::Zero(prob.dim);
    for (const Eigen::VectorXd& vi : v_local) r_avg += vi;
    r_avg /= prob.n;

    // averaged direction down, decoded against the previous global estimate
    // (round 0: against each node's own local direction)
    QuantSpec spec_down =
        make_spec(prob.dim, y_dir_down * radius, eps_t);
    EncodedBlob down_blob = encode(r_avg, spec_down);
    broadcast(topo, ledger, "dir_down", down_blob);
    Eigen::VectorXd v_new;
    for (int i = 0; i < prob.n; ++i) {
      const Eigen::VectorXd& ref =
          t == 0 ? w[static_cast<std::size_t>(i)] : v_global;
      check_distance(
          (r_avg - ref).norm(), y_dir_down * radius,
          "direction broadcast t=" + std::to_string(t) +
              ": ||r(t) - ref|| <= (delta/2 + 4 n kappa(M)) R(t)");
      Eigen::VectorXd decoded = decode(down_blob, ref);
      if (i == 0) {
        v_new = decoded;
      } else {
        require((decoded.array() == v_new.array()).all(),
                "direction broadcast: nodes decoded different directions");
      }
    }
    v_global = v_new;

    // descent inequalities for round t
    double slack_iter = bound - row.err;
    require(slack_iter >= 0.0,
            "iterate bound t=" + std::to_string(t) +
                ": ||x(t) - x*|| <= (1 - 1/(4 kappa_l))^t D violated, slack " +
                num(slack_iter));
    double slack_local = std::numeric_limits<double>::infinity();
    for (int i = 0; i < prob.n; ++i) {
      double s = eps_t - (w[static_cast<std::size_t>(i)] -
                          v_local[static_cast<std::size_t>(i)])
                             .norm();
      slack_local = std::min(slack_local, s);
    }
    require(slack_local >= 0.0,
            "local direction error t=" + std::to_string(t) +
                ": ||M_bar^-1 grad f_i - v_i|| <= delta R(t)/2 violated, "
                "slack " +
                num(slack_local));
    Eigen::VectorXd exact_dir = m_bar_llt.solve(global_grad(prob, x));
    double slack_global = params.delta * radius - (exact_dir - v_global).norm();
    require(slack_global >= 0.0,
            "global direction error t=" + std::to_string(t) +
                ": ||M_bar^-1 grad f - v|| <= delta R(t) violated, slack " +
                num(slack_global));

    row.slacks = {slack_iter, slack_local, slack_global};
    row.bits_round = ledger.total_bits() - bits_before;
    bits_total += row.bits_round;
    row.bits_total = bits_total;
    row.overhead_bits = ledger.total_overhead() - overhead_before;
    run.trace.rows.push_back(row);

    x -= params.eta * v_global;
    radius *= params.rate;
    bound *= params.rate;
  }
  run.trace.x_final = x;
  require(ledger.consistent(), "qpgd_run: ledger totals out of sync");
  return run;
}

Trace qpgd_exact_gradient_mode(const GlmProblem& prob,
                               const QpgdParams& params, int rounds,
                               bool exact_m) {
  Topology topo{prob.n, 0};
  BitLedger scratch;
  SymMatrix m_bar = prob.m;
  if (!exact_m) {
    m_bar = setup_preconditioner(prob, topo, scratch).m_bar;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m_bar.mat());
  require(llt.info() == Eigen::Success,
          "qpgd_exact_gradient_mode: preconditioner not positive definite");

  Trace trace;
  trace.slack_names = {"slack_iterate"};
  Eigen::VectorXd x = prob.x0;
  double err_start = (prob.x0 - prob.x_star).norm();
  double rate = exact_m ? 1.0 - 1.0 / params.kappa_l : params.xi;
  double bound = exact_m ? err_start : params.dist0;
  // rate bounds checked up to numerical noise around the iterate error floor
  double tol = 1e-9 * std::max(1.0, err_start);

  for (int t = 0; t < rounds; ++t) {
    RoundTrace row;
    row.t = t;
    row.err = (x - prob.x_star).norm();
    row.fgap = global_value(prob, x) - prob.f_star;
    row.bound = bound;
    double slack = bound - row.err;
    require(slack >= -tol,
            std::string("exact-gradient mode: contraction bound for ") +
                (exact_m ? "(1 - 1/kappa_l)^t" : "(1 - 1/(2 kappa_l))^t") +
                " violated at t=" + std::to_string(t) + ", slack " +
                num(slack));
    row.slacks = {slack};
    trace.rows.push_back(row);
    x -= params.eta * llt.solve(global_grad(prob, x));
    bound *= rate;
  }
  trace.x_final = x;
  return trace;
}

}  // namespace qopt
