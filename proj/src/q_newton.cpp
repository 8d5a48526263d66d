#include "qopt/q_newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "qopt/baselines.hpp"
#include "qopt/errors.hpp"

namespace qopt {

namespace {

std::string num(double v) { return format_double(v); }

void check_distance(double dist, double bound, const std::string& what) {
  require(dist <= bound, what + ": distance " + num(dist) +
                             " exceeds bound " + num(bound));
}

double lam_min_of(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::VectorXd pack_hessian(const GlmProblem& prob, int i,
                             const Eigen::VectorXd& x) {
  return phi(local_hessian(prob, i, x)).data;
}

SymMatrix unpack_sym(int dim, const Eigen::VectorXd& packed) {
  PackedSym ps;
  ps.dim = dim;
  ps.data = packed;
  return phi_inv(ps);
}

// factor H_t after the positive-definiteness margin check
Eigen::LLT<Eigen::MatrixXd> factor_h(const SymMatrix& h, double mu) {
  double lam_min = lam_min_of(h.mat());
  require(lam_min >= 0.5 * mu * (1.0 - 1e-9),
          "Hessian estimate spectrum: lam_min(H_t) >= mu/2 violated "
          "(lam_min = " +
              num(lam_min) + ", mu/2 = " + num(0.5 * mu) +
              "); state invariants are broken");
  Eigen::LLT<Eigen::MatrixXd> llt(h.mat());
  require(llt.info() == Eigen::Success,
          "Hessian estimate is not positive definite");
  return llt;
}

}  // namespace

NewtonParams NewtonParams::from_problem(const GlmProblem& prob, double alpha) {
  require_input(alpha > 0.0 && alpha < 1.0,
                "NewtonParams: alpha must lie in (0, 1)");
  require_input(prob.newton.sigma > 0.0,
                "NewtonParams: the Hessian is constant (sigma = 0), so "
                "Hessian estimates would need infinite precision; use the "
                "preconditioned first-order solver (qpgd) instead");
  NewtonParams p;
  p.alpha = alpha;
  p.theta = alpha * (1.0 - alpha) / 4.0;
  p.big_k = 2.0 / alpha;
  p.mu = prob.newton.mu;
  p.gamma = prob.newton.gamma;
  p.kappa = prob.newton.kappa;
  p.sigma = prob.newton.sigma;
  p.rate = (1.0 + alpha) / 2.0;
  p.g0 = (p.mu / 4.0) * alpha;
  p.p0 = (p.mu / (2.0 * p.sigma)) * p.big_k * alpha;
  p.ball = alpha * p.mu / (2.0 * p.sigma);
  return p;
}

NewtonState newton_init(const GlmProblem& prob, const NewtonParams& params,
                        const Topology& topo, BitLedger& ledger,
                        const Eigen::VectorXd& x0) {
  require_input(topo.n == prob.n, "newton_init: topology mismatch");
  double r0 = init_radius(prob, x0);
  require_input(
      r0 <= params.ball,
      "newton_init: x0 outside the convergence ball, max_i{||x0 - x*||, "
      "||x0 - x_i*||} = " +
          num(r0) + " > alpha mu/(2 sigma) = " + num(params.ball));

  const int d = prob.dim;
  const int dp = static_cast<int>(packed_len(d));
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  NewtonState st;
  st.t = 0;
  st.x = x0;
  st.g_cur = params.g0;
  st.p_cur = params.p0;
  st.h_local_packed.resize(static_cast<std::size_t>(prob.n));
  st.v_local.resize(static_cast<std::size_t>(prob.n));

  std::int64_t bits_before = ledger.total_bits();
  std::int64_t overhead_before = ledger.total_overhead();

  // (B) initial Hessians, quantized against the master's Hessian going up
  // and against each node's own Hessian coming down
  std::vector<Eigen::VectorXd> hess(static_cast<std::size_t>(prob.n));
  for (int i = 0; i < prob.n; ++i) {
    hess[static_cast<std::size_t>(i)] = pack_hessian(prob, i, x0);
  }
  const Eigen::VectorXd& hess_master =
      hess[static_cast<std::size_t>(topo.master)];
  const double eps_h = params.g0 / (2.0 * std::sqrt(2.0) * params.kappa);
  const double y_h_up = 2.0 * sqrt_d * params.gamma;
  const double y_h_down =
      sqrt_d * (params.g0 / (2.0 * params.kappa) + 2.0 * params.gamma);

  QuantSpec spec_h_up = make_spec(dp, y_h_up, eps_h);
  std::vector<EncodedBlob> up;
  for (int i = 0; i < prob.n; ++i) {
    if (i == topo.master) continue;
    check_distance((hess[static_cast<std::size_t>(i)] - hess_master).norm(),
                   y_h_up,
                   "initial Hessian gather: ||phi(hess_i) - phi(hess_master)|| "
                   "<= 2 sqrt(d) gamma");
    up.push_back(encode(hess[static_cast<std::size_t>(i)], spec_h_up));
  }
  gather(topo, ledger, "hess_up", up);
  {
    std::size_t k = 0;
    for (int i = 0; i < prob.n; ++i) {
      const EncodedBlob blob =
          i == topo.master ? encode(hess_master, spec_h_up) : up[k++];
      st.h_local_packed[static_cast<std::size_t>(i)] =
          decode(blob, hess_master);
    }
  }
  Eigen::VectorXd s_avg = Eigen::VectorXd::Zero(dp);
  for (const auto& h : st.h_local_packed) s_avg += h;
  s_avg /= prob.n;

  QuantSpec spec_h_down = make_spec(dp, y_h_down, eps_h);
  EncodedBlob down = encode(s_avg, spec_h_down);
  broadcast(topo, ledger, "hess_down", down);
  for (int i = 0; i < prob.n; ++i) {
    check_distance((s_avg - hess[static_cast<std::size_t>(i)]).norm(),
                   y_h_down,
                   "initial Hessian broadcast: ||phi(S_0) - phi(hess_i)|| <= "
                   "sqrt(d) (G(0)/(2 kappa) + 2 gamma)");
    Eigen::VectorXd decoded = decode(down, hess[static_cast<std::size_t>(i)]);
    if (i == 0) {
      st.h_global_packed = decoded;
    } else {
      require((decoded.array() == st.h_global_packed.array()).all(),
              "initial Hessian broadcast: nodes decoded different matrices");
    }
  }
  st.h_global = unpack_sym(d, st.h_global_packed);
  st.hessian_bits = ledger.total_bits() - bits_before;

  // estimate-error invariants at t = 0
  st.slack_hess_local = std::numeric_limits<double>::infinity();
  for (int i = 0; i < prob.n; ++i) {
    double err = spectral_norm(SymMatrix(
        unpack_sym(d, st.h_local_packed[static_cast<std::size_t>(i)]).mat() -
        local_hessian(prob, i, x0).mat()));
    st.slack_hess_local = std::min(
        st.slack_hess_local, params.g0 / (2.0 * params.kappa) - err);
  }
  require(st.slack_hess_local >= 0.0,
          "local Hessian error t=0: ||H_0^i - hess_i(x0)|| <= G(0)/(2 kappa) "
          "violated, slack " +
              num(st.slack_hess_local));
  double h_err = spectral_norm(
      SymMatrix(st.h_global.mat() - global_hessian(prob, x0).mat()));
  st.slack_hess_global = params.g0 / params.kappa - h_err;
  require(st.slack_hess_global >= 0.0,
          "global Hessian error t=0: ||H_0 - hess(x0)|| <= G(0)/kappa "
          "violated, slack " +
              num(st.slack_hess_global));

  // (C) initial directions
  Eigen::LLT<Eigen::MatrixXd> llt = factor_h(st.h_global, params.mu);
  std::vector<Eigen::VectorXd> dir(static_cast<std::size_t>(prob.n));
  for (int i = 0; i < prob.n; ++i) {
    dir[static_cast<std::size_t>(i)] = llt.solve(local_grad(prob, i, x0));
  }
  const Eigen::VectorXd& dir_master =
      dir[static_cast<std::size_t>(topo.master)];
  const double eps_d = params.theta * params.p0 / 2.0;
  const double y_d_up = 4.0 * params.kappa * params.p0;
  const double y_d_down =
      (params.theta / 2.0 + 4.0 * params.kappa) * params.p0;

  std::int64_t dir_bits_before = ledger.total_bits();
  QuantSpec spec_d_up = make_spec(d, y_d_up, eps_d);
  std::vector<EncodedBlob> dir_up;
  for (int i = 0; i < prob.n; ++i) {
    if (i == topo.master) continue;
    check_distance((dir[static_cast<std::size_t>(i)] - dir_master).norm(),
                   y_d_up,
                   "initial direction gather: ||H_0^-1 grad f_i - H_0^-1 grad "
                   "f_master|| <= 4 kappa P(0)");
    dir_up.push_back(encode(dir[static_cast<std::size_t>(i)], spec_d_up));
  }
  gather(topo, ledger, "dir_up", dir_up);
  {
    std::size_t k = 0;
    for (int i = 0; i < prob.n; ++i) {
      const EncodedBlob blob =
          i == topo.master ? encode(dir_master, spec_d_up) : dir_up[k++];
      st.v_local[static_cast<std::size_t>(i)] = decode(blob, dir_master);
    }
  }
  Eigen::VectorXd p_avg = Eigen::VectorXd::Zero(d);
  for (const auto& v : st.v_local) p_avg += v;
  p_avg /= prob.n;

  QuantSpec spec_d_down = make_spec(d, y_d_down, eps_d);
  EncodedBlob dir_down = encode(p_avg, spec_d_down);
  broadcast(topo, ledger, "dir_down", dir_down);
  for (int i = 0; i < prob.n; ++i) {
    check_distance((p_avg - dir[static_cast<std::size_t>(i)]).norm(), y_d_down,
                   "initial direction broadcast: ||p(0) - H_0^-1 grad f_i|| "
                   "<= (theta/2 + 4 kappa) P(0)");
    Eigen::VectorXd decoded =
        decode(dir_down, dir[static_cast<std::size_t>(i)]);
    if (i == 0) {
      st.v_global = decoded;
    } else {
      require((decoded.array() == st.v_global.array()).all(),
              "initial direction broadcast: nodes decoded different vectors");
    }
  }
  st.direction_bits = ledger.total_bits() - dir_bits_before;
  st.overhead_bits = ledger.total_overhead() - overhead_before;

  st.slack_iterate = params.ball - (x0 - prob.x_star).norm();
  st.slack_dir_local = std::numeric_limits<double>::infinity();
  for (int i = 0; i < prob.n; ++i) {
    double e = (dir[static_cast<std::size_t>(i)] -
                st.v_local[static_cast<std::size_t>(i)])
                   .norm();
    st.slack_dir_local = std::min(st.slack_dir_local, eps_d - e);
  }
  require(st.slack_dir_local >= 0.0,
          "local direction error t=0: ||H_0^-1 grad f_i - v_i|| <= theta "
          "P(0)/2 violated, slack " +
              num(st.slack_dir_local));
  double dir_err = (llt.solve(global_grad(prob, x0)) - st.v_global).norm();
  st.slack_dir_global = params.theta * params.p0 - dir_err;
  require(st.slack_dir_global >= 0.0,
          "global direction error t=0: ||H_0^-1 grad f - v|| <= theta P(0) "
          "violated, slack " +
              num(st.slack_dir_global));
  return st;
}

void newton_round(NewtonState& st, const GlmProblem& prob,
                  const NewtonParams& params, const Topology& topo,
                  BitLedger& ledger) {
  require_input(topo.n == prob.n, "newton_round: topology mismatch");
  const int d = prob.dim;
  const int dp = static_cast<int>(packed_len(d));
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const int t_next = st.t + 1;
  const double g_next = st.g_cur * params.rate;
  const double p_next = st.p_cur * params.rate;

  std::int64_t bits_before = ledger.total_bits();
  std::int64_t overhead_before = ledger.total_overhead();

  Eigen::VectorXd x_next = st.x - st.v_global;

  // (D) Hessians against each node's previous estimate going up, against the
  // previous shared estimate coming down
  std::vector<Eigen::VectorXd> hess(static_cast<std::size_t>(prob.n));
  for (int i = 0; i < prob.n; ++i) {
    hess[static_cast<std::size_t>(i)] = pack_hessian(prob, i, x_next);
  }
  const double eps_h = g_next / (2.0 * std::sqrt(2.0) * params.kappa);
  const double y_h_up = 10.0 * sqrt_d / (1.0 + params.alpha) * g_next;
  const double y_h_down =
      sqrt_d *
      (1.0 / (2.0 * params.kappa) + 10.0 / (1.0 + params.alpha)) * g_next;

  QuantSpec spec_h_up = make_spec(dp, y_h_up, eps_h);
  std::vector<EncodedBlob> up;
  for (int i = 0; i < prob.n; ++i) {
    if (i == topo.master) continue;
    check_distance(
        (hess[static_cast<std::size_t>(i)] -
         st.h_local_packed[static_cast<std::size_t>(i)])
            .norm(),
        y_h_up,
        "Hessian gather t=" + std::to_string(t_next) +
            ": ||phi(hess_i) - phi(H_t^i)|| <= 10 sqrt(d) G(t+1)/(1+alpha)");
    up.push_back(encode(hess[static_cast<std::size_t>(i)], spec_h_up));
  }
  gather(topo, ledger, "hess_up", up);
  {
    std::size_t k = 0;
    for (int i = 0; i < prob.n; ++i) {
      const EncodedBlob blob =
          i == topo.master
              ? encode(hess[static_cast<std::size_t>(i)], spec_h_up)
              : up[k++];
      st.h_local_packed[static_cast<std::size_t>(i)] =
          decode(blob, st.h_local_packed[static_cast<std::size_t>(i)]);
    }
  }
  Eigen::VectorXd s_avg = Eigen::VectorXd::Zero(dp);
  for (const auto& h : st.h_local_packed) s_avg += h;
  s_avg /= prob.n;

  QuantSpec spec_h_down = make_spec(dp, y_h_down, eps_h);
  EncodedBlob down = encode(s_avg, spec_h_down);
  broadcast(topo, ledger, "hess_down", down);
  check_distance((s_avg - st.h_global_packed).norm(), y_h_down,
                 "Hessian broadcast t=" + std::to_string(t_next) +
                     ": ||phi(S_{t+1}) - phi(H_t)|| <= sqrt(d) (1/(2 kappa) + "
                     "10/(1+alpha)) G(t+1)");
  st.h_global_packed = decode(down, st.h_global_packed);
  st.h_global = unpack_sym(d, st.h_global_packed);
  st.hessian_bits = ledger.total_bits() - bits_before;

  st.slack_hess_local = std::numeric_limits<double>::infinity();
  for (int i = 0; i < prob.n; ++i) {
    double err = spectral_norm(SymMatrix(
        unpack_sym(d, st.h_local_packed[static_cast<std::size_t>(i)]).mat() -
        local_hessian(prob, i, x_next).mat()));
    st.slack_hess_local =
        std::min(st.slack_hess_local, g_next / (2.0 * params.kappa) - err);
  }
  require(st.slack_hess_local >= 0.0,
          "local Hessian error t=" + std::to_string(t_next) +
              ": ||H_t^i - hess_i(x_t)|| <= G(t)/(2 kappa) violated, slack " +
              num(st.slack_hess_local));
  double h_err = spectral_norm(
      SymMatrix(st.h_global.mat() - global_hessian(prob, x_next).mat()));
  st.slack_hess_global = g_next / params.kappa - h_err;
  require(st.slack_hess_global >= 0.0,
          "global Hessian error t=" + std::to_string(t_next) +
              ": ||H_t - hess(x_t)|| <= G(t)/kappa violated, slack " +
              num(st.slack_hess_global));

  // (E) directions against the previous estimates
  Eigen::LLT<Eigen::MatrixXd> llt = factor_h(st.h_global, params.mu);
  std::vector<Eigen::VectorXd> dir(static_cast<std::size_t>(prob.n));
  for (int i = 0; i < prob.n; ++i) {
    dir[static_cast<std::size_t>(i)] = llt.solve(local_grad(prob, i, x_next));
  }
  const double eps_d = params.theta * p_next / 2.0;
  const double y_d_up = 11.0 * params.kappa * p_next;
  const double y_d_down = (params.theta / 2.0 + 11.0 * params.kappa) * p_next;

  std::int64_t dir_bits_before = ledger.total_bits();
  QuantSpec spec_d_up = make_spec(d, y_d_up, eps_d);
  std::vector<EncodedBlob> dir_up;
  for (int i = 0; i < prob.n; ++i) {
    if (i == topo.master) continue;
    check_distance((dir[static_cast<std::size_t>(i)] -
                    st.v_local[static_cast<std::size_t>(i)])
                       .norm(),
                   y_d_up,
                   "direction gather t=" + std::to_string(t_next) +
                       ": ||H_{t+1}^-1 grad f_i - v_i(t)|| <= 11 kappa "
                       "P(t+1)");
    dir_up.push_back(encode(dir[static_cast<std::size_t>(i)], spec_d_up));
  }
  gather(topo, ledger, "dir_up", dir_up);
  {
    std::size_t k = 0;
    for (int i = 0; i < prob.n; ++i) {
      const EncodedBlob blob =
          i == topo.master
              ? encode(dir[static_cast<std::size_t>(i)], spec_d_up)
              : dir_up[k++];
      st.v_local[static_cast<std::size_t>(i)] =
          decode(blob, st.v_local[static_cast<std::size_t>(i)]);
    }
  }
  Eigen::VectorXd p_avg = Eigen::VectorXd::Zero(d);
  for (const auto& v : st.v_local) p_avg += v;
  p_avg /= prob.n;

  QuantSpec spec_d_down = make_spec(d, y_d_down, eps_d);
  EncodedBlob dir_down = encode(p_avg, spec_d_down);
  broadcast(topo, ledger, "dir_down", dir_down);
  check_distance((p_avg - st.v_global).norm(), y_d_down,
                 "direction broadcast t=" + std::to_string(t_next) +
                     ": ||p(t+1) - v(t)|| <= (theta/2 + 11 kappa) P(t+1)");
  st.v_global = decode(dir_down, st.v_global);
  st.direction_bits = ledger.total_bits() - dir_bits_before;
  st.overhead_bits = ledger.total_overhead() - overhead_before;

  double err = (x_next - prob.x_star).norm();
  st.slack_iterate = p_next / params.big_k - err;
  require(st.slack_iterate >= 0.0,
          "iterate bound t=" + std::to_string(t_next) +
              ": ||x(t) - x*|| <= (mu alpha/(2 sigma)) ((1+alpha)/2)^t "
              "violated, slack " +
              num(st.slack_iterate));
  st.slack_dir_local = std::numeric_limits<double>::infinity();
  for (int i = 0; i < prob.n; ++i) {
    double e = (dir[static_cast<std::size_t>(i)] -
                st.v_local[static_cast<std::size_t>(i)])
                   .norm();
    st.slack_dir_local = std::min(st.slack_dir_local, eps_d - e);
  }
  require(st.slack_dir_local >= 0.0,
          "local direction error t=" + std::to_string(t_next) +
              ": ||H_t^-1 grad f_i - v_i|| <= theta P(t)/2 violated, slack " +
              num(st.slack_dir_local));
  double dir_err = (llt.solve(global_grad(prob, x_next)) - st.v_global).norm();
  st.slack_dir_global = params.theta * p_next - dir_err;
  require(st.slack_dir_global >= 0.0,
          "global direction error t=" + std::to_string(t_next) +
              ": ||H_t^-1 grad f - v|| <= theta P(t) violated, slack " +
              num(st.slack_dir_global));

  st.x = x_next;
  st.t = t_next;
  st.g_cur = g_next;
  st.p_cur = p_next;
}

namespace {

// Unvalidated variant: stochastic difference quantization for Hessian and
// direction traffic after the lattice-coded init.
void newton_round_qsgd(NewtonState& st, const GlmProblem& prob,
                       const NewtonParams& params, const Topology& topo,
                       BitLedger& ledger, int levels, Rng& rng) {
  const int d = prob.dim;
  std::int64_t bits_before = ledger.total_bits();
  std::int64_t overhead_before = ledger.total_overhead();

  Eigen::VectorXd x_next = st.x - st.v_global;

  for (int i = 0; i < prob.n; ++i) {
    Eigen::VectorXd diff = pack_hessian(prob, i, x_next) -
                           st.h_local_packed[static_cast<std::size_t>(i)];
    QsgdResult q = qsgd_quantize(diff, levels, rng);
    if (i != topo.master) {
      ledger.add("hess_up", Direction::to_master, i, q.payload_bits,
                 q.overhead_bits);
    }
    st.h_local_packed[static_cast<std::size_t>(i)] += q.value;
  }
  Eigen::VectorXd s_avg = Eigen::VectorXd::Zero(packed_len(d));
  for (const auto& h : st.h_local_packed) s_avg += h;
  s_avg /= prob.n;
  {
    QsgdResult q = qsgd_quantize(s_avg - st.h_global_packed, levels, rng);
    for (int i = 0; i < prob.n; ++i) {
      if (i == topo.master) continue;
      ledger.add("hess_down", Direction::to_workers, i, q.payload_bits,
                 q.overhead_bits);
    }
    st.h_global_packed += q.value;
  }
  st.h_global = unpack_sym(d, st.h_global_packed);
  st.hessian_bits = ledger.total_bits() - bits_before;

  Eigen::LLT<Eigen::MatrixXd> llt(st.h_global.mat());
  require(llt.info() == Eigen::Success,
          "stochastic Hessian update lost positive definiteness");
  std::int64_t dir_bits_before = ledger.total_bits();
  for (int i = 0; i < prob.n; ++i) {
    Eigen::VectorXd diff = llt.solve(local_grad(prob, i, x_next)) -
                           st.v_local[static_cast<std::size_t>(i)];
    QsgdResult q = qsgd_quantize(diff, levels, rng);
    if (i != topo.master) {
      ledger.add("dir_up", Direction::to_master, i, q.payload_bits,
                 q.overhead_bits);
    }
    st.v_local[static_cast<std::size_t>(i)] += q.value;
  }
  Eigen::VectorXd p_avg = Eigen::VectorXd::Zero(d);
  for (const auto& v : st.v_local) p_avg += v;
  p_avg /= prob.n;
  {
    QsgdResult q = qsgd_quantize(p_avg - st.v_global, levels, rng);
    for (int i = 0; i < prob.n; ++i) {
      if (i == topo.master) continue;
      ledger.add("dir_down", Direction::to_workers, i, q.payload_bits,
                 q.overhead_bits);
    }
    st.v_global += q.value;
  }
  st.direction_bits = ledger.total_bits() - dir_bits_before;
  st.overhead_bits = ledger.total_overhead() - overhead_before;

  st.slack_iterate = st.slack_hess_local = st.slack_hess_global = 0.0;
  st.slack_dir_local = st.slack_dir_global = 0.0;
  st.x = x_next;
  st.t += 1;
  st.g_cur *= params.rate;
  st.p_cur *= params.rate;
}

}  // namespace

Trace newton_run(const GlmProblem& prob, const NewtonParams& params,
                 const Topology& topo, BitLedger& ledger,
                 const NewtonOptions& opts) {
  Trace trace;
  trace.slack_names = {"slack_iterate", "slack_hess_local",
                       "slack_hess_global", "slack_dir_local",
                       "slack_dir_global"};
  trace.split_channels = true;

  double fgap0 = global_value(prob, prob.x0) - prob.f_star;
  if (opts.target_fgap >= 0.0 && fgap0 <= opts.target_fgap) {
    RoundTrace row;
    row.t = 0;
    row.err = (prob.x0 - prob.x_star).norm();
    row.fgap = fgap0;
    row.bound = params.ball;
    row.slacks.assign(5, 0.0);
    trace.rows.push_back(row);
    trace.reached_target = true;
    trace.x_final = prob.x0;
    return trace;
  }

  Rng rng(opts.seed ^ 0x9e3779b97f4a7c15ull);
  ledger.set_round(0);
  NewtonState st = newton_init(prob, params, topo, ledger, prob.x0);

  std::int64_t bits_total = 0;
  auto push_row = [&](const NewtonState& s) {
    RoundTrace row;
    row.t = s.t;
    row.err = (s.x - prob.x_star).norm();
    row.fgap = global_value(prob, s.x) - prob.f_star;
    row.bound = s.p_cur / params.big_k;  // (mu alpha/(2 sigma)) rate^t
    row.slacks = {s.slack_iterate, s.slack_hess_local, s.slack_hess_global,
                  s.slack_dir_local, s.slack_dir_global};
    row.hessian_bits = s.hessian_bits;
    row.direction_bits = s.direction_bits;
    row.bits_round = s.hessian_bits + s.direction_bits;
    bits_total += row.bits_round;
    row.bits_total = bits_total;
    row.overhead_bits = s.overhead_bits;
    trace.rows.push_back(row);
    return row.fgap;
  };

  double fgap = push_row(st);
  double err_prev = trace.rows.back().err;
  int grew = 0;
  while (st.t < opts.max_rounds &&
         !(opts.target_fgap >= 0.0 && fgap <= opts.target_fgap)) {
    ledger.set_round(st.t + 1);
    if (opts.qsgd_updates) {
      newton_round_qsgd(st, prob, params, topo, ledger, opts.qsgd_levels,
                        rng);
    } else {
      newton_round(st, prob, params, topo, ledger);
    }
    fgap = push_row(st);
    double err = trace.rows.back().err;
    grew = err > err_prev ? grew + 1 : 0;
    if (opts.qsgd_updates && grew >= 10) {
      trace.diverged = true;
      break;
    }
    err_prev = err;
  }
  trace.reached_target = opts.target_fgap >= 0.0 && fgap <= opts.target_fgap;
  trace.x_final = st.x;
  require(ledger.consistent(), "newton_run: ledger totals out of sync");
  return trace;
}

}  // namespace qopt
