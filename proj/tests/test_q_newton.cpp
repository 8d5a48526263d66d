#include <doctest.h>

#include <cmath>

#include "qopt/errors.hpp"
#include "qopt/harness.hpp"
#include "qopt/q_newton.hpp"

using namespace qopt;

namespace {

GlmProblem desk_logistic(std::uint64_t seed = 3, int n = 3) {
  SyntheticSpec spec;
  spec.m = 120;
  spec.d = 3;
  spec.n = n;
  spec.seed = seed;
  spec.loss = LossKind::logistic;
  spec.rho = 20.0;
  return gen_synthetic(spec);
}

}  // namespace

TEST_SUITE("q_newton") {

TEST_CASE("constant Hessians are routed to the first-order solver") {
  SyntheticSpec spec;
  spec.m = 40;
  spec.d = 3;
  spec.n = 2;
  spec.seed = 1;
  GlmProblem quadratic = gen_synthetic(spec);
  try {
    NewtonParams::from_problem(quadratic);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("qpgd") != std::string::npos);
  }
}

TEST_CASE("parameter validation") {
  GlmProblem prob = desk_logistic();
  CHECK_THROWS_AS(NewtonParams::from_problem(prob, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(NewtonParams::from_problem(prob, 1.0),
                  std::invalid_argument);
  NewtonParams p = NewtonParams::from_problem(prob, 0.5);
  CHECK(p.theta == 0.0625);
  CHECK(p.big_k == 4.0);
  CHECK(p.rate == 0.75);
  CHECK(p.g0 == p.mu / 8.0);
  CHECK(p.ball == p.mu / (4.0 * p.sigma));
}

TEST_CASE("schedules contract by the exact ratio") {
  GlmProblem prob = desk_logistic();
  NewtonParams p = NewtonParams::from_problem(prob, 0.5);
  double g = p.g0;
  for (int t = 0; t < 25; ++t) {
    double next = g * p.rate;
    CHECK(next == g * p.rate);
    CHECK(next / g == doctest::Approx(p.rate).epsilon(1e-15));
    g = next;
  }
}

TEST_CASE("all five descent inequalities hold every round") {
  GlmProblem prob = desk_logistic();
  NewtonParams params = NewtonParams::from_problem(prob, 0.5);
  REQUIRE(prob.spread_c < params.ball);
  set_start(prob, newton_feasible_start(prob, params.ball, 7));
  Topology topo{prob.n, 0};
  BitLedger ledger;
  NewtonOptions opts;
  opts.max_rounds = 25;
  Trace trace = newton_run(prob, params, topo, ledger, opts);
  REQUIRE(trace.rounds() == 26);
  double bound = params.ball;
  for (const RoundTrace& row : trace.rows) {
    CHECK(row.err <= bound);
    CHECK(row.bound == doctest::Approx(bound).epsilon(1e-12));
    REQUIRE(row.slacks.size() == 5);
    for (double s : row.slacks) CHECK(s >= 0.0);
    bound *= params.rate;
  }
  // constant traffic from round 1 on, on both channels
  std::int64_t hess = trace.rows[1].hessian_bits;
  std::int64_t dir = trace.rows[1].direction_bits;
  CHECK(hess > 0);
  CHECK(dir > 0);
  for (int t = 1; t < trace.rounds(); ++t) {
    CHECK(trace.rows[static_cast<std::size_t>(t)].hessian_bits == hess);
    CHECK(trace.rows[static_cast<std::size_t>(t)].direction_bits == dir);
  }
  CHECK(ledger.total_bits() == trace.rows.back().bits_total);
}

TEST_CASE("a nearly quadratic problem contracts fast in one round") {
  SyntheticSpec spec;
  spec.m = 300;
  spec.d = 4;
  spec.n = 3;
  spec.seed = 11;
  spec.loss = LossKind::logistic;
  spec.rho = 80.0;  // regularizer dwarfs the logistic curvature
  GlmProblem prob = gen_synthetic(spec);
  NewtonParams params = NewtonParams::from_problem(prob, 0.5);
  set_start(prob, newton_feasible_start(prob, params.ball, 99));
  Topology topo{prob.n, 0};
  BitLedger ledger;
  NewtonOptions opts;
  opts.max_rounds = 2;
  Trace trace = newton_run(prob, params, topo, ledger, opts);
  CHECK(trace.rows[1].err <= params.rate * trace.rows[0].err);
}

TEST_CASE("single node satisfies the invariants trivially") {
  GlmProblem prob = desk_logistic(9, 1);
  NewtonParams params = NewtonParams::from_problem(prob, 0.5);
  set_start(prob, prob.x_star);  // x* = x_1*, radius zero
  Topology topo{1, 0};
  BitLedger ledger;
  NewtonState st = newton_init(prob, params, topo, ledger, prob.x0);
  CHECK(ledger.total_bits() == 0);
  CHECK(st.v_global.norm() <= params.theta * params.p0);
  for (double s : {st.slack_iterate, st.slack_hess_local,
                   st.slack_hess_global, st.slack_dir_local,
                   st.slack_dir_global}) {
    CHECK(s >= 0.0);
  }
  newton_round(st, prob, params, topo, ledger);
  CHECK(st.t == 1);
  CHECK(ledger.total_bits() == 0);
}

TEST_CASE("starts outside the convergence ball are rejected") {
  GlmProblem prob = desk_logistic();
  NewtonParams params = NewtonParams::from_problem(prob, 0.5);
  Eigen::VectorXd far = prob.x_star;
  far[0] += 10.0 * params.ball;
  Topology topo{prob.n, 0};
  BitLedger ledger;
  CHECK_THROWS_AS(newton_init(prob, params, topo, ledger, far),
                  std::invalid_argument);
}

TEST_CASE("halving the target costs at most three extra rounds") {
  GlmProblem prob = desk_logistic();
  NewtonParams params = NewtonParams::from_problem(prob, 0.5);
  set_start(prob, newton_feasible_start(prob, params.ball, 7));
  Topology topo{prob.n, 0};
  int rounds[2] = {0, 0};
  double eps[2] = {1e-6, 5e-7};
  for (int k = 0; k < 2; ++k) {
    BitLedger ledger;
    NewtonOptions opts;
    opts.max_rounds = 100;
    opts.target_fgap = eps[k];
    Trace trace = newton_run(prob, params, topo, ledger, opts);
    CHECK(trace.reached_target);
    rounds[k] = trace.rounds();
  }
  CHECK(rounds[1] - rounds[0] <= 3);  // ceil(4 log 2)
}

TEST_CASE("stochastic update mode runs without guarantees") {
  GlmProblem prob = desk_logistic();
  NewtonParams params = NewtonParams::from_problem(prob, 0.5);
  set_start(prob, newton_feasible_start(prob, params.ball, 7));
  Topology topo{prob.n, 0};
  BitLedger ledger;
  NewtonOptions opts;
  opts.max_rounds = 15;
  opts.qsgd_updates = true;
  opts.qsgd_levels = 256;
  opts.seed = 4;
  Trace trace = newton_run(prob, params, topo, ledger, opts);
  CHECK(trace.rounds() >= 2);
  if (!trace.diverged) {
    CHECK(trace.rows.back().err <= trace.rows.front().err);
  }
}

TEST_CASE("runs are deterministic") {
  GlmProblem prob = desk_logistic();
  NewtonParams params = NewtonParams::from_problem(prob, 0.5);
  set_start(prob, newton_feasible_start(prob, params.ball, 7));
  Topology topo{prob.n, 0};
  BitLedger l1, l2;
  NewtonOptions opts;
  opts.max_rounds = 10;
  Trace a = newton_run(prob, params, topo, l1, opts);
  Trace b = newton_run(prob, params, topo, l2, opts);
  REQUIRE(a.rounds() == b.rounds());
  for (int t = 0; t < a.rounds(); ++t) {
    CHECK(a.rows[static_cast<std::size_t>(t)].err ==
          b.rows[static_cast<std::size_t>(t)].err);
  }
}

}  // TEST_SUITE
