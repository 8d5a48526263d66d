#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "qopt/errors.hpp"
#include "qopt/harness.hpp"

using namespace qopt;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  std::string path = "/tmp/qopt_test_" + name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("libsvm parsing worked examples") {
  std::string path = write_temp("basic.svm",
                                "1 1:0.5 3:2.0\n"
                                "-1\n");
  LibsvmData data = load_libsvm(path, 3);
  REQUIRE(data.a.rows() == 2);
  REQUIRE(data.a.cols() == 3);
  CHECK(data.a(0, 0) == 0.5);
  CHECK(data.a(0, 1) == 0.0);
  CHECK(data.a(0, 2) == 2.0);
  CHECK(data.labels[0] == 1.0);
  CHECK(data.a.row(1).isZero(0.0));
  CHECK(data.labels[1] == -1.0);

  // inferred width
  LibsvmData inferred = load_libsvm(path);
  CHECK(inferred.a.cols() == 3);
}

TEST_CASE("libsvm rejects malformed input with line numbers") {
  std::string dup = write_temp("dup.svm", "1 1:0.5 1:2.0\n");
  try {
    load_libsvm(dup);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    std::string what = e.what();
    CHECK(what.find(":1:") != std::string::npos);
    CHECK(what.find("duplicate") != std::string::npos);
  }

  std::string desc = write_temp("desc.svm", "1 1:1.0\n-1 3:1.0 2:5.0\n");
  try {
    load_libsvm(desc);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  std::string junk = write_temp("junk.svm", "1 0.5\n");
  CHECK_THROWS_AS(load_libsvm(junk), std::invalid_argument);
  std::string badlabel = write_temp("badlabel.svm", "abc 1:1\n");
  CHECK_THROWS_AS(load_libsvm(badlabel), std::invalid_argument);
  std::string badindex = write_temp("badindex.svm", "1 0:1.0\n");
  CHECK_THROWS_AS(load_libsvm(badindex), std::invalid_argument);
}

TEST_CASE("libsvm write/read round trip") {
  Eigen::MatrixXd a(3, 4);
  a << 0.5, 0, -2.25, 0, 0, 1e-7, 0, 3.125, 0.1, 0.2, 0.3, 0.4;
  Eigen::VectorXd labels(3);
  labels << 1, -1, 2.5;
  std::string path = "/tmp/qopt_test_roundtrip.svm";
  write_libsvm(path, a, labels);
  LibsvmData back = load_libsvm(path, 4);
  CHECK((back.a.array() == a.array()).all());
  CHECK((back.labels.array() == labels.array()).all());
}

TEST_CASE("label mapping onto +-1") {
  std::string path = write_temp("labels.svm",
                                "0 1:1.0 2:0.5\n"
                                "1 1:0.5 2:1.0\n"
                                "0 1:2.0 2:3.0\n");
  LibsvmData data = load_libsvm(path, 2, true);
  CHECK(data.labels[0] == -1.0);
  CHECK(data.labels[1] == 1.0);
  CHECK(data.labels[2] == -1.0);

  std::string three = write_temp("labels3.svm", "0 1:1\n1 1:1\n2 1:1\n");
  CHECK_THROWS_AS(load_libsvm(three, 1, true), std::invalid_argument);
}

TEST_CASE("synthetic generation is deterministic and checked") {
  SyntheticSpec spec;
  spec.m = 200;
  spec.d = 5;
  spec.n = 4;
  spec.seed = 7;
  GlmProblem a = gen_synthetic(spec);
  GlmProblem b = gen_synthetic(spec);
  REQUIRE(a.shards.size() == b.shards.size());
  for (std::size_t i = 0; i < a.shards.size(); ++i) {
    CHECK((a.shards[i].a.array() == b.shards[i].a.array()).all());
    CHECK((a.shards[i].target.array() == b.shards[i].target.array()).all());
  }
  // consistent targets: the optimum interpolates, the minimum is zero
  CHECK(a.f_star <= 1e-8);

  SyntheticSpec bad = spec;
  bad.m = 4;
  bad.d = 5;
  CHECK_THROWS_AS(gen_synthetic(bad), std::invalid_argument);
}

TEST_CASE("rows are partitioned evenly") {
  SyntheticSpec spec;
  spec.m = 103;
  spec.d = 3;
  spec.n = 4;
  spec.seed = 3;
  GlmProblem prob = gen_synthetic(spec);
  Eigen::Index total = 0;
  for (const Shard& s : prob.shards) {
    total += s.a.rows();
    CHECK(s.a.rows() >= 103 / 4);
    CHECK(s.a.rows() <= 103 / 4 + 1);
  }
  CHECK(total == 103);
}

TEST_CASE("experiments run end to end and deterministically") {
  ExperimentConfig cfg;
  cfg.m = 80;
  cfg.d = 4;
  cfg.nodes = 3;
  cfg.seed = 5;
  cfg.algo = "qpgd";
  cfg.eps = 1e-6;
  ExperimentResult r1 = run_experiment(cfg);
  CHECK(r1.reached_target);
  CHECK(r1.payload_bits > 0);
  CHECK(r1.final_fgap <= 1e-6);

  ExperimentResult r2 = run_experiment(cfg);
  CHECK(r1.trace_csv == r2.trace_csv);
  CHECK(r1.ledger_csv == r2.ledger_csv);
  CHECK(r1.summary_text == r2.summary_text);
}

TEST_CASE("oversized step reports divergence") {
  ExperimentConfig cfg;
  cfg.m = 60;
  cfg.d = 3;
  cfg.nodes = 2;
  cfg.seed = 11;
  cfg.algo = "gd";
  cfg.eta = 1.0;  // far past 2/gamma for this problem
  cfg.eps = 1e-8;
  ExperimentResult r = run_experiment(cfg);
  CHECK(r.diverged);
  CHECK_FALSE(r.reached_target);
}

TEST_CASE("comparison table aligns algorithms on one problem") {
  ExperimentConfig cfg;
  cfg.m = 80;
  cfg.d = 4;
  cfg.nodes = 3;
  cfg.seed = 5;
  cfg.eps = 1e-6;

  std::vector<ExperimentResult> results;
  for (const char* algo : {"qpgd", "pgd", "gd"}) {
    ExperimentConfig c = cfg;
    c.algo = algo;
    results.push_back(run_experiment(c));
  }
  auto rows = compare_report(results);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].ratio_vs_gd == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rows[0].ratio_vs_gd > 0.0);
  std::string table = format_compare_table(rows);
  CHECK(table.find("qpgd") != std::string::npos);

  // single algorithm still renders
  auto single = compare_report({results[0]});
  CHECK(single.size() == 1);

  // empty input and mismatched problems are rejected
  CHECK_THROWS_AS(compare_report({}), std::invalid_argument);
  ExperimentConfig other = cfg;
  other.seed = 6;
  other.algo = "gd";
  std::vector<ExperimentResult> mixed = {results[0], run_experiment(other)};
  CHECK_THROWS_AS(compare_report(mixed), std::invalid_argument);
}

TEST_CASE("config files parse and reject unknown keys") {
  std::string path = write_temp("cfg",
                                "# comment\n"
                                "algo = qnewton\n"
                                "loss=logistic\n"
                                "rho = 20.0\n"
                                "m=120\n"
                                "d = 3\n"
                                "nodes=3\n"
                                "seed=3\n"
                                "eps=1e-5\n");
  ExperimentConfig cfg;
  apply_config_file(cfg, path);
  CHECK(cfg.algo == "qnewton");
  CHECK(cfg.loss == "logistic");
  CHECK(cfg.rho == 20.0);
  CHECK(cfg.m == 120);
  CHECK(cfg.eps == 1e-5);

  std::string bad = write_temp("badcfg", "wat = 1\n");
  ExperimentConfig c2;
  CHECK_THROWS_AS(apply_config_file(c2, bad), std::invalid_argument);
}

TEST_CASE("experiment writes the three output files") {
  ExperimentConfig cfg;
  cfg.m = 60;
  cfg.d = 3;
  cfg.nodes = 2;
  cfg.seed = 2;
  cfg.algo = "pgd";
  cfg.eps = 1e-8;
  cfg.out = "/tmp/qopt_test_out";
  ExperimentResult r = run_experiment(cfg);
  for (const char* suffix : {"_trace.csv", "_ledger.csv", "_summary.txt"}) {
    std::ifstream in(cfg.out + suffix);
    CHECK(in.good());
    std::string first;
    std::getline(in, first);
    CHECK_FALSE(first.empty());
  }
  CHECK(r.summary_text.find("payload_bits=") != std::string::npos);
}

TEST_CASE("learning-rate sweep finds the largest stable rate") {
  ExperimentConfig cfg;
  cfg.m = 60;
  cfg.d = 3;
  cfg.nodes = 2;
  cfg.seed = 11;
  cfg.algo = "gd";
  cfg.eps = 1e-6;
  cfg.max_rounds = 3000;
  SweepResult res = sweep_learning_rate(cfg, 24);
  CHECK(res.found);
  CHECK(res.best_eta > 0.0);
  // everything tried before the winner failed
  for (std::size_t i = 0; i + 1 < res.outcomes.size(); ++i) {
    CHECK_FALSE(res.outcomes[i].reached);
  }
  CHECK(res.outcomes.back().reached);

  ExperimentConfig bad = cfg;
  bad.algo = "qpgd";
  CHECK_THROWS_AS(sweep_learning_rate(bad, 4), std::invalid_argument);
}

TEST_CASE("newton dispatch picks a feasible start") {
  ExperimentConfig cfg;
  cfg.m = 120;
  cfg.d = 3;
  cfg.nodes = 3;
  cfg.seed = 3;
  cfg.loss = "logistic";
  cfg.rho = 20.0;
  cfg.algo = "qnewton";
  cfg.eps = 1e-7;
  cfg.max_rounds = 100;
  ExperimentResult r = run_experiment(cfg);
  CHECK(r.reached_target);
  CHECK(r.final_fgap <= 1e-7);
}

}  // TEST_SUITE
