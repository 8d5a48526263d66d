#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qopt/glm_model.hpp"
#include "qopt/q_newton.hpp"
#include "qopt/qpgd.hpp"
#include "qopt/trace.hpp"

namespace qopt {

struct LibsvmData {
  Eigen::MatrixXd a;
  Eigen::VectorXd labels;
};

// Parses `<label> <index>:<value> ...` lines, 1-based strictly ascending
// indices, zeros for absent features. dim < 0 infers the width from the
// largest index seen. map_labels remaps a two-valued label column onto
// {-1, +1} (larger value to +1). Malformed input raises with the line number.
LibsvmData load_libsvm(const std::string& path, int dim = -1,
                       bool map_labels = false);
void write_libsvm(const std::string& path, const Eigen::MatrixXd& a,
                  const Eigen::VectorXd& labels);

struct SyntheticSpec {
  int m = 200;
  int d = 5;
  int n = 4;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::quadratic;
  double rho = 0.0;    // logistic regularization
  double noise = 0.0;  // target noise scale; 0 reproduces B = A x_opt exactly
};

// Gaussian data with a variance-1000 planted optimum, rows randomly and
// evenly partitioned across nodes. Deterministic in the seed; retries with a
// derived sub-seed (up to 5 times) if the sample comes out rank-deficient.
GlmProblem gen_synthetic(const SyntheticSpec& spec);

// Evenly partition loaded data across n nodes (seeded random row shuffle).
GlmProblem make_problem_from_data(const Eigen::MatrixXd& a,
                                  const Eigen::VectorXd& targets,
                                  LossKind loss, double rho, int n,
                                  std::uint64_t seed);

// Random start inside the second-order convergence ball: walks from x* and
// halves the offset until max_i{||x0 - x*||, ||x0 - x_i*||} <= ball.
Eigen::VectorXd newton_feasible_start(const GlmProblem& prob, double ball,
                                      std::uint64_t seed);

struct ExperimentConfig {
  std::string dataset = "synthetic-gaussian";  // or "libsvm-file"
  std::string libsvm_path;
  bool map_labels = false;
  std::string loss = "quadratic";  // or "logistic"
  int m = 200;
  int d = 5;
  int nodes = 4;
  std::uint64_t seed = 1;
  double rho = 0.0;
  double noise = 0.0;
  std::string algo = "qpgd";  // qpgd | qnewton | gd | pgd | qsgd
  double eta = -1.0;          // <= 0: algorithm default
  double alpha = 0.5;
  int levels = 16;
  bool qsgd_hessian = false;
  double eps = 1e-6;  // target accuracy in function value
  int max_rounds = 2000;
  std::string out;  // prefix for <out>_trace.csv etc.; empty: no files
};

// Flat key=value config; '#' starts a comment. Unknown keys are rejected.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

std::string problem_fingerprint(const ExperimentConfig& cfg);

struct ExperimentResult {
  Trace trace;
  std::string algo;
  std::string problem_id;
  bool reached_target = false;
  bool diverged = false;
  int rounds = 0;
  std::int64_t payload_bits = 0;
  std::int64_t overhead_bits = 0;
  double final_err = 0.0;
  double final_fgap = 0.0;
  double bits_ratio_gd32 = 0.0;  // gd_full bits to same target / own bits
  std::string trace_csv;
  std::string ledger_csv;
  std::string summary_text;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct CompareRow {
  std::string algo;
  int rounds = 0;
  bool reached = false;
  std::int64_t bits = 0;
  double ratio_vs_gd = 0.0;
};

// Aligns per-algorithm results on one problem; requires at least one entry
// and identical problem fingerprints. Ratios are against the full-precision
// gd row when present.
std::vector<CompareRow> compare_report(
    const std::vector<ExperimentResult>& results);
std::string format_compare_table(const std::vector<CompareRow>& rows);

struct SweepOutcome {
  double eta = 0.0;
  bool reached = false;
  bool diverged = false;
  int rounds = 0;
};

struct SweepResult {
  double best_eta = 0.0;  // largest rate in {1, 1/2, 1/4, ...} that converges
  bool found = false;
  std::vector<SweepOutcome> outcomes;
};

SweepResult sweep_learning_rate(const ExperimentConfig& cfg,
                                int max_powers = 20);

}  // namespace qopt
