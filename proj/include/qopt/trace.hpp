#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qopt {

// One optimization round as seen by the harness: iterate error against the
// oracle minimizer, function gap, the theoretical bound for this round, the
// measured slack of each tracked inequality, and the bits spent.
struct RoundTrace {
  int t = 0;
  double err = 0.0;
  double fgap = 0.0;
  double bound = 0.0;
  std::vector<double> slacks;
  std::int64_t hessian_bits = 0;    // matrix channel, second-order runs only
  std::int64_t direction_bits = 0;  // vector channel, second-order runs only
  std::int64_t bits_round = 0;
  std::int64_t bits_total = 0;
  std::int64_t overhead_bits = 0;
};

struct Trace {
  std::vector<std::string> slack_names;
  bool split_channels = false;  // emit hessian/direction columns
  std::vector<RoundTrace> rows;
  Eigen::VectorXd x_final;
  bool diverged = false;
  bool reached_target = false;

  int rounds() const { return static_cast<int>(rows.size()); }
  void write_csv(std::ostream& os) const;
};

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace qopt
