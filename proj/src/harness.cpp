#include "qopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "qopt/baselines.hpp"
#include "qopt/errors.hpp"
#include "qopt/min_estimator.hpp"
#include "qopt/rng.hpp"

namespace qopt {

namespace {

[[noreturn]] void line_error(const std::string& path, int line,
                             const std::string& msg) {
  throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + msg);
}

struct ParsedRow {
  double label = 0.0;
  std::vector<std::pair<int, double>> features;
};

}  // namespace

LibsvmData load_libsvm(const std::string& path, int dim, bool map_labels) {
  std::ifstream in(path);
  require_input(in.good(), "load_libsvm: cannot open " + path);

  std::vector<ParsedRow> rows;
  int max_index = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;  // blank line
    ParsedRow row;
    try {
      std::size_t used = 0;
      row.label = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      line_error(path, lineno, "malformed label '" + token + "'");
    }
    int prev_index = 0;
    while (ss >> token) {
      std::size_t colon = token.find(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 >= token.size()) {
        line_error(path, lineno, "malformed feature '" + token + "'");
      }
      int index = 0;
      double value = 0.0;
      try {
        std::size_t used = 0;
        index = std::stoi(token.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("trailing");
        used = 0;
        std::string val = token.substr(colon + 1);
        value = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        line_error(path, lineno, "malformed feature '" + token + "'");
      }
      if (index < 1) {
        line_error(path, lineno, "feature index must be >= 1");
      }
      if (index == prev_index) {
        line_error(path, lineno,
                   "duplicate feature index " + std::to_string(index));
      }
      if (index < prev_index) {
        line_error(path, lineno, "feature indices must be ascending");
      }
      prev_index = index;
      max_index = std::max(max_index, index);
      row.features.emplace_back(index, value);
    }
    rows.push_back(std::move(row));
  }
  require_input(!rows.empty(), "load_libsvm: no samples in " + path);
  int width = dim > 0 ? dim : max_index;
  require_input(max_index <= width,
                "load_libsvm: feature index exceeds requested dimension");
  require_input(width >= 1, "load_libsvm: no features found");

  LibsvmData data;
  data.a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                 width);
  data.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    data.labels[static_cast<Eigen::Index>(r)] = rows[r].label;
    for (const auto& [index, value] : rows[r].features) {
      data.a(static_cast<Eigen::Index>(r), index - 1) = value;
    }
  }

  if (map_labels) {
    std::set<double> distinct(data.labels.begin(), data.labels.end());
    bool already = distinct == std::set<double>{-1.0, 1.0} ||
                   distinct == std::set<double>{-1.0} ||
                   distinct == std::set<double>{1.0};
    if (!already) {
      require_input(distinct.size() == 2,
                    "load_libsvm: label mapping needs exactly two distinct "
                    "label values");
      double hi = *distinct.rbegin();
      for (Eigen::Index r = 0; r < data.labels.size(); ++r) {
        data.labels[r] = data.labels[r] == hi ? 1.0 : -1.0;
      }
    }
  }
  return data;
}

void write_libsvm(const std::string& path, const Eigen::MatrixXd& a,
                  const Eigen::VectorXd& labels) {
  require_input(a.rows() == labels.size(), "write_libsvm: size mismatch");
  std::ofstream out(path);
  require_input(out.good(), "write_libsvm: cannot open " + path);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    out << format_double(labels[r]);
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (a(r, c) != 0.0) {
        out << ' ' << (c + 1) << ':' << format_double(a(r, c));
      }
    }
    out << '\n';
  }
}

GlmProblem make_problem_from_data(const Eigen::MatrixXd& a,
                                  const Eigen::VectorXd& targets,
                                  LossKind loss, double rho, int n,
                                  std::uint64_t seed) {
  require_input(n >= 1, "make_problem_from_data: need n >= 1");
  require_input(a.rows() >= n, "make_problem_from_data: fewer rows than nodes");
  Eigen::Index m = a.rows();

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed ^ 0xd1b54a32d192ed03ull);
  for (Eigen::Index i = m - 1; i > 0; --i) {
    auto j = static_cast<Eigen::Index>(
        rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(j)]);
  }

  std::vector<Shard> shards;
  Eigen::Index next = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::Index count = m / n + (i < m % n ? 1 : 0);
    Shard shard;
    shard.a.resize(count, a.cols());
    shard.target.resize(count);
    for (Eigen::Index r = 0; r < count; ++r) {
      shard.a.row(r) = a.row(perm[static_cast<std::size_t>(next)]);
      shard.target[r] = targets[perm[static_cast<std::size_t>(next)]];
      ++next;
    }
    shards.push_back(std::move(shard));
  }
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(a.cols());
  return compute_constants(std::move(shards), loss, rho, x0);
}

GlmProblem gen_synthetic(const SyntheticSpec& spec) {
  require_input(spec.m > spec.d,
                "gen_synthetic: need more samples than dimensions (m > d)");
  require_input(spec.n >= 1 && spec.m >= spec.n,
                "gen_synthetic: bad node count");

  std::string last_error;
  for (int attempt = 0; attempt < 5; ++attempt) {
    std::uint64_t sub_seed =
        spec.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(attempt);
    Rng rng(sub_seed);
    Eigen::MatrixXd a(spec.m, spec.d);
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        a(r, c) = rng.gaussian();
      }
    }
    Eigen::VectorXd x_opt(spec.d);
    for (Eigen::Index c = 0; c < x_opt.size(); ++c) {
      x_opt[c] = rng.gaussian() * std::sqrt(1000.0);
    }
    Eigen::VectorXd targets(spec.m);
    if (spec.loss == LossKind::quadratic) {
      targets = a * x_opt;
      if (spec.noise > 0.0) {
        for (Eigen::Index r = 0; r < targets.size(); ++r) {
          targets[r] += spec.noise * rng.gaussian();
        }
      }
    } else {
      Eigen::VectorXd margin = a * x_opt;
      for (Eigen::Index r = 0; r < targets.size(); ++r) {
        double v = margin[r] + spec.noise * std::sqrt(1000.0) * rng.gaussian();
        targets[r] = v >= 0.0 ? 1.0 : -1.0;
      }
    }
    try {
      return make_problem_from_data(a, targets, spec.loss, spec.rho, spec.n,
                                    sub_seed);
    } catch (const std::invalid_argument& e) {
      last_error = e.what();  // rank deficiency; resample
    }
  }
  throw std::invalid_argument(
      "gen_synthetic: no full-rank sample after 5 attempts; last error: " +
      last_error);
}

Eigen::VectorXd newton_feasible_start(const GlmProblem& prob, double ball,
                                      std::uint64_t seed) {
  Rng rng(seed ^ 0xa076bc9b05104d25ull);
  Eigen::VectorXd u(prob.dim);
  for (Eigen::Index c = 0; c < u.size(); ++c) u[c] = rng.gaussian();
  double norm = u.norm();
  require_input(norm > 0.0, "newton_feasible_start: degenerate direction");
  u /= norm;

  double r = 0.9 * ball;
  for (int k = 0; k < 80; ++k) {
    Eigen::VectorXd x0 = prob.x_star + r * u;
    if (init_radius(prob, x0) <= ball) return x0;
    r *= 0.5;
  }
  throw std::invalid_argument(
      "newton_feasible_start: no start satisfies the convergence ball; the "
      "local minimizers are spread wider than alpha mu/(2 sigma)");
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  require_input(in.good(), "config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::size_t eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) {
      line_error(path, lineno, "expected key=value");
    }
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t\r");
      std::size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string()
                                    : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "dataset") cfg.dataset = value;
      else if (key == "libsvm") cfg.libsvm_path = value;
      else if (key == "map_labels") cfg.map_labels = value == "1" || value == "true";
      else if (key == "loss") cfg.loss = value;
      else if (key == "m") cfg.m = std::stoi(value);
      else if (key == "d") cfg.d = std::stoi(value);
      else if (key == "nodes") cfg.nodes = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "rho") cfg.rho = std::stod(value);
      else if (key == "noise") cfg.noise = std::stod(value);
      else if (key == "algo") cfg.algo = value;
      else if (key == "eta") cfg.eta = std::stod(value);
      else if (key == "alpha") cfg.alpha = std::stod(value);
      else if (key == "levels") cfg.levels = std::stoi(value);
      else if (key == "qsgd_hessian") cfg.qsgd_hessian = value == "1" || value == "true";
      else if (key == "eps") cfg.eps = std::stod(value);
      else if (key == "max_rounds") cfg.max_rounds = std::stoi(value);
      else if (key == "out") cfg.out = value;
      else line_error(path, lineno, "unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      line_error(path, lineno, "bad value for '" + key + "'");
    }
  }
}

std::string problem_fingerprint(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << cfg.dataset << '|' << cfg.libsvm_path << '|' << cfg.loss << '|'
     << cfg.m << 'x' << cfg.d << '|' << cfg.nodes << '|' << cfg.seed << '|'
     << format_double(cfg.rho) << '|' << format_double(cfg.noise) << '|'
     << format_double(cfg.eps);
  return os.str();
}

namespace {

GlmProblem build_problem(const ExperimentConfig& cfg) {
  LossKind loss;
  if (cfg.loss == "quadratic") {
    loss = LossKind::quadratic;
  } else if (cfg.loss == "logistic") {
    loss = LossKind::logistic;
  } else {
    throw std::invalid_argument("unknown loss '" + cfg.loss + "'");
  }
  if (cfg.dataset == "synthetic-gaussian") {
    SyntheticSpec spec;
    spec.m = cfg.m;
    spec.d = cfg.d;
    spec.n = cfg.nodes;
    spec.seed = cfg.seed;
    spec.loss = loss;
    spec.rho = cfg.rho;
    spec.noise = cfg.noise;
    return gen_synthetic(spec);
  }
  if (cfg.dataset == "libsvm-file") {
    require_input(!cfg.libsvm_path.empty(), "libsvm dataset needs a path");
    LibsvmData data = load_libsvm(cfg.libsvm_path, -1, cfg.map_labels);
    return make_problem_from_data(data.a, data.labels, loss, cfg.rho,
                                  cfg.nodes, cfg.seed);
  }
  throw std::invalid_argument("unknown dataset '" + cfg.dataset + "'");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  GlmProblem prob = build_problem(cfg);
  Topology topo{prob.n, 0};
  BitLedger ledger;
  ExperimentResult res;
  res.algo = cfg.algo;
  res.problem_id = problem_fingerprint(cfg);

  if (cfg.algo == "qpgd") {
    QpgdOptions opts{cfg.max_rounds, cfg.eps};
    QpgdRun run =
        qpgd_run(prob, QpgdParams::from_problem(prob), topo, ledger, opts);
    res.trace = std::move(run.trace);
  } else if (cfg.algo == "qnewton") {
    NewtonParams params = NewtonParams::from_problem(prob, cfg.alpha);
    set_start(prob, newton_feasible_start(prob, params.ball, cfg.seed));
    NewtonOptions opts;
    opts.max_rounds = cfg.max_rounds;
    opts.target_fgap = cfg.eps;
    opts.qsgd_updates = cfg.qsgd_hessian;
    opts.qsgd_levels = cfg.levels;
    opts.seed = cfg.seed;
    res.trace = newton_run(prob, params, topo, ledger, opts);
  } else if (cfg.algo == "gd") {
    double eta = cfg.eta > 0.0 ? cfg.eta : 2.0 / (prob.mu + prob.gamma);
    res.trace =
        gd_full(prob, eta, topo, ledger, {cfg.max_rounds, cfg.eps});
  } else if (cfg.algo == "pgd") {
    res.trace = pgd_full(prob, topo, ledger, {cfg.max_rounds, cfg.eps});
  } else if (cfg.algo == "qsgd") {
    double eta = cfg.eta > 0.0 ? cfg.eta : 2.0 / (prob.mu + prob.gamma);
    res.trace = qsgd_gd(prob, eta, cfg.levels, topo, ledger,
                        {cfg.max_rounds, cfg.eps}, cfg.seed);
  } else {
    throw std::invalid_argument("unknown algo '" + cfg.algo + "'");
  }

  res.reached_target = res.trace.reached_target;
  res.diverged = res.trace.diverged;
  res.rounds = res.trace.rounds();
  res.payload_bits = ledger.total_bits();
  res.overhead_bits = ledger.total_overhead();
  if (!res.trace.rows.empty()) {
    res.final_err = res.trace.rows.back().err;
    res.final_fgap = res.trace.rows.back().fgap;
  }

  // reference cost: 32-bit full-precision gradient descent to the same target
  if (cfg.algo != "gd") {
    BitLedger gd_ledger;
    double eta = 2.0 / (prob.mu + prob.gamma);
    Trace gd_trace =
        gd_full(prob, eta, topo, gd_ledger, {cfg.max_rounds, cfg.eps});
    if (gd_trace.reached_target && res.payload_bits > 0) {
      res.bits_ratio_gd32 =
          static_cast<double>(gd_ledger.total_bits()) /
          static_cast<double>(res.payload_bits);
    }
  } else {
    res.bits_ratio_gd32 = 1.0;
  }

  {
    std::ostringstream trace_os;
    res.trace.write_csv(trace_os);
    res.trace_csv = trace_os.str();
    std::ostringstream ledger_os;
    ledger.write_csv(ledger_os);
    res.ledger_csv = ledger_os.str();
    std::ostringstream sum;
    sum << "algo=" << res.algo << '\n'
        << "problem=" << res.problem_id << '\n'
        << "rounds=" << res.rounds << '\n'
        << "reached_target=" << (res.reached_target ? 1 : 0) << '\n'
        << "diverged=" << (res.diverged ? 1 : 0) << '\n'
        << "payload_bits=" << res.payload_bits << '\n'
        << "overhead_bits=" << res.overhead_bits << '\n'
        << "final_err=" << format_double(res.final_err) << '\n'
        << "final_fgap=" << format_double(res.final_fgap) << '\n'
        << "bits_ratio_gd32=" << format_double(res.bits_ratio_gd32) << '\n';
    res.summary_text = sum.str();
  }

  if (!cfg.out.empty()) {
    auto write = [](const std::string& path, const std::string& body) {
      std::ofstream out(path);
      require_input(out.good(), "cannot open output file " + path);
      out << body;
    };
    write(cfg.out + "_trace.csv", res.trace_csv);
    write(cfg.out + "_ledger.csv", res.ledger_csv);
    write(cfg.out + "_summary.txt", res.summary_text);
  }
  return res;
}

std::vector<CompareRow> compare_report(
    const std::vector<ExperimentResult>& results) {
  require_input(!results.empty(), "compare_report: no results");
  for (const auto& r : results) {
    require_input(r.problem_id == results.front().problem_id,
                  "compare_report: results come from different problems");
  }
  std::int64_t gd_bits = 0;
  for (const auto& r : results) {
    if (r.algo == "gd" && r.reached_target) gd_bits = r.payload_bits;
  }
  std::vector<CompareRow> rows;
  for (const auto& r : results) {
    CompareRow row;
    row.algo = r.algo;
    row.rounds = r.rounds;
    row.reached = r.reached_target;
    row.bits = r.payload_bits;
    row.ratio_vs_gd =
        gd_bits > 0 && r.payload_bits > 0
            ? static_cast<double>(r.payload_bits) / static_cast<double>(gd_bits)
            : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "algo        rounds  reached  payload_bits  bits/gd\n";
  for (const auto& r : rows) {
    os << r.algo;
    for (std::size_t i = r.algo.size(); i < 12; ++i) os << ' ';
    std::string rounds = std::to_string(r.rounds);
    for (std::size_t i = rounds.size(); i < 6; ++i) os << ' ';
    os << rounds << "  " << (r.reached ? "yes    " : "no     ") << "  ";
    std::string bits = std::to_string(r.bits);
    for (std::size_t i = bits.size(); i < 12; ++i) os << ' ';
    os << bits << "  ";
    if (std::isnan(r.ratio_vs_gd)) {
      os << "-";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.ratio_vs_gd);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

SweepResult sweep_learning_rate(const ExperimentConfig& cfg, int max_powers) {
  require_input(cfg.algo == "gd" || cfg.algo == "qsgd",
                "sweep_learning_rate: only gd and qsgd take a free rate");
  SweepResult result;
  for (int k = 0; k <= max_powers; ++k) {
    ExperimentConfig c = cfg;
    c.eta = std::ldexp(1.0, -k);
    c.out.clear();
    ExperimentResult r = run_experiment(c);
    SweepOutcome o;
    o.eta = c.eta;
    o.reached = r.reached_target;
    o.diverged = r.diverged;
    o.rounds = r.rounds;
    result.outcomes.push_back(o);
    if (r.reached_target && !r.diverged) {
      result.best_eta = c.eta;
      result.found = true;
      break;
    }
  }
  return result;
}

}  // namespace qopt
