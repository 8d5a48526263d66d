// Command-line driver: run a single metered experiment, compare algorithms
// on one problem, or sweep learning rates. Exit codes: 0 success, 2 invariant
// violation during a run, 3 input error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qopt/errors.hpp"
#include "qopt/harness.hpp"

namespace {

void add_problem_flags(CLI::App* cmd, qopt::ExperimentConfig& cfg,
                       std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "flat key=value config file, overridden by flags");
  cmd->add_option("--dataset", cfg.dataset,
                  "synthetic-gaussian or libsvm-file");
  cmd->add_option("--libsvm", cfg.libsvm_path, "path for libsvm-file");
  cmd->add_flag("--map-labels", cfg.map_labels,
                "map a two-valued label column onto {-1,+1}");
  cmd->add_option("--loss", cfg.loss, "quadratic or logistic");
  cmd->add_option("--m", cfg.m, "synthetic sample count");
  cmd->add_option("--d", cfg.d, "synthetic dimension");
  cmd->add_option("--nodes", cfg.nodes, "node count");
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--rho", cfg.rho, "l2 coefficient for logistic loss");
  cmd->add_option("--noise", cfg.noise, "synthetic target noise scale");
  cmd->add_option("--eps", cfg.eps, "target accuracy in function value");
  cmd->add_option("--max-rounds", cfg.max_rounds, "round cap");
}

void apply_config_first(const std::string& config_path,
                        qopt::ExperimentConfig& cfg, CLI::App* cmd) {
  if (config_path.empty()) return;
  // config supplies defaults; flags passed on the command line win
  qopt::ExperimentConfig from_file = cfg;
  qopt::apply_config_file(from_file, config_path);
  auto passed = [&](const std::string& name) {
    auto* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (!passed("--dataset")) cfg.dataset = from_file.dataset;
  if (!passed("--libsvm")) cfg.libsvm_path = from_file.libsvm_path;
  if (!passed("--map-labels")) cfg.map_labels = from_file.map_labels;
  if (!passed("--loss")) cfg.loss = from_file.loss;
  if (!passed("--m")) cfg.m = from_file.m;
  if (!passed("--d")) cfg.d = from_file.d;
  if (!passed("--nodes")) cfg.nodes = from_file.nodes;
  if (!passed("--seed")) cfg.seed = from_file.seed;
  if (!passed("--rho")) cfg.rho = from_file.rho;
  if (!passed("--noise")) cfg.noise = from_file.noise;
  if (!passed("--eps")) cfg.eps = from_file.eps;
  if (!passed("--max-rounds")) cfg.max_rounds = from_file.max_rounds;
  if (!passed("--algo")) cfg.algo = from_file.algo;
  if (!passed("--eta")) cfg.eta = from_file.eta;
  if (!passed("--alpha")) cfg.alpha = from_file.alpha;
  if (!passed("--levels")) cfg.levels = from_file.levels;
  if (!passed("--qsgd-hessian")) cfg.qsgd_hessian = from_file.qsgd_hessian;
  if (!passed("--out")) cfg.out = from_file.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"communication-metered distributed GLM optimization"};
  app.require_subcommand(1);

  qopt::ExperimentConfig cfg;
  std::string config_path;
  std::string algos_csv = "qpgd,pgd,gd";

  CLI::App* run = app.add_subcommand("run", "run one algorithm, emit CSVs");
  add_problem_flags(run, cfg, config_path);
  run->add_option("--algo", cfg.algo, "qpgd | qnewton | gd | pgd | qsgd");
  run->add_option("--eta", cfg.eta, "learning rate (gd/qsgd; <=0: default)");
  run->add_option("--alpha", cfg.alpha, "second-order contraction parameter");
  run->add_option("--levels", cfg.levels, "stochastic quantization levels");
  run->add_flag("--qsgd-hessian", cfg.qsgd_hessian,
                "qnewton: stochastic Hessian updates after the first round "
                "(no guarantees)");
  run->add_option("--out", cfg.out, "output prefix for trace/ledger/summary");

  CLI::App* compare =
      app.add_subcommand("compare", "run several algorithms on one problem");
  add_problem_flags(compare, cfg, config_path);
  compare->add_option("--algos", algos_csv, "comma-separated algorithm list");
  compare->add_option("--out", cfg.out, "output prefix for the table");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "largest stable learning rate over {1, 1/2, 1/4, ...}");
  add_problem_flags(sweep, cfg, config_path);
  sweep->add_option("--algo", cfg.algo, "gd or qsgd");
  sweep->add_option("--levels", cfg.levels, "stochastic quantization levels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (run->parsed()) {
      apply_config_first(config_path, cfg, run);
      qopt::ExperimentResult res = qopt::run_experiment(cfg);
      std::cout << res.summary_text;
      if (!cfg.out.empty()) {
        std::cout << "wrote " << cfg.out << "_trace.csv, " << cfg.out
                  << "_ledger.csv, " << cfg.out << "_summary.txt\n";
      }
    } else if (compare->parsed()) {
      apply_config_first(config_path, cfg, compare);
      std::vector<qopt::ExperimentResult> results;
      std::string item;
      std::stringstream ss(algos_csv);
      bool saw_gd = false;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        qopt::ExperimentConfig c = cfg;
        c.algo = item;
        c.out.clear();
        results.push_back(qopt::run_experiment(c));
        saw_gd = saw_gd || item == "gd";
      }
      if (!saw_gd) {
        qopt::ExperimentConfig c = cfg;
        c.algo = "gd";
        c.out.clear();
        results.push_back(qopt::run_experiment(c));
      }
      std::string table =
          qopt::format_compare_table(qopt::compare_report(results));
      std::cout << table;
      if (!cfg.out.empty()) {
        std::ofstream out(cfg.out + "_compare.txt");
        qopt::require_input(out.good(), "cannot open output file");
        out << table;
      }
    } else if (sweep->parsed()) {
      apply_config_first(config_path, cfg, sweep);
      qopt::SweepResult res = qopt::sweep_learning_rate(cfg);
      for (const auto& o : res.outcomes) {
        std::cout << "eta=" << o.eta << ' '
                  << (o.diverged ? "diverged"
                                 : o.reached ? "converged" : "max-rounds")
                  << " rounds=" << o.rounds << '\n';
      }
      if (res.found) {
        std::cout << "largest stable eta=" << res.best_eta << '\n';
      } else {
        std::cout << "no stable rate found in the grid\n";
      }
    }
  } catch (const qopt::invariant_violation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 3;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
