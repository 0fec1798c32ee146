#include "ccmv/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ccmv/data_model.hpp"
#include "ccmv/estimator.hpp"
#include "ccmv/simbench.hpp"
#include "ccmv/tuning.hpp"

namespace ccmv {

namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw DataError("cannot write " + (dir / name).string());
  return f;
}

fs::path prepare_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw DataError("cannot create output directory " + out);
  return fs::path(out);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", v[i]);
    s += buf;
  }
  return s;
}

CvGrid make_grid(const std::vector<double>& lambdas, const std::vector<double>& gammas, int folds,
                 std::uint64_t seed) {
  CvGrid g;
  if (!lambdas.empty()) g.lambdas = lambdas;
  if (!gammas.empty()) g.gammas = gammas;
  g.folds = folds;
  g.seed = seed;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return g;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const std::vector<std::string>& table1_header() {
  static const std::vector<std::string> h{"setting", "n",      "method", "reps_used", "dropped",
                                          "bias_1",  "bias_2", "bias_3", "bias_4",    "mse_1",
                                          "mse_2",   "mse_3",  "mse_4"};
  return h;
}

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw DataError("non-numeric value '" + s + "' in " + where);
  return v;
}

}  // namespace

int cmd_fit(const FitCommand& cmd, std::ostream& log) {
  std::ifstream in(cmd.input, std::ios::binary);
  if (!in) throw DataError("cannot open input file " + cmd.input);
  TypeHints hints;
  for (const auto& c : cmd.continuous) hints[c] = ColumnKind::continuous;
  const Dataset raw = parse_dataset(in, cmd.outcome, hints);

  std::vector<std::string> predictors = cmd.predictors;
  if (predictors.empty()) {
    for (const auto& c : raw.columns())
      if (c.name != cmd.outcome) predictors.push_back(c.name);
  }
  if (predictors.empty()) throw DataError("no predictor columns");
  std::vector<std::string> keep{cmd.outcome};
  keep.insert(keep.end(), predictors.begin(), predictors.end());
  const Dataset ds = raw.select(keep);
  if (ds.column(0).kind != ColumnKind::binary)
    throw DataError("outcome column '" + cmd.outcome + "' must be binary (0/1) for the logistic model");

  PipelineOptions po;
  if (cmd.loss == "tailored") {
    po.loss = LossKind::tailored;
  } else if (cmd.loss == "entropy") {
    po.loss = LossKind::entropy;
  } else {
    throw DataError("unknown loss '" + cmd.loss + "' (expected tailored or entropy)");
  }
  if (cmd.degree < 1) throw DataError("degree must be at least 1");
  po.basis.max_degree = cmd.degree;
  po.basis.additive_binary = !cmd.interact_binary;
  po.grid = make_grid(cmd.lambda_grid, cmd.gamma_grid, cmd.folds, cmd.seed);
  po.fixed_tuning = cmd.fixed_tuning;

  std::vector<std::size_t> pred_cols;
  for (std::size_t j = 1; j < ds.cols(); ++j) pred_cols.push_back(j);
  const FitResult fit = fit_ccmv(ds, logistic_psi(pred_cols, 0), po);

  const fs::path dir = prepare_dir(cmd.out);
  std::vector<std::string> terms = predictors;
  terms.emplace_back("(intercept)");
  {
    auto f = open_output(dir, "coefficients.csv");
    write_coef_csv(fit, terms, f);
  }
  {
    auto f = open_output(dir, "weights.csv");
    write_weights_csv(fit, f);
  }
  {
    auto f = open_output(dir, "tuning_manifest.txt");
    write_tuning_manifest(fit, ds.columns(), f);
  }
  for (const auto& pf : fit.per_pattern) {
    if (!pf.cv) continue;
    auto f = open_output(dir, "cv_" + pf.basis.pattern.to_string() + ".csv");
    write_cv_csv(*pf.cv, f);
  }
  {
    auto f = open_output(dir, "run_manifest.txt");
    f << "command=fit\nccmv_version=" << CCMV_VERSION << "\ninput=" << cmd.input << "\noutcome=" << cmd.outcome
      << "\npredictors=";
    for (std::size_t i = 0; i < predictors.size(); ++i) f << (i ? "," : "") << predictors[i];
    f << "\nloss=" << cmd.loss << "\ndegree=" << cmd.degree << "\ninteract_binary=" << cmd.interact_binary
      << "\nfolds=" << cmd.folds
      << "\nlambda_grid=" << join_doubles(po.grid.lambdas) << "\ngamma_grid=" << join_doubles(po.grid.gammas)
      << "\nseed=" << cmd.seed << '\n';
    if (cmd.fixed_tuning)
      f << "lambda=" << join_doubles({cmd.fixed_tuning->first}) << "\ngamma=" << join_doubles({cmd.fixed_tuning->second})
        << '\n';
    f << "patterns=" << fit.per_pattern.size() << "\nconverged=" << (fit.converged ? 1 : 0) << '\n';
  }

  log << "fit: " << fit.per_pattern.size() << " missing pattern(s), " << fit.complete_rows.size()
      << " complete rows, " << (fit.converged ? "converged" : "NOT converged") << '\n';
  return fit.converged ? kExitOk : kExitNonConvergence;
}

int cmd_simulate(const SimulateCommand& cmd, std::ostream& log) {
  StudyOptions so;
  so.settings = cmd.settings;
  for (int s : so.settings)
    if (s < 1 || s > 3) throw DataError("setting must be 1, 2 or 3, got " + std::to_string(s));
  if (!cmd.methods.empty()) {
    so.methods.clear();
    for (const auto& m : cmd.methods) {
      try {
        so.methods.push_back(parse_method(m));
      } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
      }
    }
  }
  if (cmd.reps < 2) throw DataError("reps must be at least 2");
  if (cmd.n < 10) throw DataError("n must be at least 10");
  if (cmd.degree < 1) throw DataError("degree must be at least 1");
  so.reps = cmd.reps;
  so.n = cmd.n;
  so.master_seed = cmd.seed;
  so.parallelism = std::max(1U, cmd.parallelism);
  so.method.basis.max_degree = cmd.degree;
  so.method.grid = make_grid(cmd.lambda_grid, cmd.gamma_grid, cmd.folds, 0);

  const StudyReport report = run_study(so);
  const fs::path dir = prepare_dir(cmd.out);
  {
    auto f = open_output(dir, "table1.csv");
    write_table1_csv(report, f);
  }
  {
    auto f = open_output(dir, "table2.csv");
    write_table2_csv(report, f);
  }
  {
    auto f = open_output(dir, "replicates.csv");
    write_replicates_csv(report, f);
  }
  {
    auto f = open_output(dir, "manifest.txt");
    write_study_manifest(report, f);
  }
  bool any_empty = false;
  for (const auto& row : report.rows) {
    if (row.dropped > 0)
      log << "setting " << row.setting << ", " << to_string(row.method) << ": dropped " << row.dropped
          << " non-converged replication(s)\n";
    any_empty = any_empty || row.used == 0;
  }
  return any_empty ? kExitNonConvergence : kExitOk;
}

void cmd_summarize(const std::vector<std::string>& inputs, std::ostream& out) {
  if (inputs.empty()) throw DataError("summarize needs at least one input");
  struct Row {
    std::vector<std::string> cells;
    std::vector<double> values;  // bias_1..mse_4
  };
  std::vector<Row> rows;
  std::map<std::string, std::size_t> seen;
  const auto& header = table1_header();
  for (const auto& path : inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != header)
      throw DataError(path + ": not a table1 report (header mismatch)");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Row r;
      r.cells = split_csv_line(line);
      const std::string where = path + ":" + std::to_string(lineno);
      if (r.cells.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
      parse_number(r.cells[0], where);
      for (std::size_t j : {1, 3, 4}) parse_number(r.cells[j], where);
      for (std::size_t j = 5; j < header.size(); ++j) r.values.push_back(parse_number(r.cells[j], where));
      const std::string key = r.cells[0] + "," + r.cells[1] + "," + r.cells[2];
      if (seen.count(key)) throw DataError(where + ": duplicate row for " + key);
      seen[key] = rows.size();
      rows.push_back(std::move(r));
    }
  }

  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << ",dbias_1,dbias_2,dbias_3,dbias_4,dmse_1,dmse_2,dmse_3,dmse_4\n";
  char buf[40];
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.cells.size(); ++j) out << (j ? "," : "") << r.cells[j];
    const auto full = seen.find(r.cells[0] + "," + r.cells[1] + ",full");
    for (std::size_t j = 0; j < 8; ++j) {
      if (full == seen.end()) {
        out << ',';
      } else {
        std::snprintf(buf, sizeof buf, ",%.6f", r.values[j] - rows[full->second].values[j]);
        out << buf;
      }
    }
    out << '\n';
  }
}

namespace {

const char* kUsage =
    "usage: ccmv <command> [options]\n"
    "commands:\n"
    "  fit        estimate a logistic model from a CSV with non-monotone missingness\n"
    "  simulate   run the Monte Carlo study\n"
    "  summarize  merge table1 reports and add differences to the Full method\n"
    "Run 'ccmv <command> --help' for the options of a command.\n";

void add_grid_options(CLI::App& app, std::vector<double>& lambdas, std::vector<double>& gammas, int& folds) {
  app.add_option("--lambda-grid", lambdas, "descending lambda values (comma separated)")->delimiter(',');
  app.add_option("--gamma-grid", gammas, "gamma values in [0,1] (comma separated)")->delimiter(',');
  app.add_option("--folds", folds, "cross-validation folds")->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (argc < 2) {
    err << kUsage;
    return kExitDataError;
  }
  const std::string command = argv[1];
  if (command == "--help" || command == "-h") {
    out << kUsage;
    return kExitOk;
  }

  CLI::App app{"ccmv " + command};
  app.set_config("--config", "", "key=value file; command-line flags take precedence");

  FitCommand fit;
  SimulateCommand sim;
  std::vector<std::string> inputs;
  std::string summary_out;
  double lambda = -1.0;
  double gamma = -1.0;

  if (command == "fit") {
    app.add_option("--input", fit.input, "CSV file (header row, empty cell = missing)")->required();
    app.add_option("--outcome", fit.outcome, "binary outcome column")->required();
    app.add_option("--predictors", fit.predictors, "predictor columns (default: all others)")->delimiter(',');
    app.add_option("--continuous", fit.continuous, "treat these 0/1 columns as continuous")->delimiter(',');
    app.add_option("--loss", fit.loss, "tailored or entropy")->capture_default_str();
    app.add_option("--degree", fit.degree, "polynomial degree per continuous variable")->capture_default_str();
    app.add_flag("--interact-binary", fit.interact_binary, "tensor binary indicators with the continuous basis");
    add_grid_options(app, fit.lambda_grid, fit.gamma_grid, fit.folds);
    app.add_option("--lambda", lambda, "fixed lambda (skips cross-validation; needs --gamma)");
    app.add_option("--gamma", gamma, "fixed gamma (skips cross-validation; needs --lambda)");
    app.add_option("--seed", fit.seed, "seed for the fold assignment")->capture_default_str();
    app.add_option("--out", fit.out, "output directory")->capture_default_str();
  } else if (command == "simulate") {
    app.add_option("--setting", sim.settings, "missingness setting(s): 1, 2 or 3")->delimiter(',');
    app.add_option("--methods", sim.methods,
                   "full,complete_case,true_weight,entropy_linear,entropy_basis,proposed")
        ->delimiter(',');
    app.add_option("--reps", sim.reps, "replications")->capture_default_str();
    app.add_option("--n", sim.n, "sample size per replication")->capture_default_str();
    app.add_option("--seed", sim.seed, "master seed")->capture_default_str();
    app.add_option("--degree", sim.degree, "polynomial degree per continuous variable")->capture_default_str();
    add_grid_options(app, sim.lambda_grid, sim.gamma_grid, sim.folds);
    app.add_option("--parallelism", sim.parallelism, "worker threads")->capture_default_str();
    app.add_option("--out", sim.out, "output directory")->capture_default_str();
  } else if (command == "summarize") {
    app.add_option("inputs", inputs, "table1.csv files");
    app.add_option("--input", inputs, "table1.csv files")->delimiter(',');
    app.add_option("--out", summary_out, "output file (default: standard output)");
  } else {
    err << "unknown command '" << command << "'\n" << kUsage;
    return kExitDataError;
  }

  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ccmv " << command << ": " << e.what() << '\n';
    return kExitDataError;
  }

  try {
    if (command == "fit") {
      if ((lambda >= 0.0) != (gamma >= 0.0)) throw DataError("--lambda and --gamma must be given together");
      if (lambda >= 0.0) {
        if (gamma > 1.0) throw DataError("--gamma must lie in [0, 1]");
        fit.fixed_tuning = std::make_pair(lambda, gamma);
      }
      return cmd_fit(fit, err);
    }
    if (command == "simulate") return cmd_simulate(sim, err);
    if (summary_out.empty()) {
      cmd_summarize(inputs, out);
    } else {
      std::ofstream f(summary_out, std::ios::binary);
      if (!f) throw DataError("cannot write " + summary_out);
      cmd_summarize(inputs, f);
    }
    return kExitOk;
  } catch (const DataError& e) {
    err << "ccmv " << command << ": " << e.what() << '\n';
    return kExitDataError;
  } catch (const NumericalError& e) {
    err << "ccmv " << command << ": numerical failure: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    err << "ccmv " << command << ": " << e.what() << '\n';
    return kExitDataError;
  }
}

}  // namespace ccmv
