#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace ccmv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitNonConvergence = 2;

struct FitCommand {
  std::string input;
  std::string outcome;
  std::vector<std::string> predictors;  // empty: every other column
  std::vector<std::string> continuous;  // columns forced continuous despite 0/1 values
  std::string loss = "tailored";
  int degree = 3;
  bool interact_binary = false;  // tensor binary indicators with the continuous basis
  int folds = 5;
  std::vector<double> lambda_grid;  // empty: default grid
  std::vector<double> gamma_grid;
  std::optional<std::pair<double, double>> fixed_tuning;
  std::uint64_t seed = 1;
  std::string out = ".";
};

struct SimulateCommand {
  std::vector<int> settings{1};
  std::vector<std::string> methods;  // empty: all
  std::size_t reps = 200;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  int degree = 3;
  int folds = 5;
  std::vector<double> lambda_grid;
  std::vector<double> gamma_grid;
  unsigned parallelism = 1;
  std::string out = ".";
};

/// Writes coefficients.csv, weights.csv, tuning_manifest.txt, cv_<pattern>.csv and
/// run_manifest.txt under `out`. Returns an exit code; data errors propagate as exceptions.
int cmd_fit(const FitCommand& cmd, std::ostream& log);

/// Writes table1.csv, table2.csv, replicates.csv and manifest.txt under `out`.
int cmd_simulate(const SimulateCommand& cmd, std::ostream& log);

/// Merges table1-style reports and appends differences to the Full row of the same setting.
void cmd_summarize(const std::vector<std::string>& inputs, std::ostream& out);

/// Entry point: `ccmv <fit|simulate|summarize> [options]`. Every command accepts
/// `--config FILE` with key=value lines named like the long flags; flags win.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ccmv
