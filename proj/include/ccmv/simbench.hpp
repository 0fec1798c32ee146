#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ccmv/basis.hpp"
#include "ccmv/data_model.hpp"
#include "ccmv/tuning.hpp"

namespace ccmv {

/// One of the three missingness mechanisms on (Y, X1, X2, X3). Columns are always
/// y, x1, x2, x3; the missing patterns are 1110, 1101 and 1100.
struct SimSetting {
  int id = 1;
  std::size_t n = 1000;
  Eigen::Vector4d theta0{1.0, -1.0, 1.0, -2.0};

  /// Throws std::invalid_argument unless id is 1, 2 or 3.
  static SimSetting make(int id, std::size_t n = 1000);

  /// log Odds for patterns 1110, 1101, 1100 at (y, x1, x2, x3).
  std::array<double, 3> log_odds(double y, double x1, double x2, double x3) const;
};

/// 1111, 1110, 1101, 1100 over columns (y, x1, x2, x3).
std::array<ResponsePattern, 4> sim_patterns();

/// P(R = r | L) for 1111, 1110, 1101, 1100 given the three log odds against 1111.
std::array<double, 4> pattern_probabilities(const std::array<double, 3>& log_odds);

struct Replication {
  Dataset observed;  // masked cells blanked
  Dataset full;      // the same draw before masking
};

/// X and Y for all rows are drawn before any pattern, so the full data of a seed do not
/// depend on the setting.
Replication gen_replication(const SimSetting& setting, std::uint64_t seed);

enum class MethodId { full, complete_case, true_weight, entropy_linear, entropy_basis, proposed };

std::string to_string(MethodId m);
/// Accepts the names produced by to_string plus short aliases (complete, true, linear, basis).
MethodId parse_method(std::string_view name);
const std::vector<MethodId>& all_methods();

// The response indicator is interacted with the continuous tensor so the basis can
// represent outcome-by-covariate structure in the odds and in u-hat.
inline BasisSpec simulation_basis_spec() {
  BasisSpec spec;
  spec.additive_binary = false;
  return spec;
}

struct MethodOptions {
  BasisSpec basis = simulation_basis_spec();
  CvGrid grid;  // grid.seed is replaced by the per-replication CV seed
};

struct MethodResult {
  Eigen::VectorXd theta;
  Eigen::VectorXd se;  // empty unless the method reports a variance
  bool converged = false;
  std::string failure;  // why the replication was dropped
  /// Largest excess of the per-coordinate imbalance over its penalty-implied bound among the
  /// converged odds fits (<= 0 means every bound holds); -inf when there were none.
  double bound_excess = 0.0;
  int odds_fits = 0;
};

MethodResult run_method(MethodId method, const Replication& rep, const SimSetting& setting,
                        const MethodOptions& opts, std::uint64_t cv_seed);

struct StudyOptions {
  std::vector<int> settings{1};
  std::vector<MethodId> methods = all_methods();
  std::size_t reps = 200;
  std::size_t n = 1000;
  std::uint64_t master_seed = 1;
  unsigned parallelism = 1;
  MethodOptions method;
};

/// Seeds used by replication r: data from master + r, CV from a fixed affine offset of it.
std::uint64_t replication_seed(std::uint64_t master, std::size_t r);
std::uint64_t cv_seed(std::uint64_t master, std::size_t r);

struct ReplicateRecord {
  int setting = 0;
  std::size_t rep = 0;
  MethodId method = MethodId::full;
  MethodResult result;
};

struct SummaryRow {
  int setting = 0;
  MethodId method = MethodId::full;
  std::size_t used = 0;
  std::size_t dropped = 0;
  Eigen::Vector4d bias = Eigen::Vector4d::Zero();
  Eigen::Vector4d mse = Eigen::Vector4d::Zero();
  bool has_variance = false;
  Eigen::Vector4d mc_sd = Eigen::Vector4d::Zero();
  Eigen::Vector4d avg_se = Eigen::Vector4d::Zero();
  Eigen::Vector4d sd_ratio = Eigen::Vector4d::Zero();
  Eigen::Vector4d coverage = Eigen::Vector4d::Zero();
};

struct StudyReport {
  StudyOptions options;
  std::vector<SummaryRow> rows;             // setting-major, method order of the options
  std::vector<ReplicateRecord> replicates;  // setting, rep, method order
  double max_bound_excess = 0.0;
  std::size_t odds_fits_checked = 0;
};

/// Summaries are reduced in replication order, so the report does not depend on scheduling.
StudyReport run_study(const StudyOptions& opts);

SummaryRow summarize_method(int setting, MethodId method, const Eigen::Vector4d& theta0,
                            const std::vector<const MethodResult*>& results);

/// Columns: setting,n,method,reps_used,dropped,bias_1..4,mse_1..4.
void write_table1_csv(const StudyReport& report, std::ostream& out);
/// Columns: setting,n,method,sd_ratio_1..4,coverage_1..4,avg_se_1..4,mc_sd_1..4 (methods with SEs).
void write_table2_csv(const StudyReport& report, std::ostream& out);
/// Columns: setting,rep,seed,method,converged,theta_1..4,se_1..4.
void write_replicates_csv(const StudyReport& report, std::ostream& out);
void write_study_manifest(const StudyReport& report, std::ostream& out);

}  // namespace ccmv
