#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ccmv/basis.hpp"
#include "ccmv/data_model.hpp"
#include "ccmv/odds_fit.hpp"
#include "ccmv/tuning.hpp"

namespace ccmv {

/// Singular Jacobian or other numerical breakdown that no caller-side retry can fix.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// psi(theta, L) and its Jacobian in theta. Rows are passed as full (complete) records.
struct EstimatingFunction {
  std::size_t q = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& theta, const Eigen::VectorXd& row)> eval;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd& theta, const Eigen::VectorXd& row)> jac;
};

/// Logistic score (Y - expit(theta'x)) x with x = (X_1, ..., X_p, 1).
EstimatingFunction logistic_psi(std::vector<std::size_t> predictor_cols, std::size_t outcome_col);

/// exp(phi^r' alpha^r) on the given dataset rows, which must all lie in the basis.
Eigen::VectorXd odds_on_rows(const BasisSet& basis, const Eigen::VectorXd& alpha,
                             const std::vector<std::size_t>& rows);

/// 1 + sum over missing patterns of the fitted odds, one entry per complete row
/// (in `ix.complete_ids()` order). Fits and bases are matched by pattern.
Eigen::VectorXd assemble_weights(const std::vector<OddsFit>& fits, const PatternIndex& ix,
                                 const std::vector<BasisSet>& bases);

struct ZSolution {
  Eigen::VectorXd theta;
  int iterations = 0;
  double score_norm = 0.0;  // max-norm of the weighted estimating equation at theta
  bool converged = false;
};

/// Newton with step halving on G(theta) = (1/N) sum_rows w_i psi(theta, L_i). `rows` are
/// complete rows aligned with `weights`; N is the dataset size. Throws NumericalError when
/// the Jacobian's condition number exceeds 1e12.
ZSolution solve_weighted_z(const EstimatingFunction& psi, const Eigen::VectorXd& weights, const Dataset& ds,
                           const std::vector<std::size_t>& rows,
                           const std::optional<Eigen::VectorXd>& init = std::nullopt);

/// Series-regression coefficients (K x q) of psi(theta_hat, L) on the pattern basis over the
/// complete rows, ridge-stabilised by 1e-8 * trace / K.
Eigen::MatrixXd estimate_u(const Eigen::VectorXd& theta, const EstimatingFunction& psi, const BasisSet& basis,
                           const Dataset& ds, const std::vector<std::size_t>& complete_rows);

struct PatternTerm {
  const BasisSet* basis = nullptr;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd u_coef;  // from estimate_u
};

struct Sandwich {
  Eigen::MatrixXd bread;  // D-hat
  Eigen::MatrixXd meat;   // V-hat
  Eigen::MatrixXd cov;    // D^-1 V D^-T / N
  Eigen::VectorXd se;
};

/// Influence-function sandwich. Complete rows contribute psi + sum_r odds_r (psi - u_r),
/// rows of pattern r contribute u_r, and every row is centred by the weighted mean of psi.
Sandwich sandwich_variance(const Eigen::VectorXd& theta, const EstimatingFunction& psi, const Dataset& ds,
                           const PatternIndex& ix, const std::vector<PatternTerm>& terms,
                           const Eigen::VectorXd& weights);

struct PatternFit {
  BasisSet basis;
  OddsFit fit;
  double lambda = 0.0;
  double gamma = 0.0;
  std::uint64_t fold_seed = 0;
  std::optional<CvReport> cv;
};

struct PipelineOptions {
  LossKind loss = LossKind::tailored;
  BasisSpec basis;
  CvGrid grid;
  /// Skips cross-validation and uses this (lambda, gamma) for every pattern.
  std::optional<std::pair<double, double>> fixed_tuning;
  SolverOptions solver;
  bool compute_variance = true;
};

struct FitResult {
  Eigen::VectorXd theta;
  std::vector<std::size_t> complete_rows;
  Eigen::VectorXd weights;  // aligned with complete_rows
  Eigen::MatrixXd cov;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lo;
  Eigen::VectorXd ci_hi;
  std::vector<PatternFit> per_pattern;
  int newton_iters = 0;
  bool converged = false;  // every odds fit and the Z-solve converged
};

/// Fold seed of the i-th missing pattern (0-based, index order).
std::uint64_t pattern_fold_seed(std::uint64_t seed, std::size_t pattern_position);

/// Basis -> tuning -> odds fit per missing pattern, then weights, Z-solve and sandwich.
/// Throws DataError when the complete pattern is absent or too small for a basis.
FitResult fit_ccmv(const Dataset& ds, const EstimatingFunction& psi, const PipelineOptions& opts);

/// Columns: term,estimate,se,z,p,ci_lo,ci_hi. `terms` names the q coordinates.
void write_coef_csv(const FitResult& fit, const std::vector<std::string>& terms, std::ostream& out);

/// One block per missing pattern: chosen tuning, fold seed, fit diagnostics, basis functions.
void write_tuning_manifest(const FitResult& fit, const std::vector<Column>& columns, std::ostream& out);

/// Columns: row,weight (0-based dataset rows of the complete cases).
void write_weights_csv(const FitResult& fit, std::ostream& out);

}  // namespace ccmv
