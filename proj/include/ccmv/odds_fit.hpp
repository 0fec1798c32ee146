#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ccmv/basis.hpp"
#include "ccmv/data_model.hpp"

namespace ccmv {

enum class LossKind { tailored, entropy };

std::string to_string(LossKind kind);

/// The two-group problem behind one propensity-odds fit: basis rows with flags marking the
/// complete cases and the rows of the missing pattern. Rows with neither flag contribute
/// nothing. Losses are averaged over `denom`, which is the full dataset size for a final fit.
struct PairSample {
  ResponsePattern pattern;
  Eigen::MatrixXd design;
  Eigen::ArrayXd in_complete;  // 1 for complete-case rows
  Eigen::ArrayXd in_pattern;   // 1 for rows of the missing pattern
  std::vector<std::size_t> row_ids;
  double denom = 1.0;

  std::size_t rows() const { return static_cast<std::size_t>(design.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(design.cols()); }

  /// Keeps the listed positions (indices into this sample), averaging over `new_denom`.
  PairSample subset(std::span<const std::size_t> positions, double new_denom) const;
};

/// Flags come from the row masks: complete rows and rows whose mask equals the basis pattern.
PairSample make_pair_sample(const BasisSet& basis, const Dataset& ds);

struct LossValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // empty unless requested
  bool diverging = false;   // some linear predictor exceeded the overflow guard
};

/// Largest linear predictor allowed before exp() is considered to overflow.
inline constexpr double kLinearPredictorGuard = 700.0;

/// (1/N) sum[ complete * exp(phi'a) - pattern * phi'a ].
LossValue tailored_loss(const Eigen::VectorXd& alpha, const PairSample& s, bool with_hessian = false);

/// Negative log-likelihood of pattern-vs-complete logistic regression with log-odds phi'a.
LossValue entropy_loss(const Eigen::VectorXd& alpha, const PairSample& s, bool with_hessian = false);

LossValue evaluate_loss(LossKind kind, const Eigen::VectorXd& alpha, const PairSample& s,
                        bool with_hessian = false);

struct PenaltyConfig {
  double lambda = 0.0;
  double gamma = 1.0;
  Eigen::VectorXd tolerance;  // weights of the l1 part
  Eigen::VectorXd gram_diag;  // diagonal roughness matrix of the quadratic part

  static PenaltyConfig from_basis(const BasisSet& basis, double lambda, double gamma);
  void validate(std::size_t K) const;
};

enum class SolverKind {
  proximal_newton,    // quadratic model + coordinate descent on the l1 subproblem
  proximal_gradient,  // accelerated proximal gradient with adaptive restart
};

struct SolverOptions {
  SolverKind kind = SolverKind::proximal_newton;
  int max_iter = 20000;
  double kkt_tol = 1e-7;
  double rel_tol = 1e-10;
  int max_backtracks = 60;
  std::optional<Eigen::VectorXd> warm_start;
};

struct OddsFit {
  ResponsePattern pattern;
  Eigen::VectorXd alpha;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  Eigen::VectorXd imbalance;  // (1/N) |sum_pattern phi - sum_complete odds * phi|
  bool converged = false;
};

/// Minimises loss + lambda * (gamma * sum t_k |a_k| + (1 - gamma) * sum D_k a_k^2), starting
/// from zero (or the warm start). The quadratic penalty is part of the smooth term, so the
/// proximal map is a per-coordinate soft-threshold. Both solvers take only monotone steps.
OddsFit fit_penalized(LossKind kind, const PairSample& s, const PenaltyConfig& cfg,
                      const SolverOptions& opts = {});

struct KktReport {
  Eigen::VectorXd residual;
  double max_residual = 0.0;
};

/// Per-coordinate violation of the subgradient optimality condition.
KktReport kkt_certificate(LossKind kind, const Eigen::VectorXd& alpha, const PairSample& s,
                          const PenaltyConfig& cfg);

/// Empirical imbalance of every basis function under odds exp(phi'a).
Eigen::VectorXd empirical_imbalance(const Eigen::VectorXd& alpha, const PairSample& s);

/// Excess of the observed imbalance over the penalty-implied bound
/// lambda*gamma*t_k + 2*lambda*(1-gamma)*D_k*|a_k|, maximised over k (<= 0 means within bound).
double imbalance_bound_excess(const OddsFit& fit, const PenaltyConfig& cfg);

/// One-line text record for audit logs.
void write_odds_fit(const OddsFit& fit, std::ostream& out);

}  // namespace ccmv
