#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ccmv/data_model.hpp"
#include "ccmv/odds_fit.hpp"

namespace ccmv {

struct CvGrid {
  std::vector<double> lambdas = default_lambdas();  // descending, positive
  std::vector<double> gammas = {0.0, 0.1, 0.5, 0.9, 1.0};
  int folds = 5;
  std::uint64_t seed = 0;

  /// 1, 0.1, ..., 1e-10
  static std::vector<double> default_lambdas();
  void validate() const;
};

struct CvEntry {
  double lambda = 0.0;
  double gamma = 0.0;
  double mean_loss = 0.0;  // +inf when some training fit failed
  double se = 0.0;         // fold-wise standard error of the mean
};

struct CvReport {
  std::vector<CvEntry> entries;  // lambda-major, grid order
  double chosen_lambda = 0.0;
  double chosen_gamma = 0.0;
  std::string fold_digest;
};

/// Fold labels 1..folds for the complete rows and the rows of pattern `r`, assigned
/// round-robin after shuffling each group separately; every other row gets 0.
std::vector<int> make_folds(const PatternIndex& ix, const ResponsePattern& r, int folds, std::uint64_t seed);

/// Fold labels restricted to the rows of a pair sample (positions follow `s.row_ids`).
std::vector<int> sample_folds(const PairSample& s, const std::vector<int>& labels);

/// For every (lambda, gamma) the penalized fit is trained on all folds but one and scored by
/// the unpenalized loss of the same kind on the held-out fold. `basis` supplies the penalty
/// weights, `s` the rows. Non-converged training fits score +inf. Ties go to the larger
/// lambda, then the larger gamma. Throws std::runtime_error if every grid point failed.
CvReport cross_validate(LossKind kind, const BasisSet& basis, const PairSample& s,
                        const std::vector<int>& labels, const CvGrid& grid,
                        const SolverOptions& opts = {});

void write_cv_csv(const CvReport& report, std::ostream& out);

}  // namespace ccmv
