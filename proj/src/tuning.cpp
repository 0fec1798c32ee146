#include "ccmv/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

namespace ccmv {

std::vector<double> CvGrid::default_lambdas() {
  std::vector<double> out;
  for (int e = 0; e <= 10; ++e) out.push_back(std::pow(10.0, -e));
  return out;
}

void CvGrid::validate() const {
  if (lambdas.empty() || gammas.empty()) throw std::invalid_argument("CV grid is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw std::invalid_argument("CV lambdas must be positive");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1]))
      throw std::invalid_argument("CV lambdas must be strictly descending");
  }
  for (double g : gammas)
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("CV gammas must lie in [0, 1]");
  if (folds < 2) throw std::invalid_argument("CV needs at least 2 folds");
}

std::vector<int> make_folds(const PatternIndex& ix, const ResponsePattern& r, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("CV needs at least 2 folds");
  if (r.is_complete()) throw std::invalid_argument("folds are drawn for a missing pattern, not 1_d");
  const auto& complete = ix.complete_ids();
  const auto& pattern = pattern_rows(ix, r);
  const auto k = static_cast<std::size_t>(folds);
  if (complete.size() < k || pattern.size() < k) {
    throw std::invalid_argument("pattern " + r.to_string() + " or the complete pattern has fewer than " +
                                std::to_string(folds) + " rows");
  }

  std::vector<int> labels(ix.total_rows(), 0);
  std::mt19937_64 rng(seed);
  for (const auto* group : {&complete, &pattern}) {
    std::vector<std::size_t> order = *group;
    // Fisher-Yates on raw engine output; std distributions differ between standard libraries.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t i = 0; i < order.size(); ++i) labels[order[i]] = static_cast<int>(i % k) + 1;
  }
  return labels;
}

std::vector<int> sample_folds(const PairSample& s, const std::vector<int>& labels) {
  std::vector<int> out;
  out.reserve(s.row_ids.size());
  for (std::size_t row : s.row_ids) out.push_back(labels.at(row));
  return out;
}

namespace {

// FNV-1a over the label sequence, printed as 16 hex digits.
std::string digest(const std::vector<int>& labels) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int v : labels) {
    for (int b = 0; b < 4; ++b) {
      h ^= static_cast<std::uint64_t>((static_cast<unsigned>(v) >> (8 * b)) & 0xFFU);
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

CvReport cross_validate(LossKind kind, const BasisSet& basis, const PairSample& s,
                        const std::vector<int>& labels, const CvGrid& grid, const SolverOptions& opts) {
  grid.validate();
  if (labels.size() != s.rows()) throw std::invalid_argument("fold labels do not match the pair sample");
  if (basis.size() != s.size()) throw std::invalid_argument("basis and pair sample differ in K");

  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t nl = grid.lambdas.size();
  const std::size_t ng = grid.gammas.size();
  const auto nf = static_cast<std::size_t>(grid.folds);

  // Only rows in the pair carry a fold. Each split keeps the full-data scaling (N per pair
  // row), so a given lambda means the same thing in training as in the final fit.
  std::size_t pair_rows = 0;
  for (int v : labels)
    if (v != 0) ++pair_rows;
  if (pair_rows == 0) throw std::invalid_argument("no rows carry a fold label");
  const double per_row = s.denom / static_cast<double>(pair_rows);

  std::vector<double> loss(nl * ng * nf, inf);  // [lambda][gamma][fold]
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < s.rows(); ++i) {
      if (labels[i] == 0) continue;
      (labels[i] == static_cast<int>(f) + 1 ? test : train).push_back(i);
    }
    if (test.empty() || train.empty()) throw std::invalid_argument("a CV fold is empty");
    const PairSample tr = s.subset(train, per_row * static_cast<double>(train.size()));
    const PairSample te = s.subset(test, per_row * static_cast<double>(test.size()));

    for (std::size_t g = 0; g < ng; ++g) {
      // Warm start down the lambda path from the last converged fit.
      SolverOptions o = opts;
      o.warm_start.reset();
      for (std::size_t l = 0; l < nl; ++l) {
        const auto cfg = PenaltyConfig::from_basis(basis, grid.lambdas[l], grid.gammas[g]);
        const OddsFit fit = fit_penalized(kind, tr, cfg, o);
        if (!fit.converged) continue;
        o.warm_start = fit.alpha;
        const LossValue held = evaluate_loss(kind, fit.alpha, te);
        if (!held.diverging && std::isfinite(held.value)) loss[(l * ng + g) * nf + f] = held.value;
      }
    }
  }

  CvReport report;
  report.fold_digest = digest(labels);
  double best = inf;
  for (std::size_t l = 0; l < nl; ++l) {
    // Gammas are visited from the largest down so strict improvement keeps tie-break order.
    std::vector<std::size_t> gorder(ng);
    for (std::size_t g = 0; g < ng; ++g) gorder[g] = g;
    std::stable_sort(gorder.begin(), gorder.end(),
                     [&](std::size_t a, std::size_t b) { return grid.gammas[a] > grid.gammas[b]; });
    for (std::size_t g : gorder) {
      double sum = 0.0;
      for (std::size_t f = 0; f < nf; ++f) sum += loss[(l * ng + g) * nf + f];
      const double mean = sum / static_cast<double>(nf);
      if (std::isfinite(mean) && mean < best) {
        best = mean;
        report.chosen_lambda = grid.lambdas[l];
        report.chosen_gamma = grid.gammas[g];
      }
    }
  }
  for (std::size_t l = 0; l < nl; ++l) {
    for (std::size_t g = 0; g < ng; ++g) {
      CvEntry e;
      e.lambda = grid.lambdas[l];
      e.gamma = grid.gammas[g];
      double sum = 0.0;
      for (std::size_t f = 0; f < nf; ++f) sum += loss[(l * ng + g) * nf + f];
      e.mean_loss = sum / static_cast<double>(nf);
      if (std::isfinite(e.mean_loss)) {
        double ss = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
          const double d = loss[(l * ng + g) * nf + f] - e.mean_loss;
          ss += d * d;
        }
        e.se = std::sqrt(ss / static_cast<double>(nf - 1) / static_cast<double>(nf));
      } else {
        e.se = inf;
      }
      report.entries.push_back(e);
    }
  }
  if (!std::isfinite(best))
    throw std::runtime_error("cross-validation failed: every grid point diverged for pattern " +
                             s.pattern.to_string());
  return report;
}

void write_cv_csv(const CvReport& report, std::ostream& out) {
  out << "lambda,gamma,mean_loss,se\n";
  char buf[160];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", e.lambda, e.gamma, e.mean_loss, e.se);
    out << buf;
  }
}

}  // namespace ccmv
