#include "ccmv/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iterator>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace ccmv {

namespace {

double expit(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Eigen::VectorXd augmented(const Eigen::VectorXd& row, const std::vector<std::size_t>& cols) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(cols.size()) + 1);
  for (std::size_t j = 0; j < cols.size(); ++j) x[static_cast<Eigen::Index>(j)] = row[static_cast<Eigen::Index>(cols[j])];
  x[x.size() - 1] = 1.0;
  return x;
}

std::vector<Eigen::VectorXd> complete_records(const Dataset& ds, const std::vector<std::size_t>& rows) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_back(ds.complete_row(i));
  return out;
}

struct Score {
  Eigen::VectorXd g;
  Eigen::MatrixXd j;
};

Score weighted_score(const EstimatingFunction& psi, const Eigen::VectorXd& theta,
                     const std::vector<Eigen::VectorXd>& recs, const Eigen::VectorXd& w, double n,
                     bool with_jac) {
  const auto q = static_cast<Eigen::Index>(psi.q);
  Score s{Eigen::VectorXd::Zero(q), with_jac ? Eigen::MatrixXd::Zero(q, q) : Eigen::MatrixXd()};
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double wi = w[static_cast<Eigen::Index>(i)];
    s.g += wi * psi.eval(theta, recs[i]);
    if (with_jac) s.j += wi * psi.jac(theta, recs[i]);
  }
  s.g /= n;
  if (with_jac) s.j /= n;
  return s;
}

double condition_number(const Eigen::MatrixXd& m) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double lo = sv[sv.size() - 1];
  return lo > 0.0 ? sv[0] / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

EstimatingFunction logistic_psi(std::vector<std::size_t> predictor_cols, std::size_t outcome_col) {
  EstimatingFunction f;
  f.q = predictor_cols.size() + 1;
  f.eval = [cols = predictor_cols, outcome_col](const Eigen::VectorXd& theta, const Eigen::VectorXd& row) {
    const Eigen::VectorXd x = augmented(row, cols);
    return Eigen::VectorXd((row[static_cast<Eigen::Index>(outcome_col)] - expit(theta.dot(x))) * x);
  };
  f.jac = [cols = std::move(predictor_cols)](const Eigen::VectorXd& theta, const Eigen::VectorXd& row) {
    const Eigen::VectorXd x = augmented(row, cols);
    const double p = expit(theta.dot(x));
    return Eigen::MatrixXd(-p * (1.0 - p) * x * x.transpose());
  };
  return f;
}

Eigen::VectorXd odds_on_rows(const BasisSet& basis, const Eigen::VectorXd& alpha,
                             const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto p = static_cast<Eigen::Index>(basis.position_of(rows[i]));
    out[static_cast<Eigen::Index>(i)] = std::exp(basis.design.row(p).dot(alpha));
  }
  return out;
}

Eigen::VectorXd assemble_weights(const std::vector<OddsFit>& fits, const PatternIndex& ix,
                                 const std::vector<BasisSet>& bases) {
  const auto& complete = ix.complete_ids();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(complete.size()));
  for (const auto& r : ix.incomplete_patterns()) {
    const auto fit = std::find_if(fits.begin(), fits.end(), [&](const OddsFit& f) { return f.pattern == r; });
    const auto basis = std::find_if(bases.begin(), bases.end(), [&](const BasisSet& b) { return b.pattern == r; });
    if (fit == fits.end() || basis == bases.end())
      throw std::invalid_argument("no odds fit for pattern " + r.to_string());
    w += odds_on_rows(*basis, fit->alpha, complete);
  }
  return w;
}

ZSolution solve_weighted_z(const EstimatingFunction& psi, const Eigen::VectorXd& weights, const Dataset& ds,
                           const std::vector<std::size_t>& rows, const std::optional<Eigen::VectorXd>& init) {
  if (rows.empty()) throw std::invalid_argument("weighted Z-estimation needs at least one complete row");
  if (static_cast<std::size_t>(weights.size()) != rows.size())
    throw std::invalid_argument("weights are not aligned with rows");
  const auto q = static_cast<Eigen::Index>(psi.q);
  const auto recs = complete_records(ds, rows);
  const double n = static_cast<double>(ds.rows());

  ZSolution sol;
  sol.theta = init ? *init : Eigen::VectorXd::Zero(q);
  if (sol.theta.size() != q) throw std::invalid_argument("initial theta has the wrong length");

  Score s = weighted_score(psi, sol.theta, recs, weights, n, true);
  for (sol.iterations = 0; sol.iterations < 100; ++sol.iterations) {
    sol.score_norm = s.g.lpNorm<Eigen::Infinity>();
    if (sol.score_norm < 1e-10) {
      sol.converged = true;
      return sol;
    }
    if (condition_number(s.j) > 1e12) throw NumericalError("estimating-equation Jacobian is singular");
    const Eigen::VectorXd step = s.j.partialPivLu().solve(-s.g);
    const double before = s.g.norm();
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = sol.theta + t * step;
      Score ts = weighted_score(psi, trial, recs, weights, n, false);
      if (ts.g.allFinite() && ts.g.norm() < before) {
        sol.theta = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    s = weighted_score(psi, sol.theta, recs, weights, n, true);
  }
  sol.score_norm = s.g.lpNorm<Eigen::Infinity>();
  sol.converged = sol.score_norm < 1e-10;
  return sol;
}

Eigen::MatrixXd estimate_u(const Eigen::VectorXd& theta, const EstimatingFunction& psi, const BasisSet& basis,
                           const Dataset& ds, const std::vector<std::size_t>& complete_rows) {
  const auto K = static_cast<Eigen::Index>(basis.size());
  const auto n = static_cast<Eigen::Index>(complete_rows.size());
  if (n < K) throw std::invalid_argument("fewer complete rows than basis functions for pattern " +
                                         basis.pattern.to_string());
  Eigen::MatrixXd phi(n, K);
  Eigen::MatrixXd y(n, static_cast<Eigen::Index>(psi.q));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t row = complete_rows[static_cast<std::size_t>(i)];
    phi.row(i) = basis.design.row(static_cast<Eigen::Index>(basis.position_of(row)));
    y.row(i) = psi.eval(theta, ds.complete_row(row)).transpose();
  }
  Eigen::MatrixXd a = phi.transpose() * phi;
  const double ridge = 1e-8 * a.trace() / static_cast<double>(K);
  a.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !(ridge > 0.0)) throw NumericalError("series regression for u collapsed");
  Eigen::MatrixXd beta = ldlt.solve(phi.transpose() * y);
  if (!beta.allFinite()) throw NumericalError("series regression for u collapsed");
  return beta;
}

Sandwich sandwich_variance(const Eigen::VectorXd& theta, const EstimatingFunction& psi, const Dataset& ds,
                           const PatternIndex& ix, const std::vector<PatternTerm>& terms,
                           const Eigen::VectorXd& weights) {
  const auto q = static_cast<Eigen::Index>(psi.q);
  const double n = static_cast<double>(ds.rows());
  const auto& complete = ix.complete_ids();
  if (static_cast<std::size_t>(weights.size()) != complete.size())
    throw std::invalid_argument("weights are not aligned with the complete rows");

  const auto recs = complete_records(ds, complete);
  std::vector<Eigen::VectorXd> psis;
  psis.reserve(recs.size());
  Eigen::VectorXd p_psi = Eigen::VectorXd::Zero(q);
  Sandwich out;
  out.bread = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double wi = weights[static_cast<Eigen::Index>(i)];
    psis.push_back(psi.eval(theta, recs[i]));
    p_psi += wi * psis.back();
    out.bread += wi * psi.jac(theta, recs[i]);
  }
  p_psi /= n;
  out.bread /= n;

  // Complete-row contributions start at psi and gain odds_r (psi - u_r) per pattern.
  Eigen::MatrixXd f_complete(q, static_cast<Eigen::Index>(complete.size()));
  for (std::size_t i = 0; i < psis.size(); ++i) f_complete.col(static_cast<Eigen::Index>(i)) = psis[i];

  out.meat = Eigen::MatrixXd::Zero(q, q);
  for (const auto& group : ix.groups()) {
    if (group.pattern.is_complete()) continue;
    const auto term = std::find_if(terms.begin(), terms.end(),
                                   [&](const PatternTerm& t) { return t.basis->pattern == group.pattern; });
    if (term == terms.end()) throw std::invalid_argument("no u-hat for pattern " + group.pattern.to_string());
    const BasisSet& b = *term->basis;

    const Eigen::VectorXd odds = odds_on_rows(b, term->alpha, complete);
    for (std::size_t i = 0; i < complete.size(); ++i) {
      const auto p = static_cast<Eigen::Index>(b.position_of(complete[i]));
      const Eigen::VectorXd u = (b.design.row(p) * term->u_coef).transpose();
      f_complete.col(static_cast<Eigen::Index>(i)) += odds[static_cast<Eigen::Index>(i)] * (psis[i] - u);
    }
    for (std::size_t row : group.rows) {
      const auto p = static_cast<Eigen::Index>(b.position_of(row));
      const Eigen::VectorXd f = (b.design.row(p) * term->u_coef).transpose() - p_psi;
      out.meat += f * f.transpose();
    }
  }
  f_complete.colwise() -= p_psi;
  out.meat += f_complete * f_complete.transpose();
  out.meat /= n;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(out.bread);
  if (!lu.isInvertible() || condition_number(out.bread) > 1e12) throw NumericalError("sandwich bread is singular");
  const Eigen::MatrixXd dinv = lu.inverse();
  out.cov = dinv * out.meat * dinv.transpose() / n;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.se = out.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

std::uint64_t pattern_fold_seed(std::uint64_t seed, std::size_t pattern_position) {
  return seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(pattern_position) + 1);
}

FitResult fit_ccmv(const Dataset& ds, const EstimatingFunction& psi, const PipelineOptions& opts) {
  const PatternIndex ix = index_patterns(ds);
  if (!ix.has_complete()) throw DataError("no complete cases: the complete pattern is required");
  const auto domain = ds.observed_domain();
  const auto& complete = ix.complete_ids();

  FitResult res;
  res.complete_rows = complete;
  bool all_converged = true;

  const auto patterns = ix.incomplete_patterns();
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const ResponsePattern& r = patterns[p];
    const auto& prow = pattern_rows(ix, r);
    std::vector<std::size_t> rows;
    rows.reserve(complete.size() + prow.size());
    std::merge(complete.begin(), complete.end(), prow.begin(), prow.end(), std::back_inserter(rows));

    PatternFit pf;
    pf.basis = build_pattern_basis(opts.basis, r, ds, rows, domain);
    if (complete.size() < pf.basis.size()) {
      throw DataError("pattern " + r.to_string() + " needs at least " + std::to_string(pf.basis.size()) +
                      " complete rows, found " + std::to_string(complete.size()));
    }
    const PairSample s = make_pair_sample(pf.basis, ds);
    pf.fold_seed = pattern_fold_seed(opts.grid.seed, p);

    bool tuned = true;
    if (opts.fixed_tuning) {
      pf.lambda = opts.fixed_tuning->first;
      pf.gamma = opts.fixed_tuning->second;
    } else {
      std::vector<int> labels;
      try {
        labels = make_folds(ix, r, opts.grid.folds, pf.fold_seed);
      } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
      }
      try {
        pf.cv = cross_validate(opts.loss, pf.basis, s, sample_folds(s, labels), opts.grid, opts.solver);
        pf.lambda = pf.cv->chosen_lambda;
        pf.gamma = pf.cv->chosen_gamma;
      } catch (const std::runtime_error&) {
        tuned = false;
      }
    }
    if (tuned) {
      pf.fit = fit_penalized(opts.loss, s, PenaltyConfig::from_basis(pf.basis, pf.lambda, pf.gamma), opts.solver);
    } else {
      pf.fit.pattern = r;
      pf.fit.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pf.basis.size()));
      pf.fit.converged = false;
    }
    all_converged = all_converged && pf.fit.converged;
    res.per_pattern.push_back(std::move(pf));
  }

  std::vector<OddsFit> fits;
  std::vector<BasisSet> bases;
  for (const auto& pf : res.per_pattern) {
    fits.push_back(pf.fit);
    bases.push_back(pf.basis);
  }
  res.weights = assemble_weights(fits, ix, bases);
  const auto q = static_cast<Eigen::Index>(psi.q);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!res.weights.allFinite()) {
    res.theta = res.se = res.ci_lo = res.ci_hi = Eigen::VectorXd::Constant(q, nan);
    res.cov = Eigen::MatrixXd::Constant(q, q, nan);
    res.converged = false;
    return res;
  }

  const ZSolution z = solve_weighted_z(psi, res.weights, ds, complete);
  res.theta = z.theta;
  res.newton_iters = z.iterations;
  res.converged = all_converged && z.converged;

  res.cov = Eigen::MatrixXd::Constant(q, q, nan);
  res.se = Eigen::VectorXd::Constant(q, nan);
  if (opts.compute_variance && z.converged) {
    std::vector<PatternTerm> terms;
    for (const auto& pf : res.per_pattern)
      terms.push_back(PatternTerm{&pf.basis, pf.fit.alpha, estimate_u(res.theta, psi, pf.basis, ds, complete)});
    const Sandwich sw = sandwich_variance(res.theta, psi, ds, ix, terms, res.weights);
    res.cov = sw.cov;
    res.se = sw.se;
  }
  res.ci_lo = res.theta - 1.96 * res.se;
  res.ci_hi = res.theta + 1.96 * res.se;
  return res;
}

void write_coef_csv(const FitResult& fit, const std::vector<std::string>& terms, std::ostream& out) {
  if (terms.size() != static_cast<std::size_t>(fit.theta.size()))
    throw std::invalid_argument("term names do not match the coefficient vector");
  out << "term,estimate,se,z,p,ci_lo,ci_hi\n";
  char buf[256];
  for (Eigen::Index j = 0; j < fit.theta.size(); ++j) {
    const double z = fit.theta[j] / fit.se[j];
    const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
    std::snprintf(buf, sizeof buf, ",%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", fit.theta[j], fit.se[j], z, p,
                  fit.ci_lo[j], fit.ci_hi[j]);
    out << terms[static_cast<std::size_t>(j)] << buf;
  }
}

void write_tuning_manifest(const FitResult& fit, const std::vector<Column>& columns, std::ostream& out) {
  const auto prec = out.precision();
  out << std::setprecision(17);
  for (const auto& pf : fit.per_pattern) {
    out << "[pattern " << pf.basis.pattern.to_string() << "]\n";
    out << "K=" << pf.basis.size() << " lambda=" << pf.lambda << " gamma=" << pf.gamma
        << " tuned_by=" << (pf.cv ? "cv" : "fixed") << " fold_seed=" << pf.fold_seed;
    if (pf.cv) out << " fold_digest=" << pf.cv->fold_digest;
    out << '\n';
    write_odds_fit(pf.fit, out);
    write_basis_manifest(pf.basis, columns, out);
  }
  out.precision(prec);
}

void write_weights_csv(const FitResult& fit, std::ostream& out) {
  out << "row,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < fit.complete_rows.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", fit.complete_rows[i], fit.weights[static_cast<Eigen::Index>(i)]);
    out << buf;
  }
}

}  // namespace ccmv
