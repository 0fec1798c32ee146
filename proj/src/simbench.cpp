#include "ccmv/simbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "ccmv/estimator.hpp"
#include "ccmv/odds_fit.hpp"

namespace ccmv {

namespace {

constexpr std::uint64_t kCvSeedMultiplier = 6364136223846793005ULL;
constexpr std::uint64_t kCvSeedOffset = 1442695040888963407ULL;

double sq(double x) { return x * x; }

std::vector<Column> sim_columns() {
  return {{"y", ColumnKind::binary}, {"x1", ColumnKind::continuous}, {"x2", ColumnKind::continuous},
          {"x3", ColumnKind::continuous}};
}

double truncated_normal(std::mt19937_64& rng, std::normal_distribution<double>& z) {
  for (;;) {
    const double v = z(rng);
    if (v >= -3.0 && v <= 3.0) return v;
  }
}

EstimatingFunction sim_psi() { return logistic_psi({1, 2, 3}, 0); }

MethodResult from_fit(const FitResult& fit, bool with_se) {
  MethodResult out;
  out.theta = fit.theta;
  if (with_se) out.se = fit.se;
  out.converged = fit.converged && fit.theta.allFinite() && (!with_se || fit.se.allFinite());
  if (!out.converged) out.failure = "non-converged odds fit or Z-solve";
  return out;
}

MethodResult weighted_only(const EstimatingFunction& psi, const Eigen::VectorXd& w, const Dataset& ds,
                           const std::vector<std::size_t>& rows) {
  MethodResult out;
  const ZSolution z = solve_weighted_z(psi, w, ds, rows);
  out.theta = z.theta;
  out.converged = z.converged;
  if (!z.converged) out.failure = "Z-solve did not converge";
  return out;
}

}  // namespace

SimSetting SimSetting::make(int id, std::size_t n) {
  if (id < 1 || id > 3) throw std::invalid_argument("simulation setting must be 1, 2 or 3, got " + std::to_string(id));
  if (n < 1) throw std::invalid_argument("simulation sample size must be positive");
  SimSetting s;
  s.id = id;
  s.n = n;
  return s;
}

std::array<double, 3> SimSetting::log_odds(double y, double x1, double x2, double x3) const {
  const double y1 = y == 1.0 ? 1.0 : 0.0;
  const double y0 = 1.0 - y1;
  switch (id) {
    case 1:
      return {x1 + x2 - y1 - 0.5, 0.5 * x1 + x3 - 0.5 * y1 - 0.3, 1.5 * x1 - y1 - 0.4};
    case 2:
      return {0.2 * (sq(x1) - 9.0) * (x1 + 1.5) + 0.2 * (sq(x2) - 9.0) * (x2 + 1.0) +
                  0.1 * (x1 + 2.0) * (x2 + 2.0) * (x2 - 1.0) - 2.0 * y1 + 3.0,
              -0.2 * (sq(x1) - 9.0) * (x1 + 1.0) + 0.2 * (sq(x3) - 9.0) * (x3 + 1.5) - 2.0 * y1,
              -0.2 * (x1 + 2.0) * (x1 + 0.5) * (x1 - 4.0) - 2.0 * y1 - 1.0};
    case 3:
      return {0.1 * (sq(x1) - 9.0) * (sq(x1) - 4.0) * x1 + 0.1 * (sq(x2) - 9.0) * (x2 + 1.0) +
                  0.25 * (x1 + 2.0) * (x2 + 2.0) * (x2 - 1.0) - 2.0 * y1,
              0.1 * (sq(x1) - 9.0) * (x1 + 1.0) + 0.1 * (sq(x3) - 9.0) * (sq(x3) - 4.0) * x3 +
                  y1 * ((x1 + 1.0) * (sq(x3) - 4.0) - 2.0),
              y0 * (0.2 * (sq(x1) - 9.0) * (sq(x1) - 4.0) * x1 - 1.0) -
                  y1 * (0.1 * (sq(x1) - 9.0) * (sq(x1) - 6.25) * (x1 + 0.5))};
    default:
      throw std::logic_error("invalid simulation setting");
  }
}

std::array<ResponsePattern, 4> sim_patterns() {
  return {ResponsePattern::from_string("1111"), ResponsePattern::from_string("1110"),
          ResponsePattern::from_string("1101"), ResponsePattern::from_string("1100")};
}

std::array<double, 4> pattern_probabilities(const std::array<double, 3>& log_odds) {
  std::array<double, 4> p{1.0, std::exp(log_odds[0]), std::exp(log_odds[1]), std::exp(log_odds[2])};
  const double total = p[0] + p[1] + p[2] + p[3];
  for (auto& v : p) v /= total;
  return p;
}

Replication gen_replication(const SimSetting& setting, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(setting.n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  Eigen::MatrixXd full(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 1; j <= 3; ++j) full(i, j) = truncated_normal(rng, z);
    const double eta = setting.theta0[0] * full(i, 1) + setting.theta0[1] * full(i, 2) +
                       setting.theta0[2] * full(i, 3) + setting.theta0[3];
    full(i, 0) = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }

  const auto patterns = sim_patterns();
  Eigen::MatrixXd masked = full;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto prob = pattern_probabilities(setting.log_odds(full(i, 0), full(i, 1), full(i, 2), full(i, 3)));
    double draw = u(rng);
    std::size_t k = 0;
    while (k < 3 && draw >= prob[k]) draw -= prob[k++];
    for (std::size_t j = 0; j < 4; ++j) {
      if (!patterns[k].observed(j)) masked(i, static_cast<Eigen::Index>(j)) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return {Dataset(sim_columns(), masked, "y"), Dataset(sim_columns(), full, "y")};
}

std::string to_string(MethodId m) {
  switch (m) {
    case MethodId::full: return "full";
    case MethodId::complete_case: return "complete_case";
    case MethodId::true_weight: return "true_weight";
    case MethodId::entropy_linear: return "entropy_linear";
    case MethodId::entropy_basis: return "entropy_basis";
    case MethodId::proposed: return "proposed";
  }
  return "unknown";
}

MethodId parse_method(std::string_view name) {
  for (MethodId m : all_methods())
    if (name == to_string(m)) return m;
  if (name == "complete") return MethodId::complete_case;
  if (name == "true") return MethodId::true_weight;
  if (name == "linear") return MethodId::entropy_linear;
  if (name == "basis") return MethodId::entropy_basis;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

const std::vector<MethodId>& all_methods() {
  static const std::vector<MethodId> m{MethodId::full,           MethodId::complete_case, MethodId::true_weight,
                                       MethodId::entropy_linear, MethodId::entropy_basis, MethodId::proposed};
  return m;
}

MethodResult run_method(MethodId method, const Replication& rep, const SimSetting& setting,
                        const MethodOptions& opts, std::uint64_t cv_seed) {
  const EstimatingFunction psi = sim_psi();
  try {
    switch (method) {
      case MethodId::full: {
        std::vector<std::size_t> rows(rep.full.rows());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        return weighted_only(psi, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rows.size())), rep.full, rows);
      }
      case MethodId::complete_case: {
        const auto ix = index_patterns(rep.observed);
        const auto& rows = ix.complete_ids();
        return weighted_only(psi, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rows.size())), rep.observed, rows);
      }
      case MethodId::true_weight: {
        const auto ix = index_patterns(rep.observed);
        const auto& rows = ix.complete_ids();
        Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto v = rep.observed.complete_row(rows[i]);
          const auto lo = setting.log_odds(v[0], v[1], v[2], v[3]);
          w[static_cast<Eigen::Index>(i)] = 1.0 + std::exp(lo[0]) + std::exp(lo[1]) + std::exp(lo[2]);
        }
        return weighted_only(psi, w, rep.observed, rows);
      }
      case MethodId::entropy_linear: {
        PipelineOptions po;
        po.loss = LossKind::entropy;
        po.basis = opts.basis;
        po.basis.max_degree = 1;
        po.basis.tensor_continuous = false;
        po.basis.additive_binary = true;
        po.fixed_tuning = std::make_pair(0.0, 1.0);
        po.compute_variance = false;
        return from_fit(fit_ccmv(rep.observed, psi, po), false);
      }
      case MethodId::entropy_basis:
      case MethodId::proposed: {
        PipelineOptions po;
        po.loss = method == MethodId::proposed ? LossKind::tailored : LossKind::entropy;
        po.basis = opts.basis;
        po.grid = opts.grid;
        po.grid.seed = cv_seed;
        po.compute_variance = method == MethodId::proposed;
        const FitResult fit = fit_ccmv(rep.observed, psi, po);
        MethodResult out = from_fit(fit, method == MethodId::proposed);
        out.bound_excess = -std::numeric_limits<double>::infinity();
        if (po.loss == LossKind::tailored) {
          // The imbalance bound is a property of the tailored loss's stationarity condition.
          for (const auto& pf : fit.per_pattern) {
            if (!pf.fit.converged) continue;
            const auto cfg = PenaltyConfig::from_basis(pf.basis, pf.lambda, pf.gamma);
            out.bound_excess = std::max(out.bound_excess, imbalance_bound_excess(pf.fit, cfg));
            ++out.odds_fits;
          }
        }
        return out;
      }
    }
  } catch (const std::exception& e) {
    MethodResult out;
    out.theta = Eigen::VectorXd::Constant(4, std::numeric_limits<double>::quiet_NaN());
    out.converged = false;
    out.failure = e.what();
    return out;
  }
  throw std::logic_error("unhandled method");
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t r) { return master + r; }

std::uint64_t cv_seed(std::uint64_t master, std::size_t r) {
  return replication_seed(master, r) * kCvSeedMultiplier + kCvSeedOffset;
}

SummaryRow summarize_method(int setting, MethodId method, const Eigen::Vector4d& theta0,
                            const std::vector<const MethodResult*>& results) {
  SummaryRow row;
  row.setting = setting;
  row.method = method;
  std::vector<const MethodResult*> used;
  for (const auto* r : results) {
    if (r->converged) {
      used.push_back(r);
    } else {
      ++row.dropped;
    }
  }
  row.used = used.size();
  if (used.empty()) {
    row.bias = row.mse = Eigen::Vector4d::Constant(std::numeric_limits<double>::quiet_NaN());
    return row;
  }
  const double m = static_cast<double>(used.size());
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  for (const auto* r : used) {
    const Eigen::Vector4d t = r->theta;
    mean += t;
    row.mse += (t - theta0).array().square().matrix();
  }
  mean /= m;
  row.mse /= m;
  row.bias = mean - theta0;

  row.has_variance = std::all_of(used.begin(), used.end(), [](const MethodResult* r) { return r->se.size() == 4; });
  if (row.has_variance && used.size() >= 2) {
    Eigen::Vector4d ss = Eigen::Vector4d::Zero();
    Eigen::Vector4d covered = Eigen::Vector4d::Zero();
    for (const auto* r : used) {
      const Eigen::Vector4d t = r->theta;
      const Eigen::Vector4d se = r->se;
      ss += (t - mean).array().square().matrix();
      row.avg_se += se;
      for (int j = 0; j < 4; ++j)
        if (std::abs(t[j] - theta0[j]) <= 1.96 * se[j]) covered[j] += 1.0;
    }
    row.mc_sd = (ss / (m - 1.0)).cwiseSqrt();
    row.avg_se /= m;
    row.sd_ratio = row.avg_se.cwiseQuotient(row.mc_sd);
    row.coverage = covered / m;
  } else {
    row.has_variance = false;
  }
  return row;
}

StudyReport run_study(const StudyOptions& opts) {
  if (opts.reps < 2) throw std::invalid_argument("a study needs at least 2 replications");
  if (opts.methods.empty()) throw std::invalid_argument("a study needs at least one method");
  std::vector<SimSetting> settings;
  for (int id : opts.settings) settings.push_back(SimSetting::make(id, opts.n));

  const std::size_t nm = opts.methods.size();
  const std::size_t tasks = settings.size() * opts.reps;
  std::vector<MethodResult> results(tasks * nm);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const SimSetting& s = settings[t / opts.reps];
      const std::size_t r = t % opts.reps;
      const Replication rep = gen_replication(s, replication_seed(opts.master_seed, r));
      for (std::size_t k = 0; k < nm; ++k)
        results[t * nm + k] = run_method(opts.methods[k], rep, s, opts.method, cv_seed(opts.master_seed, r));
    }
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(opts.parallelism, static_cast<unsigned>(tasks)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  StudyReport report;
  report.options = opts;
  report.max_bound_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t si = 0; si < settings.size(); ++si) {
    for (std::size_t k = 0; k < nm; ++k) {
      std::vector<const MethodResult*> col;
      for (std::size_t r = 0; r < opts.reps; ++r) col.push_back(&results[(si * opts.reps + r) * nm + k]);
      report.rows.push_back(summarize_method(settings[si].id, opts.methods[k], settings[si].theta0, col));
    }
    for (std::size_t r = 0; r < opts.reps; ++r) {
      for (std::size_t k = 0; k < nm; ++k) {
        const MethodResult& res = results[(si * opts.reps + r) * nm + k];
        if (res.odds_fits > 0) {
          report.max_bound_excess = std::max(report.max_bound_excess, res.bound_excess);
          report.odds_fits_checked += static_cast<std::size_t>(res.odds_fits);
        }
        report.replicates.push_back({settings[si].id, r, opts.methods[k], res});
      }
    }
  }
  return report;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, ",%.6f", v);
  out << buf;
}

void put4(std::ostream& out, const Eigen::Vector4d& v) {
  for (int j = 0; j < 4; ++j) put(out, v[j]);
}

}  // namespace

void write_table1_csv(const StudyReport& report, std::ostream& out) {
  out << "setting,n,method,reps_used,dropped,bias_1,bias_2,bias_3,bias_4,mse_1,mse_2,mse_3,mse_4\n";
  for (const auto& row : report.rows) {
    out << row.setting << ',' << report.options.n << ',' << to_string(row.method) << ',' << row.used << ','
        << row.dropped;
    put4(out, row.bias);
    put4(out, row.mse);
    out << '\n';
  }
}

void write_table2_csv(const StudyReport& report, std::ostream& out) {
  out << "setting,n,method,sd_ratio_1,sd_ratio_2,sd_ratio_3,sd_ratio_4,coverage_1,coverage_2,coverage_3,coverage_4,"
         "avg_se_1,avg_se_2,avg_se_3,avg_se_4,mc_sd_1,mc_sd_2,mc_sd_3,mc_sd_4\n";
  for (const auto& row : report.rows) {
    if (!row.has_variance) continue;
    out << row.setting << ',' << report.options.n << ',' << to_string(row.method);
    put4(out, row.sd_ratio);
    put4(out, row.coverage);
    put4(out, row.avg_se);
    put4(out, row.mc_sd);
    out << '\n';
  }
}

void write_replicates_csv(const StudyReport& report, std::ostream& out) {
  out << "setting,rep,seed,method,converged,theta_1,theta_2,theta_3,theta_4,se_1,se_2,se_3,se_4\n";
  char buf[48];
  for (const auto& rec : report.replicates) {
    out << rec.setting << ',' << rec.rep << ',' << replication_seed(report.options.master_seed, rec.rep) << ','
        << to_string(rec.method) << ',' << (rec.result.converged ? 1 : 0);
    for (int j = 0; j < 4; ++j) {
      const double v = j < rec.result.theta.size() ? rec.result.theta[j] : std::numeric_limits<double>::quiet_NaN();
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    for (int j = 0; j < 4; ++j) {
      if (rec.result.se.size() == 4) {
        std::snprintf(buf, sizeof buf, ",%.17g", rec.result.se[j]);
        out << buf;
      } else {
        out << ',';
      }
    }
    out << '\n';
  }
}

void write_study_manifest(const StudyReport& report, std::ostream& out) {
  const auto& o = report.options;
  out << "ccmv_version=" << CCMV_VERSION << '\n';
  out << "settings=";
  for (std::size_t i = 0; i < o.settings.size(); ++i) out << (i ? "," : "") << o.settings[i];
  out << "\nmethods=";
  for (std::size_t i = 0; i < o.methods.size(); ++i) out << (i ? "," : "") << to_string(o.methods[i]);
  out << "\nreps=" << o.reps << "\nn=" << o.n << "\nseed=" << o.master_seed << '\n';
  out << "replication_seed=seed+r\n";
  out << "cv_seed=(seed+r)*" << kCvSeedMultiplier << "+" << kCvSeedOffset << " (mod 2^64)\n";
  out << "pattern_fold_seed=cv_seed+11400714819323198485*(pattern_position+1) (mod 2^64)\n";
  char buf[64];
  out << "lambda_grid=";
  for (std::size_t i = 0; i < o.method.grid.lambdas.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", o.method.grid.lambdas[i]);
    out << buf;
  }
  out << "\ngamma_grid=";
  for (std::size_t i = 0; i < o.method.grid.gammas.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", o.method.grid.gammas[i]);
    out << buf;
  }
  out << "\nfolds=" << o.method.grid.folds << "\ndegree=" << o.method.basis.max_degree
      << "\nadditive_binary=" << o.method.basis.additive_binary
      << "\nquad_nodes=" << o.method.basis.quad_nodes << '\n';
  for (const auto& row : report.rows) {
    out << "dropped[" << row.setting << "," << to_string(row.method) << "]=" << row.dropped << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6e", report.max_bound_excess);
  out << "odds_fits_checked=" << report.odds_fits_checked << "\nmax_imbalance_bound_excess=" << buf << '\n';
}

}  // namespace ccmv
