#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "ccmv/estimator.hpp"
#include "ccmv/simbench.hpp"
#include "oracles.hpp"

using namespace ccmv;

namespace {

// Composite Simpson average of P(R = r) over truncated-normal X and Bernoulli Y.
std::array<double, 4> pattern_frequencies_by_quadrature(const SimSetting& s, int intervals) {
  const double lo = -3.0, hi = 3.0, h = (hi - lo) / intervals;
  std::vector<double> node(intervals + 1), weight(intervals + 1);
  double mass = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    node[i] = lo + i * h;
    const double simpson = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    weight[i] = simpson * h / 3.0 * std::exp(-0.5 * node[i] * node[i]);
    mass += weight[i];
  }
  std::array<double, 4> out{};
  for (int a = 0; a <= intervals; ++a) {
    for (int b = 0; b <= intervals; ++b) {
      for (int c = 0; c <= intervals; ++c) {
        const double x1 = node[a], x2 = node[b], x3 = node[c];
        const double w = weight[a] * weight[b] * weight[c] / (mass * mass * mass);
        const double eta = s.theta0[0] * x1 + s.theta0[1] * x2 + s.theta0[2] * x3 + s.theta0[3];
        const double p1 = 1.0 / (1.0 + std::exp(-eta));
        for (int y = 0; y <= 1; ++y) {
          const auto lo3 = s.log_odds(y, x1, x2, x3);
          const double e[4] = {1.0, std::exp(lo3[0]), std::exp(lo3[1]), std::exp(lo3[2])};
          const double tot = e[0] + e[1] + e[2] + e[3];
          for (int k = 0; k < 4; ++k) out[k] += w * (y ? p1 : 1.0 - p1) * e[k] / tot;
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd full_design(const Dataset& ds) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.rows()), 4);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) << ds.at(i, 1), ds.at(i, 2), ds.at(i, 3), 1.0;
  }
  return x;
}

Eigen::VectorXd full_outcome(const Dataset& ds) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.rows()));
  for (std::size_t i = 0; i < ds.rows(); ++i) y[static_cast<Eigen::Index>(i)] = ds.at(i, 0);
  return y;
}

MethodOptions quick_options() {
  MethodOptions o;
  o.grid.lambdas = {1e-1, 1e-2};
  o.grid.gammas = {0.5};
  return o;
}

}  // namespace

TEST_CASE("log odds golden values") {
  const auto s1 = SimSetting::make(1).log_odds(0.0, 0.0, 0.0, 0.0);
  CHECK(s1[0] == doctest::Approx(-0.5));
  CHECK(s1[1] == doctest::Approx(-0.3));
  CHECK(s1[2] == doctest::Approx(-0.4));

  // Hand evaluation at (y = 1, x = (1, 2, -1)).
  const auto s2 = SimSetting::make(2).log_odds(1.0, 1.0, 2.0, -1.0);
  CHECK(s2[0] == doctest::Approx(-4.8));
  CHECK(s2[1] == doctest::Approx(0.4));
  CHECK(s2[2] == doctest::Approx(-0.3));
  const auto s3 = SimSetting::make(3).log_odds(1.0, 1.0, 2.0, -1.0);
  CHECK(s3[0] == doctest::Approx(1.9));
  CHECK(s3[1] == doctest::Approx(-12.0));
  CHECK(s3[2] == doctest::Approx(-6.3));
  const auto s3y0 = SimSetting::make(3).log_odds(0.0, 1.0, 2.0, -1.0);
  CHECK(s3y0[0] == doctest::Approx(3.9));
  CHECK(s3y0[1] == doctest::Approx(-4.0));
  CHECK(s3y0[2] == doctest::Approx(3.8));

  CHECK_THROWS_AS(SimSetting::make(4), std::invalid_argument);
}

TEST_CASE("pattern probabilities") {
  const auto unit = pattern_probabilities({0.0, 0.0, 0.0});
  for (double p : unit) CHECK(p == doctest::Approx(0.25));
  const auto p = pattern_probabilities({1.2, -3.0, 0.4});
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[1] / p[0] == doctest::Approx(std::exp(1.2)));
}

TEST_CASE("pattern frequencies match the analytic mechanism") {
  for (int id : {1, 2, 3}) {
    const auto setting = SimSetting::make(id, 100000);
    const Dataset ds = gen_replication(setting, 17 + id).observed;
    const auto ix = index_patterns(ds);
    const auto expect = pattern_frequencies_by_quadrature(setting, 80);
    const auto patterns = sim_patterns();
    for (std::size_t k = 0; k < 4; ++k) {
      double freq = 0.0;
      for (const auto& g : ix.groups())
        if (g.pattern == patterns[k]) freq = static_cast<double>(g.rows.size()) / 1e5;
      INFO("setting " << id << " pattern " << patterns[k].to_string());
      CHECK(std::abs(freq - expect[k]) <= 3.0 * std::sqrt(expect[k] * (1.0 - expect[k]) / 1e5));
    }
    CHECK(expect[0] > 0.05);
  }
}

TEST_CASE("replications draw truncated covariates and keep y observed") {
  const auto rep = gen_replication(SimSetting::make(2, 2000), 3);
  for (std::size_t i = 0; i < rep.full.rows(); ++i) {
    CHECK(rep.observed.observed(i, 0));
    for (std::size_t j = 1; j < 4; ++j) {
      CHECK(std::abs(rep.full.at(i, j)) <= 3.0);
      if (rep.observed.observed(i, j)) CHECK(rep.observed.at(i, j) == rep.full.at(i, j));
    }
  }
  // The covariates and outcome of a seed do not depend on the setting.
  const auto other = gen_replication(SimSetting::make(3, 2000), 3);
  CHECK(other.full.at(1999, 3) == rep.full.at(1999, 3));
}

TEST_CASE("full-data method equals the IRLS oracle") {
  const auto setting = SimSetting::make(1, 500);
  const auto rep = gen_replication(setting, 4);
  const MethodResult r = run_method(MethodId::full, rep, setting, MethodOptions{}, 1);
  REQUIRE(r.converged);
  const auto oracle_fit = oracle::irls_logistic(full_design(rep.full), full_outcome(rep.full));
  CHECK((r.theta - oracle_fit.beta).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("true weights come from the generating odds") {
  const auto setting = SimSetting::make(2, 600);
  const auto rep = gen_replication(setting, 5);
  const MethodResult r = run_method(MethodId::true_weight, rep, setting, MethodOptions{}, 1);
  REQUIRE(r.converged);
  const auto ix = index_patterns(rep.observed);
  const auto& complete = ix.complete_ids();
  Eigen::VectorXd w(static_cast<Eigen::Index>(complete.size()));
  for (std::size_t i = 0; i < complete.size(); ++i) {
    const auto v = rep.full.complete_row(complete[i]);
    const auto lo = setting.log_odds(v[0], v[1], v[2], v[3]);
    w[static_cast<Eigen::Index>(i)] = 1.0 + std::exp(lo[0]) + std::exp(lo[1]) + std::exp(lo[2]);
  }
  const ZSolution z = solve_weighted_z(logistic_psi({1, 2, 3}, 0), w, rep.observed, complete);
  CHECK((r.theta - z.theta).lpNorm<Eigen::Infinity>() <= 1e-10);

  // Constant odds, as under MCAR, reproduce the complete-case fit.
  const MethodResult cc = run_method(MethodId::complete_case, rep, setting, MethodOptions{}, 1);
  const ZSolution flat = solve_weighted_z(logistic_psi({1, 2, 3}, 0),
                                          Eigen::VectorXd::Constant(w.size(), 4.0), rep.observed, complete);
  CHECK((cc.theta - flat.theta).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("proposed on data without missingness equals full") {
  const auto setting = SimSetting::make(1, 300);
  const auto drawn = gen_replication(setting, 6);
  const Replication rep{drawn.full, drawn.full};
  const MethodResult full = run_method(MethodId::full, rep, setting, MethodOptions{}, 1);
  const MethodResult prop = run_method(MethodId::proposed, rep, setting, quick_options(), 1);
  REQUIRE(prop.converged);
  CHECK((prop.theta - full.theta).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(prop.se.size() == 4);
}

TEST_CASE("every method runs on a small replication") {
  const auto setting = SimSetting::make(1, 800);
  const auto rep = gen_replication(setting, 7);
  for (MethodId m : all_methods()) {
    const MethodResult r = run_method(m, rep, setting, quick_options(), 9);
    INFO(to_string(m) << ": " << r.failure);
    CHECK(r.converged);
    CHECK(r.theta.size() == 4);
    CHECK(r.se.size() == (m == MethodId::proposed ? 4 : 0));
    if (m == MethodId::proposed) {
      CHECK(r.odds_fits == 3);
      CHECK(r.bound_excess <= 1e-7);
    }
  }
}

TEST_CASE("method names") {
  for (MethodId m : all_methods()) CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("complete") == MethodId::complete_case);
  CHECK(parse_method("true") == MethodId::true_weight);
  CHECK(parse_method("linear") == MethodId::entropy_linear);
  CHECK(parse_method("basis") == MethodId::entropy_basis);
  CHECK_THROWS(parse_method("mean_score"));
}

TEST_CASE("summaries drop failed replications") {
  const Eigen::Vector4d theta0(1.0, -1.0, 1.0, -2.0);
  MethodResult a, b, c;
  a.converged = b.converged = true;
  a.theta = theta0 + Eigen::Vector4d::Constant(0.1);
  b.theta = theta0 - Eigen::Vector4d(0.1, 0.3, 0.0, 0.2);
  a.se = b.se = Eigen::Vector4d::Constant(0.2);
  c.converged = false;
  const SummaryRow row = summarize_method(1, MethodId::proposed, theta0, {&a, &b, &c});
  CHECK(row.used == 2);
  CHECK(row.dropped == 1);
  CHECK(row.bias[1] == doctest::Approx(-0.1));
  CHECK(row.mse[1] == doctest::Approx(0.05));
  for (int k = 0; k < 4; ++k) CHECK(row.mse[k] >= row.bias[k] * row.bias[k]);
  CHECK(row.has_variance);
  CHECK(row.avg_se[0] == doctest::Approx(0.2));
  CHECK(row.mc_sd[0] == doctest::Approx(std::sqrt(0.02)));
  // Coverage of theta0 by theta +- 1.96 * 0.2: coordinate 2 misses for b (error 0.3 < 0.392).
  CHECK(row.coverage[1] == doctest::Approx(1.0));
}

TEST_CASE("study reports are reproducible and independent of scheduling") {
  StudyOptions o;
  o.methods = {MethodId::full, MethodId::complete_case, MethodId::true_weight, MethodId::proposed};
  o.reps = 3;
  o.n = 400;
  o.master_seed = 5;
  o.method = quick_options();
  const auto render = [](const StudyReport& r) {
    std::ostringstream t1, t2, rp;
    write_table1_csv(r, t1);
    write_table2_csv(r, t2);
    write_replicates_csv(r, rp);
    return t1.str() + t2.str() + rp.str();
  };
  const std::string first = render(run_study(o));
  CHECK(render(run_study(o)) == first);
  o.parallelism = 3;
  const StudyReport threaded = run_study(o);
  CHECK(render(threaded) == first);
  CHECK(threaded.rows.size() == 4);
  CHECK(threaded.odds_fits_checked == 9);
  CHECK(threaded.max_bound_excess <= 1e-7);
  CHECK(first.rfind("setting,n,method,reps_used,dropped,bias_1", 0) == 0);

  std::ostringstream manifest;
  write_study_manifest(threaded, manifest);
  CHECK(manifest.str().find("\nseed=5\n") != std::string::npos);
}

TEST_CASE("seed ledger") {
  CHECK(replication_seed(10, 3) == 13);
  CHECK(cv_seed(10, 3) == 13ULL * 6364136223846793005ULL + 1442695040888963407ULL);
}
