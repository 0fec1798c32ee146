#include "ccmv/basis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ccmv {

namespace {

// Exponent tuples in [0, degree]^dims, first variable varying slowest, all-zero excluded.
std::vector<std::vector<int>> tensor_exponents(std::size_t dims, int degree) {
  std::vector<std::vector<int>> out;
  if (dims == 0) return out;
  std::vector<int> e(dims, 0);
  while (true) {
    std::size_t pos = dims;
    while (pos > 0) {
      --pos;
      if (e[pos] < degree) {
        ++e[pos];
        std::fill(e.begin() + static_cast<std::ptrdiff_t>(pos) + 1, e.end(), 0);
        break;
      }
      if (pos == 0) return out;
    }
    out.push_back(e);
  }
}

struct Monomial {
  double value = 1.0;
  double first = 0.0;
  double second = 0.0;
};

Monomial monomial_derivatives(const Factor& f, double x) {
  const double u = (x - f.center) / f.half_width;
  const int e = f.exponent;
  const double h = f.half_width;
  Monomial m;
  m.value = std::pow(u, e);
  m.first = e >= 1 ? e * std::pow(u, e - 1) / h : 0.0;
  m.second = e >= 2 ? e * (e - 1) * std::pow(u, e - 2) / (h * h) : 0.0;
  return m;
}

}  // namespace

double BasisFunction::evaluate(std::span<const double> point) const {
  double v = 1.0;
  for (const auto& f : factors) {
    const double x = point[f.variable];
    if (f.indicator) {
      v *= x == 1.0 ? 1.0 : 0.0;
    } else {
      v *= std::pow((x - f.center) / f.half_width, f.exponent);
    }
  }
  return v;
}

std::string BasisFunction::describe(const std::vector<Column>& columns) const {
  if (factors.empty()) return "1";
  std::string s;
  for (const auto& f : factors) {
    if (!s.empty()) s += "*";
    const auto& name = columns.at(f.variable).name;
    if (f.indicator) {
      s += "1{" + name + "=1}";
    } else {
      s += name + "^" + std::to_string(f.exponent);
    }
  }
  return s;
}

std::size_t BasisSet::position_of(std::size_t row) const {
  const auto it = std::lower_bound(rows.begin(), rows.end(), row);
  if (it == rows.end() || *it != row) {
    throw std::out_of_range("row " + std::to_string(row) + " is not part of the basis for pattern " +
                            pattern.to_string());
  }
  return static_cast<std::size_t>(it - rows.begin());
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

std::vector<BasisFunction> basis_functions(const BasisSpec& spec, const ResponsePattern& pattern,
                                           const std::vector<Column>& columns,
                                           std::span<const Interval> domain) {
  if (spec.max_degree < 1) throw std::invalid_argument("basis max_degree must be >= 1");
  std::vector<std::size_t> continuous;
  std::vector<std::size_t> binary;
  for (const auto j : pattern.observed_indices()) {
    (columns.at(j).kind == ColumnKind::continuous ? continuous : binary).push_back(j);
  }

  auto monomial = [&](std::size_t var, int exponent) {
    Factor f{var, exponent, false, 0.0, 1.0};
    if (spec.rescale_continuous) {
      const auto iv = domain[var];
      f.center = 0.5 * (iv.lo + iv.hi);
      f.half_width = iv.hi > iv.lo ? 0.5 * (iv.hi - iv.lo) : 1.0;
    }
    return f;
  };

  std::vector<BasisFunction> smooth{BasisFunction{}};
  if (spec.tensor_continuous) {
    for (const auto& e : tensor_exponents(continuous.size(), spec.max_degree)) {
      BasisFunction fn;
      for (std::size_t v = 0; v < continuous.size(); ++v) {
        if (e[v] > 0) fn.factors.push_back(monomial(continuous[v], e[v]));
      }
      smooth.push_back(std::move(fn));
    }
  } else {
    for (const auto var : continuous) {
      for (int e = 1; e <= spec.max_degree; ++e) smooth.push_back(BasisFunction{{monomial(var, e)}});
    }
  }

  std::vector<BasisFunction> out = smooth;
  if (!spec.include_binary_indicators || binary.empty()) return out;
  if (spec.additive_binary) {
    for (const auto var : binary) out.push_back(BasisFunction{{Factor{var, 1, true, 0.0, 1.0}}});
    return out;
  }
  if (binary.size() > 16) throw std::invalid_argument("too many binary variables for a tensor basis");
  for (std::uint32_t subset = 1; subset < (1U << binary.size()); ++subset) {
    for (const auto& base : smooth) {
      BasisFunction fn = base;
      for (std::size_t b = 0; b < binary.size(); ++b) {
        if ((subset >> b) & 1U) fn.factors.push_back(Factor{binary[b], 1, true, 0.0, 1.0});
      }
      out.push_back(std::move(fn));
    }
  }
  return out;
}

Eigen::MatrixXd evaluate_functions(std::span<const BasisFunction> functions, const Dataset& ds,
                                   std::span<const std::size_t> rows) {
  std::set<std::size_t> used;
  for (const auto& fn : functions) {
    for (const auto& f : fn.factors) used.insert(f.variable);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(functions.size()));
  std::vector<double> point(ds.cols(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto j : used) point[j] = ds.at(rows[i], j);
    for (std::size_t k = 0; k < functions.size(); ++k) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = functions[k].evaluate(point);
    }
  }
  return out;
}

RawBasis build_raw_basis(const BasisSpec& spec, const ResponsePattern& pattern, const Dataset& ds,
                         std::span<const std::size_t> rows, std::span<const Interval> domain) {
  if (pattern.width() != ds.cols()) throw std::invalid_argument("pattern width does not match dataset");
  RawBasis raw;
  raw.pattern = pattern;
  raw.functions = basis_functions(spec, pattern, ds.columns(), domain);
  raw.rows.assign(rows.begin(), rows.end());
  raw.design = evaluate_functions(raw.functions, ds, rows);
  return raw;
}

Eigen::MatrixXd roughness_gram(std::span<const BasisFunction> functions, std::span<const Interval> domain,
                               int quad_nodes) {
  const auto K = static_cast<Eigen::Index>(functions.size());
  std::vector<std::size_t> continuous;
  std::vector<std::size_t> binary;
  {
    std::set<std::size_t> c;
    std::set<std::size_t> b;
    for (const auto& fn : functions) {
      for (const auto& f : fn.factors) (f.indicator ? b : c).insert(f.variable);
    }
    continuous.assign(c.begin(), c.end());
    binary.assign(b.begin(), b.end());
  }
  for (const auto var : continuous) {
    if (var >= domain.size() || !(domain[var].hi > domain[var].lo)) {
      throw std::invalid_argument("empty roughness domain interval for variable " + std::to_string(var));
    }
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(K, K);
  const std::size_t m = continuous.size();
  if (m > 0) {
    const auto rule = gauss_legendre(quad_nodes);
    const auto n = static_cast<std::size_t>(quad_nodes);
    std::size_t points = 1;
    for (std::size_t d = 0; d < m; ++d) {
      points *= n;
      if (points > 50'000'000) throw std::invalid_argument("roughness quadrature grid too large");
    }
    // Position of each continuous factor inside `continuous`, per function.
    std::vector<std::vector<const Factor*>> by_var(functions.size(), std::vector<const Factor*>(m, nullptr));
    for (std::size_t k = 0; k < functions.size(); ++k) {
      for (const auto& f : functions[k].factors) {
        if (f.indicator) continue;
        const auto pos = static_cast<std::size_t>(
            std::lower_bound(continuous.begin(), continuous.end(), f.variable) - continuous.begin());
        by_var[k][pos] = &f;
      }
    }
    const std::size_t n_second = m * (m + 1) / 2;
    Eigen::MatrixXd block(static_cast<Eigen::Index>(n_second), K);
    std::vector<std::size_t> idx(m, 0);
    std::vector<double> x(m);
    std::vector<Monomial> parts(m);
    for (std::size_t p = 0; p < points; ++p) {
      double w = 1.0;
      for (std::size_t d = 0; d < m; ++d) {
        const auto iv = domain[continuous[d]];
        const double half = 0.5 * (iv.hi - iv.lo);
        x[d] = 0.5 * (iv.hi + iv.lo) + half * rule.nodes[idx[d]];
        w *= half * rule.weights[idx[d]];
      }
      for (std::size_t k = 0; k < functions.size(); ++k) {
        for (std::size_t d = 0; d < m; ++d) {
          parts[d] = by_var[k][d] ? monomial_derivatives(*by_var[k][d], x[d]) : Monomial{};
        }
        Eigen::Index row = 0;
        for (std::size_t a = 0; a < m; ++a) {
          for (std::size_t b = a; b < m; ++b) {
            double deriv = 1.0;
            for (std::size_t d = 0; d < m; ++d) {
              if (a == b) {
                deriv *= d == a ? parts[d].second : parts[d].value;
              } else {
                deriv *= (d == a || d == b) ? parts[d].first : parts[d].value;
              }
            }
            const double multinomial = a == b ? 1.0 : 2.0;
            block(row++, static_cast<Eigen::Index>(k)) = std::sqrt(w * multinomial) * deriv;
          }
        }
      }
      gram.noalias() += block.transpose() * block;
      for (std::size_t d = m; d-- > 0;) {
        if (++idx[d] < n) break;
        idx[d] = 0;
      }
    }
  }

  // Counting measure over the two levels of each binary variable.
  for (const auto var : binary) {
    std::vector<bool> has(functions.size(), false);
    for (std::size_t k = 0; k < functions.size(); ++k) {
      for (const auto& f : functions[k].factors) {
        if (f.indicator && f.variable == var) has[k] = true;
      }
    }
    for (Eigen::Index i = 0; i < K; ++i) {
      for (Eigen::Index j = 0; j < K; ++j) {
        if (!has[static_cast<std::size_t>(i)] && !has[static_cast<std::size_t>(j)]) gram(i, j) *= 2.0;
      }
    }
  }
  return 0.5 * (gram + gram.transpose());
}

BasisSet orthogonalize(const RawBasis& raw, const Eigen::MatrixXd& gram) {
  if (gram.rows() != gram.cols() || gram.rows() != raw.design.cols()) {
    throw std::invalid_argument("Gram matrix dimension does not match the basis");
  }
  if (!gram.allFinite()) throw std::runtime_error("eigen-decomposition failed: non-finite Gram entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigen-decomposition of the Gram failed");

  BasisSet out;
  out.pattern = raw.pattern;
  out.functions = raw.functions;
  out.rows = raw.rows;
  out.transform = eig.eigenvectors();
  out.gram_diag = eig.eigenvalues();
  // Null-space eigenvalues come back as rounding noise of either sign.
  const double top = out.gram_diag.size() ? out.gram_diag.cwiseAbs().maxCoeff() : 0.0;
  const double floor = std::max(1e-12, 1e-10 * top);
  for (auto& v : out.gram_diag) {
    if (v < floor) v = 0.0;
  }
  out.design = raw.design * out.transform;
  out.tolerance = tolerance_vector(out.gram_diag);
  return out;
}

Eigen::VectorXd tolerance_vector(const Eigen::VectorXd& gram_diag) {
  double min_positive = std::numeric_limits<double>::infinity();
  for (const auto v : gram_diag) {
    if (v < 0.0) throw std::invalid_argument("roughness values must be non-negative");
    if (v > 0.0) min_positive = std::min(min_positive, v);
  }
  const double fallback = std::isfinite(min_positive) ? std::sqrt(min_positive) : 1.0;
  Eigen::VectorXd t(gram_diag.size());
  for (Eigen::Index k = 0; k < gram_diag.size(); ++k) {
    t[k] = gram_diag[k] > 0.0 ? std::sqrt(gram_diag[k]) : fallback;
  }
  return t;
}

BasisSet build_pattern_basis(const BasisSpec& spec, const ResponsePattern& pattern, const Dataset& ds,
                             std::span<const std::size_t> rows, std::span<const Interval> domain) {
  auto raw = build_raw_basis(spec, pattern, ds, rows, domain);
  const auto gram = roughness_gram(raw.functions, domain, spec.quad_nodes);
  return orthogonalize(raw, gram);
}

void write_basis_manifest(const BasisSet& basis, const std::vector<Column>& columns, std::ostream& out) {
  out << "# pattern " << basis.pattern.to_string() << ", " << basis.functions.size() << " functions\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < basis.functions.size(); ++k) {
    out << k << '\t' << basis.functions[k].describe(columns);
    for (const auto& f : basis.functions[k].factors) {
      out << '\t' << columns.at(f.variable).name << ':';
      if (f.indicator) {
        out << "level=1";
      } else {
        out << "exp=" << f.exponent << ",center=" << f.center << ",half_width=" << f.half_width;
      }
    }
    out << '\n';
  }
}

}  // namespace ccmv
