#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ccmv/data_model.hpp"

namespace ccmv {

struct BasisSpec {
  int max_degree = 3;                     // per continuous variable
  bool include_binary_indicators = true;  // add 1{v = 1} for observed binary variables
  bool tensor_continuous = true;          // full tensor product across continuous variables
  bool additive_binary = true;            // indicators enter additively, not tensored
  bool rescale_continuous = true;         // evaluate monomials on the domain mapped to [-1, 1]
  int quad_nodes = 20;                    // Gauss-Legendre nodes per dimension for the roughness Gram
};

/// One factor of a basis function: either ((x - center) / half_width)^exponent or 1{x = 1}.
struct Factor {
  std::size_t variable = 0;
  int exponent = 0;
  bool indicator = false;
  double center = 0.0;
  double half_width = 1.0;
};

/// Product of factors; an empty product is the constant function.
struct BasisFunction {
  std::vector<Factor> factors;

  double evaluate(std::span<const double> point) const;
  std::string describe(const std::vector<Column>& columns) const;
};

struct RawBasis {
  ResponsePattern pattern;
  std::vector<BasisFunction> functions;
  std::vector<std::size_t> rows;
  Eigen::MatrixXd design;  // rows.size() x K
};

/// Pattern basis after diagonalising the roughness Gram.
struct BasisSet {
  ResponsePattern pattern;
  std::vector<BasisFunction> functions;  // raw functions
  std::vector<std::size_t> rows;         // dataset rows of `design`, ascending
  Eigen::MatrixXd design;                // raw design * transform
  Eigen::MatrixXd transform;             // K x K orthogonal
  Eigen::VectorXd gram_diag;
  Eigen::VectorXd tolerance;

  std::size_t size() const { return static_cast<std::size_t>(design.cols()); }
  /// Position of a dataset row inside `rows`; throws std::out_of_range.
  std::size_t position_of(std::size_t row) const;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_legendre(int n);

/// Basis functions for the variables observed in `pattern`: constant, tensor products
/// of monomials over continuous variables, then binary indicators. `domain` supplies
/// the affine map of each continuous variable when `spec.rescale_continuous` is set.
std::vector<BasisFunction> basis_functions(const BasisSpec& spec, const ResponsePattern& pattern,
                                           const std::vector<Column>& columns,
                                           std::span<const Interval> domain);

RawBasis build_raw_basis(const BasisSpec& spec, const ResponsePattern& pattern, const Dataset& ds,
                         std::span<const std::size_t> rows, std::span<const Interval> domain);

Eigen::MatrixXd evaluate_functions(std::span<const BasisFunction> functions, const Dataset& ds,
                                   std::span<const std::size_t> rows);

/// Gram matrix of the second-order roughness semi-inner product, integrating every
/// second partial derivative (mixed ones weighted 2) over the box `domain` (indexed by
/// variable). Indicator factors are summed over their two levels.
Eigen::MatrixXd roughness_gram(std::span<const BasisFunction> functions, std::span<const Interval> domain,
                               int quad_nodes);

/// Eigen-decomposition of the Gram; columns of the result's design span the raw design.
BasisSet orthogonalize(const RawBasis& raw, const Eigen::MatrixXd& gram);

/// sqrt(roughness) per function; zero-roughness functions borrow the smallest positive value.
Eigen::VectorXd tolerance_vector(const Eigen::VectorXd& gram_diag);

/// raw basis -> Gram -> orthogonalize -> tolerance.
BasisSet build_pattern_basis(const BasisSpec& spec, const ResponsePattern& pattern, const Dataset& ds,
                             std::span<const std::size_t> rows, std::span<const Interval> domain);

/// Text manifest: one line per raw function listing each factor's variable, exponent or
/// indicator level, and affine scaling.
void write_basis_manifest(const BasisSet& basis, const std::vector<Column>& columns, std::ostream& out);

}  // namespace ccmv
