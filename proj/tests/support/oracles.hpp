#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace oracle {

struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;  // classical sandwich A^-1 B A^-1 / n
  int iterations = 0;
};

/// Iteratively reweighted least squares for logistic regression. `x` already holds the
/// intercept column. Independent of the library's Newton solver on purpose.
LogisticFit irls_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Central differences with step h per coordinate.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& at, double h = 1e-6);

/// Jacobian of a vector map by central differences; column j is d f / d x_j.
Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& at, double h = 1e-6);

/// Closed-form second-order roughness inner product of two monomials over a box.
/// exps_* hold one exponent per continuous variable (same order as `box`); ind_* flag which
/// binary variables carry the factor 1{v = 1}. Binary levels are summed (counting measure).
double pen2_inner(const std::vector<int>& exps_a, const std::vector<int>& exps_b,
                  const std::vector<std::pair<double, double>>& box, const std::vector<bool>& ind_a = {},
                  const std::vector<bool>& ind_b = {});

/// max_i |a_i - b_i| / max(1, |b_i|).
double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace oracle
