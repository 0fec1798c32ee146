#include "ccmv/odds_fit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace ccmv {

std::string to_string(LossKind kind) { return kind == LossKind::tailored ? "tailored" : "entropy"; }

PairSample PairSample::subset(std::span<const std::size_t> positions, double new_denom) const {
  PairSample out;
  out.pattern = pattern;
  const auto n = static_cast<Eigen::Index>(positions.size());
  out.design.resize(n, design.cols());
  out.in_complete.resize(n);
  out.in_pattern.resize(n);
  out.row_ids.reserve(positions.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto p = static_cast<Eigen::Index>(positions[static_cast<std::size_t>(i)]);
    out.design.row(i) = design.row(p);
    out.in_complete[i] = in_complete[p];
    out.in_pattern[i] = in_pattern[p];
    out.row_ids.push_back(row_ids[static_cast<std::size_t>(p)]);
  }
  out.denom = new_denom;
  return out;
}

PairSample make_pair_sample(const BasisSet& basis, const Dataset& ds) {
  PairSample s;
  s.pattern = basis.pattern;
  s.design = basis.design;
  const auto n = static_cast<Eigen::Index>(basis.rows.size());
  s.in_complete = Eigen::ArrayXd::Zero(n);
  s.in_pattern = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& m = ds.mask(basis.rows[static_cast<std::size_t>(i)]);
    if (m.is_complete()) {
      s.in_complete[i] = 1.0;
    } else if (m == basis.pattern) {
      s.in_pattern[i] = 1.0;
    }
  }
  s.row_ids = basis.rows;
  s.denom = static_cast<double>(ds.rows());
  return s;
}

LossValue tailored_loss(const Eigen::VectorXd& alpha, const PairSample& s, bool with_hessian) {
  LossValue out;
  const Eigen::ArrayXd eta = (s.design * alpha).array();
  const Eigen::ArrayXd active = s.in_complete + s.in_pattern;
  if (((eta > kLinearPredictorGuard) && (active > 0.0)).any()) {
    out.diverging = true;
    out.value = std::numeric_limits<double>::infinity();
    out.gradient = Eigen::VectorXd::Zero(alpha.size());
    return out;
  }
  const Eigen::ArrayXd odds = (s.in_complete > 0.0).select(eta.exp(), 0.0);
  const double inv_n = 1.0 / s.denom;
  out.value = inv_n * ((s.in_complete * odds).sum() - (s.in_pattern * eta).sum());
  const Eigen::VectorXd resid = (s.in_complete * odds - s.in_pattern).matrix();
  out.gradient = inv_n * (s.design.transpose() * resid);
  if (with_hessian) {
    const Eigen::ArrayXd w = s.in_complete * odds;
    out.hessian = inv_n * (s.design.transpose() * (s.design.array().colwise() * w).matrix());
  }
  return out;
}

LossValue entropy_loss(const Eigen::VectorXd& alpha, const PairSample& s, bool with_hessian) {
  LossValue out;
  const Eigen::ArrayXd eta = (s.design * alpha).array();
  const Eigen::ArrayXd active = ((s.in_complete + s.in_pattern) > 0.0).cast<double>();
  if (((eta.abs() > kLinearPredictorGuard) && (active > 0.0)).any()) {
    out.diverging = true;
    out.value = std::numeric_limits<double>::infinity();
    out.gradient = Eigen::VectorXd::Zero(alpha.size());
    return out;
  }
  // log(1 + e^x) without overflow
  const Eigen::ArrayXd softplus = eta.max(0.0) + (-eta.abs()).exp().log1p();
  const Eigen::ArrayXd prob = 1.0 / (1.0 + (-eta).exp());
  const double inv_n = 1.0 / s.denom;
  out.value = inv_n * (active * softplus - s.in_pattern * eta).sum();
  const Eigen::VectorXd resid = (active * prob - s.in_pattern).matrix();
  out.gradient = inv_n * (s.design.transpose() * resid);
  if (with_hessian) {
    const Eigen::ArrayXd w = active * prob * (1.0 - prob);
    out.hessian = inv_n * (s.design.transpose() * (s.design.array().colwise() * w).matrix());
  }
  return out;
}

LossValue evaluate_loss(LossKind kind, const Eigen::VectorXd& alpha, const PairSample& s, bool with_hessian) {
  return kind == LossKind::tailored ? tailored_loss(alpha, s, with_hessian) : entropy_loss(alpha, s, with_hessian);
}

PenaltyConfig PenaltyConfig::from_basis(const BasisSet& basis, double lambda, double gamma) {
  return PenaltyConfig{lambda, gamma, basis.tolerance, basis.gram_diag};
}

void PenaltyConfig::validate(std::size_t K) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (static_cast<std::size_t>(tolerance.size()) != K || static_cast<std::size_t>(gram_diag.size()) != K) {
    throw std::invalid_argument("penalty dimensions do not match the basis size");
  }
  if ((tolerance.array() <= 0.0).any()) throw std::invalid_argument("tolerances must be positive");
  if ((gram_diag.array() < 0.0).any()) throw std::invalid_argument("roughness diagonal must be non-negative");
}

namespace {

class PenalizedObjective {
 public:
  PenalizedObjective(LossKind kind, const PairSample& s, const PenaltyConfig& cfg)
      : kind_(kind), s_(s), l1_(cfg.lambda * cfg.gamma * cfg.tolerance.array()),
        quad_(cfg.lambda * (1.0 - cfg.gamma) * cfg.gram_diag.array()) {}

  // Loss plus quadratic penalty, with gradient.
  LossValue smooth(const Eigen::VectorXd& a) const {
    auto lv = evaluate_loss(kind_, a, s_);
    if (lv.diverging) return lv;
    lv.value += (quad_ * a.array().square()).sum();
    lv.gradient.array() += 2.0 * quad_ * a.array();
    return lv;
  }

  double l1(const Eigen::VectorXd& a) const { return (l1_ * a.array().abs()).sum(); }

  Eigen::VectorXd prox(const Eigen::VectorXd& v, double step) const {
    const Eigen::ArrayXd thr = step * l1_;
    return (v.array().sign() * (v.array().abs() - thr).max(0.0)).matrix();
  }

  // Stationarity violation given the smooth gradient at a.
  Eigen::VectorXd kkt(const Eigen::VectorXd& a, const Eigen::VectorXd& smooth_grad) const {
    Eigen::VectorXd r(a.size());
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (a[k] != 0.0) {
        r[k] = std::abs(smooth_grad[k] + l1_[k] * (a[k] > 0.0 ? 1.0 : -1.0));
      } else {
        r[k] = std::max(0.0, std::abs(smooth_grad[k]) - l1_[k]);
      }
    }
    return r;
  }

 private:
  LossKind kind_;
  const PairSample& s_;
  Eigen::ArrayXd l1_;
  Eigen::ArrayXd quad_;
};

double initial_step(const PairSample& s, const Eigen::VectorXd& alpha, const PenaltyConfig& cfg) {
  // Reciprocal of a trace bound on the Hessian of the smooth part at alpha.
  const Eigen::ArrayXd eta = (s.design * alpha).array().min(kLinearPredictorGuard);
  const Eigen::ArrayXd w = s.in_complete * eta.exp() + 0.25 * s.in_pattern;
  const double trace = (w * s.design.rowwise().squaredNorm().array()).sum() / s.denom +
                       2.0 * cfg.lambda * (1.0 - cfg.gamma) * cfg.gram_diag.sum();
  return trace > 0.0 ? 1.0 / trace : 1.0;
}

struct SolveState {
  Eigen::VectorXd x;
  LossValue fx;
  double F = 0.0;
  int iterations = 0;
  bool converged = false;
};

SolveState start_point(const PenalizedObjective& obj, Eigen::Index K, const SolverOptions& opts) {
  SolveState st;
  st.x = Eigen::VectorXd::Zero(K);
  if (opts.warm_start && opts.warm_start->size() == K) st.x = *opts.warm_start;
  st.fx = obj.smooth(st.x);
  if (st.fx.diverging) {
    st.x.setZero();
    st.fx = obj.smooth(st.x);
  }
  if (!std::isfinite(st.fx.value)) throw std::runtime_error("penalized objective is not finite at the start point");
  st.F = st.fx.value + obj.l1(st.x);
  return st;
}

bool small_change(double F_prev, double F, const SolverOptions& opts) {
  return std::abs(F_prev - F) <= opts.rel_tol * std::max(1.0, std::abs(F));
}

void solve_proximal_gradient(const PenalizedObjective& obj, const PairSample& s, const PenaltyConfig& cfg,
                             const SolverOptions& opts, SolveState& st) {
  Eigen::VectorXd& x = st.x;
  LossValue& fx = st.fx;
  double& F = st.F;
  Eigen::VectorXd y = x;
  LossValue fy = fx;
  double momentum = 1.0;
  double step = initial_step(s, x, cfg);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    Eigen::VectorXd z;
    LossValue fz;
    int backtracks = 0;
    while (true) {
      z = obj.prox(y - step * fy.gradient, step);
      fz = obj.smooth(z);
      if (!fz.diverging && std::isfinite(fz.value)) {
        const Eigen::VectorXd d = z - y;
        const double model = fy.value + fy.gradient.dot(d) + d.squaredNorm() / (2.0 * step);
        if (fz.value <= model + 1e-14 * std::abs(fy.value)) break;
      }
      step *= 0.5;
      if (++backtracks > opts.max_backtracks) break;
    }
    if (backtracks > opts.max_backtracks) {
      if (y != x) {
        // Extrapolated point was unusable; retry from the last accepted iterate.
        y = x;
        fy = fx;
        momentum = 1.0;
        step = initial_step(s, x, cfg);
        continue;
      }
      throw std::runtime_error("penalized objective is not finite after maximum backtracking");
    }

    const double Fz = fz.value + obj.l1(z);
    if (Fz > F) {
      if (y != x) {
        // Restart on objective increase.
        y = x;
        fy = fx;
        momentum = 1.0;
        continue;
      }
      // A plain proximal step from x cannot increase F beyond rounding.
      if (Fz > F + 1e-13 * std::max(1.0, std::abs(F))) break;
    }

    const Eigen::VectorXd x_prev = x;
    const double F_prev = F;
    x = z;
    fx = fz;
    F = std::min(Fz, F);

    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    if ((y - z).dot(z - x_prev) > 0.0) {
      momentum = 1.0;
      y = x;
      fy = fx;
    } else {
      y = z + ((momentum - 1.0) / next) * (z - x_prev);
      momentum = next;
      fy = obj.smooth(y);
      if (fy.diverging) {
        y = x;
        fy = fx;
        momentum = 1.0;
      }
    }
    step *= 1.1;

    if (small_change(F_prev, F, opts) &&
        (x - x_prev).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff()) &&
        obj.kkt(x, fx.gradient).maxCoeff() <= opts.kkt_tol) {
      st.converged = true;
      ++it;
      break;
    }
  }
  st.iterations = it;
}

// Feature-sign search on 0.5 w'Hw - b'w + sum l1_k |w_k|, started from w. Each step solves the
// equality-constrained problem on the active set with signs fixed and keeps the best point on
// the segment towards it, so the objective never increases.
Eigen::VectorXd feature_sign(const Eigen::MatrixXd& H, const Eigen::VectorXd& b, const Eigen::ArrayXd& l1,
                             Eigen::VectorXd w) {
  const auto K = w.size();
  const auto objective = [&](const Eigen::VectorXd& v) {
    return 0.5 * v.dot(H * v) - b.dot(v) + (l1 * v.array().abs()).sum();
  };
  const auto tol = [&](Eigen::Index k, const Eigen::VectorXd& Hv) {
    return 1e-9 * (std::abs(b[k]) + std::abs(Hv[k]) + l1[k]) + 1e-300;
  };
  Eigen::VectorXd theta = w.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  for (Eigen::Index step = 0; step < 10 * K + 50; ++step) {
    const Eigen::VectorXd Hw = H * w;
    const Eigen::VectorXd grad = Hw - b;
    bool active_optimal = true;
    for (Eigen::Index k = 0; k < K && active_optimal; ++k)
      if (theta[k] != 0.0 && std::abs(grad[k] + l1[k] * theta[k]) > tol(k, Hw)) active_optimal = false;
    if (active_optimal) {
      Eigen::Index worst = -1;
      double excess = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) {
        if (theta[k] != 0.0) continue;
        const double e = std::abs(grad[k]) - l1[k] - tol(k, Hw);
        if (e > excess) {
          excess = e;
          worst = k;
        }
      }
      if (worst < 0) return w;
      theta[worst] = grad[worst] > 0.0 ? -1.0 : 1.0;
    }

    std::vector<Eigen::Index> act;
    for (Eigen::Index k = 0; k < K; ++k)
      if (theta[k] != 0.0) act.push_back(k);
    const auto m = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd Ha(m, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      rhs[i] = b[act[static_cast<std::size_t>(i)]] - l1[act[static_cast<std::size_t>(i)]] * theta[act[static_cast<std::size_t>(i)]];
      for (Eigen::Index j = 0; j < m; ++j) Ha(i, j) = H(act[static_cast<std::size_t>(i)], act[static_cast<std::size_t>(j)]);
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(Ha);
    const Eigen::VectorXd sol = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !sol.allFinite()) return w;
    Eigen::VectorXd target = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < m; ++i) target[act[static_cast<std::size_t>(i)]] = sol[i];

    // Candidates: the target and every point on the segment where an active coefficient hits zero.
    Eigen::VectorXd best = w;
    double best_value = objective(w);
    const auto consider = [&](const Eigen::VectorXd& c) {
      const double v = objective(c);
      if (v < best_value) {
        best_value = v;
        best = c;
      }
    };
    consider(target);
    for (const auto k : act) {
      if (w[k] == 0.0 || (target[k] > 0.0) == (w[k] > 0.0)) continue;
      const double tau = w[k] / (w[k] - target[k]);
      Eigen::VectorXd c = w + tau * (target - w);
      c[k] = 0.0;
      consider(c);
    }
    if (best == w) {
      // No progress from this active set: drop the coefficients that sit at zero and retry once.
      bool dropped = false;
      for (const auto k : act)
        if (w[k] == 0.0) {
          theta[k] = 0.0;
          dropped = true;
        }
      if (!dropped) return w;
      continue;
    }
    w = best;
    theta = w.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  }
  return w;
}

// Minimises g'(w - x) + 0.5 (w - x)' H (w - x) + sum l1_k |w_k| over w.
Eigen::VectorXd solve_l1_quadratic(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                                   const Eigen::ArrayXd& l1) {
  const auto K = x.size();
  const Eigen::VectorXd b = H * x - g;
  if ((l1 == 0.0).all()) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd w = ldlt.solve(b);
    if (ldlt.info() == Eigen::Success && w.allFinite()) return w;
  }
  Eigen::VectorXd w = x;
  Eigen::VectorXd Hw = H * w;
  auto optimal = [&](const Eigen::VectorXd& cand, const Eigen::VectorXd& Hc) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const double r = b[k] - Hc[k];
      const double scale = 1e-12 * (std::abs(b[k]) + std::abs(Hc[k]) + l1[k]) + 1e-300;
      if (cand[k] != 0.0) {
        if (std::abs(r - l1[k] * (cand[k] > 0.0 ? 1.0 : -1.0)) > 1e3 * scale) return false;
      } else if (std::abs(r) > l1[k] + 1e3 * scale) {
        return false;
      }
    }
    return true;
  };
  for (int round = 0; round < 40; ++round) {
    for (int sweep = 0; sweep < 50; ++sweep) {
      double moved = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) {
        const double hkk = H(k, k);
        const double rho = b[k] - Hw[k] + hkk * w[k];
        double wk = 0.0;
        if (rho > l1[k]) {
          wk = (rho - l1[k]) / hkk;
        } else if (rho < -l1[k]) {
          wk = (rho + l1[k]) / hkk;
        }
        const double delta = wk - w[k];
        if (delta != 0.0) {
          Hw.noalias() += delta * H.col(k);
          w[k] = wk;
          moved = std::max(moved, std::abs(delta) * std::sqrt(hkk));
        }
      }
      if (moved <= 1e-14 * (1.0 + std::sqrt(std::abs(w.dot(Hw))))) break;
    }
    // Polish: solve exactly on the current support with its signs fixed.
    std::vector<Eigen::Index> support;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (w[k] != 0.0) support.push_back(k);
    }
    if (!support.empty()) {
      const auto m = static_cast<Eigen::Index>(support.size());
      Eigen::MatrixXd Hs(m, m);
      Eigen::VectorXd rhs(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto ki = support[static_cast<std::size_t>(i)];
        rhs[i] = b[ki] - l1[ki] * (w[ki] > 0.0 ? 1.0 : -1.0);
        for (Eigen::Index j = 0; j < m; ++j) Hs(i, j) = H(ki, support[static_cast<std::size_t>(j)]);
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs);
      const Eigen::VectorXd ws = ldlt.solve(rhs);
      bool signs_kept = ldlt.info() == Eigen::Success && ws.allFinite();
      for (Eigen::Index i = 0; signs_kept && i < m; ++i) {
        const auto ki = support[static_cast<std::size_t>(i)];
        signs_kept = (ws[i] > 0.0) == (w[ki] > 0.0) && ws[i] != 0.0;
      }
      if (signs_kept) {
        Eigen::VectorXd cand = Eigen::VectorXd::Zero(K);
        for (Eigen::Index i = 0; i < m; ++i) cand[support[static_cast<std::size_t>(i)]] = ws[i];
        const Eigen::VectorXd Hc = H * cand;
        if (optimal(cand, Hc)) return cand;
      }
    } else if (optimal(w, Hw)) {
      return w;
    }
    if (optimal(w, Hw)) return w;
  }
  return feature_sign(H, b, l1, w);
}

void solve_proximal_newton(LossKind kind, const PenalizedObjective& obj, const PairSample& s,
                           const PenaltyConfig& cfg, const SolverOptions& opts, SolveState& st) {
  const auto K = st.x.size();
  const Eigen::ArrayXd l1 = cfg.lambda * cfg.gamma * cfg.tolerance.array();
  const Eigen::ArrayXd quad2 = 2.0 * cfg.lambda * (1.0 - cfg.gamma) * cfg.gram_diag.array();
  int guard_streak = 0;
  double last_direction = 0.0;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    Eigen::MatrixXd H = evaluate_loss(kind, st.x, s, true).hessian;
    H.diagonal().array() += quad2;
    // Levenberg damping keeps the subproblem strictly convex when odds underflow.
    const double damp = 1e-12 * std::max(H.diagonal().maxCoeff(), 1e-300);
    H.diagonal().array() += damp;
    const Eigen::VectorXd w = solve_l1_quadratic(H, st.fx.gradient, st.x, l1);
    const Eigen::VectorXd d = w - st.x;
    const double l1_x = obj.l1(st.x);
    const double decrease = st.fx.gradient.dot(d) + obj.l1(w) - l1_x;
    last_direction = d.cwiseAbs().maxCoeff();
    if (!(decrease < 0.0) || last_direction == 0.0) break;

    double t = 1.0;
    bool accepted = false;
    bool hit_guard = false;
    SolveState next;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, t *= 0.5) {
      next.x = st.x + t * d;
      next.fx = obj.smooth(next.x);
      if (next.fx.diverging) {
        hit_guard = true;
        continue;
      }
      next.F = next.fx.value + obj.l1(next.x);
      if (next.F <= st.F + 1e-4 * t * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    guard_streak = hit_guard ? guard_streak + 1 : 0;
    // Repeatedly running into the overflow guard means the minimiser is at infinity.
    if (guard_streak >= 20) {
      st.x = next.x;
      st.fx = next.fx;
      st.F = next.F;
      ++it;
      st.iterations = it;
      st.converged = false;
      return;
    }
    // Steps below rounding cannot make progress; the fallback below decides convergence.
    if ((t * d).cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, st.x.cwiseAbs().maxCoeff())) break;
    const double F_prev = st.F;
    const double step_norm = last_direction;
    st.x = next.x;
    st.fx = next.fx;
    st.F = std::min(next.F, F_prev);
    if (small_change(F_prev, st.F, opts) && step_norm <= 1e-6 * std::max(1.0, st.x.cwiseAbs().maxCoeff()) &&
        obj.kkt(st.x, st.fx.gradient).maxCoeff() <= opts.kkt_tol) {
      st.converged = true;
      ++it;
      break;
    }
  }
  st.iterations = it;
  // No further decrease is representable and the optimum is certified. A Newton direction
  // that is still large means the loss is flattening out towards a minimiser at infinity.
  if (!st.converged && guard_streak == 0 && it < opts.max_iter && K > 0 &&
      last_direction <= 1e-6 * std::max(1.0, st.x.cwiseAbs().maxCoeff()) &&
      obj.kkt(st.x, st.fx.gradient).maxCoeff() <= opts.kkt_tol) {
    st.converged = true;
  }
}

}  // namespace

OddsFit fit_penalized(LossKind kind, const PairSample& s, const PenaltyConfig& cfg, const SolverOptions& opts) {
  const auto K = static_cast<Eigen::Index>(s.size());
  cfg.validate(static_cast<std::size_t>(K));
  const PenalizedObjective obj(kind, s, cfg);
  SolveState st = start_point(obj, K, opts);
  if (opts.kind == SolverKind::proximal_gradient) {
    solve_proximal_gradient(obj, s, cfg, opts, st);
  } else {
    solve_proximal_newton(kind, obj, s, cfg, opts, st);
  }

  OddsFit fit;
  fit.pattern = s.pattern;
  fit.alpha = st.x;
  fit.objective = st.F;
  fit.iterations = st.iterations;
  fit.kkt_residual = K > 0 ? obj.kkt(st.x, st.fx.gradient).maxCoeff() : 0.0;
  fit.converged = st.converged && fit.kkt_residual <= opts.kkt_tol;
  fit.imbalance = empirical_imbalance(st.x, s);
  return fit;
}

KktReport kkt_certificate(LossKind kind, const Eigen::VectorXd& alpha, const PairSample& s,
                          const PenaltyConfig& cfg) {
  cfg.validate(s.size());
  const PenalizedObjective obj(kind, s, cfg);
  const auto lv = obj.smooth(alpha);
  KktReport rep;
  if (lv.diverging) {
    rep.residual = Eigen::VectorXd::Constant(alpha.size(), std::numeric_limits<double>::infinity());
  } else {
    rep.residual = obj.kkt(alpha, lv.gradient);
  }
  rep.max_residual = rep.residual.size() ? rep.residual.maxCoeff() : 0.0;
  return rep;
}

Eigen::VectorXd empirical_imbalance(const Eigen::VectorXd& alpha, const PairSample& s) {
  const auto lv = tailored_loss(alpha, s);
  if (lv.diverging) return Eigen::VectorXd::Constant(alpha.size(), std::numeric_limits<double>::infinity());
  return lv.gradient.cwiseAbs();
}

double imbalance_bound_excess(const OddsFit& fit, const PenaltyConfig& cfg) {
  const Eigen::ArrayXd bound = cfg.lambda * cfg.gamma * cfg.tolerance.array() +
                               2.0 * cfg.lambda * (1.0 - cfg.gamma) * cfg.gram_diag.array() * fit.alpha.array().abs();
  return (fit.imbalance.array() - bound).maxCoeff();
}

void write_odds_fit(const OddsFit& fit, std::ostream& out) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(17) << "pattern=" << fit.pattern.to_string() << " converged=" << fit.converged
      << " iterations=" << fit.iterations << " objective=" << fit.objective << " kkt=" << fit.kkt_residual
      << " alpha=";
  for (Eigen::Index k = 0; k < fit.alpha.size(); ++k) out << (k ? "," : "") << fit.alpha[k];
  out << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace ccmv
