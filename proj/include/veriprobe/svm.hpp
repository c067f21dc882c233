#pragma once

// Soft-margin linear SVM trained in the dual by coordinate descent.
//
// The intercept is folded into the kernel (k(x, x') = x.x' + 1), so the dual
// is a box-constrained QP with no equality constraint:
//
//   min_a  1/2 sum_ij a_i a_j y_i y_j (x_i.x_j + 1) - sum_i m_i a_i
//   s.t.   0 <= a_i <= C * w(y_i)
//
// with per-instance target margins m_i. At the optimum theta = sum a_i y_i x_i
// and b = sum a_i y_i.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "veriprobe/error.hpp"

namespace veriprobe {

struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
};

struct SvmProblem {
  Eigen::MatrixXd instances;  // n x d
  Eigen::VectorXd targets;    // n, entries -1 or +1
  Eigen::VectorXd margins;    // n, per-instance target margin
  double cost = 1.0;
  ClassWeights class_weights;

  Eigen::Index size() const { return instances.rows(); }
  Eigen::Index dim() const { return instances.cols(); }

  double upper_bound(Eigen::Index j) const {
    return cost * (targets[j] > 0 ? class_weights.positive : class_weights.negative);
  }
};

struct SvmSolution {
  Eigen::VectorXd theta;
  double intercept = 0.0;
  Eigen::VectorXd alphas;
  std::vector<Eigen::Index> support_index_set;
  double objective = 0.0;  // dual objective being minimised (see file comment)
  int iterations = 0;
  double max_violation = 0.0;
};

struct SvmOptions {
  double tol = 1e-4;
  int max_iter = 10000;
};

/// Inverse class-frequency weights, n / (2 n_class).
inline ClassWeights inverse_frequency_weights(const Eigen::VectorXd& targets) {
  const double n = static_cast<double>(targets.size());
  const double n_pos = static_cast<double>((targets.array() > 0).count());
  const double n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::input, "svm-core", "single-class input");
  return {n / (2.0 * n_pos), n / (2.0 * n_neg)};
}

/// Problem with unit margins and inverse-frequency class weights.
inline SvmProblem make_problem(Eigen::MatrixXd instances, Eigen::VectorXd targets, double cost = 1.0) {
  SvmProblem p;
  p.margins = Eigen::VectorXd::Ones(targets.size());
  p.class_weights = inverse_frequency_weights(targets);
  p.instances = std::move(instances);
  p.targets = std::move(targets);
  p.cost = cost;
  return p;
}

inline void validate(const SvmProblem& p) {
  const std::string module = "svm-core";
  const auto n = p.size();
  if (p.targets.size() != n || p.margins.size() != n)
    throw Error(ErrorKind::input, module, "instances, targets and margins disagree on n");
  if (n < 2) throw Error(ErrorKind::input, module, "need at least two instances");
  bool has_pos = false, has_neg = false;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (p.targets[j] == 1.0) has_pos = true;
    else if (p.targets[j] == -1.0) has_neg = true;
    else throw Error(ErrorKind::input, module, "targets must be -1 or +1");
  }
  if (!has_pos || !has_neg) throw Error(ErrorKind::input, module, "single-class input");
  if (!(p.cost > 0.0) || !std::isfinite(p.cost)) throw Error(ErrorKind::input, module, "cost must be positive");
  if (!(p.class_weights.positive > 0.0) || !(p.class_weights.negative > 0.0))
    throw Error(ErrorKind::input, module, "class weights must be positive");
  if (!p.instances.allFinite() || !p.margins.allFinite())
    throw Error(ErrorKind::input, module, "non-finite instance or margin");
}

inline double score(const Eigen::VectorXd& theta, double intercept, const Eigen::VectorXd& x) {
  if (theta.size() != x.size()) throw Error(ErrorKind::input, "svm-core", "score: dimension mismatch");
  return x.dot(theta) + intercept;
}

namespace svm_detail {

inline double projected_gradient(double g, double alpha, double upper) {
  if (alpha <= 0.0) return std::min(g, 0.0);
  if (alpha >= upper) return std::max(g, 0.0);
  return g;
}

// Deterministic Fisher-Yates driven by a fixed 64-bit LCG.
inline void permute(std::vector<Eigen::Index>& idx, std::uint64_t& state) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    const auto j = static_cast<std::size_t>((state >> 33) % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace svm_detail

/// Max projected-gradient violation of `alphas` on `problem`; zero at the optimum.
inline double kkt_residual(const SvmProblem& p, const Eigen::VectorXd& alphas) {
  const Eigen::VectorXd ya = alphas.cwiseProduct(p.targets);
  const Eigen::VectorXd theta = p.instances.transpose() * ya;
  const double b = ya.sum();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double g = p.targets[j] * (p.instances.row(j).dot(theta) + b) - p.margins[j];
    worst = std::max(worst, std::abs(svm_detail::projected_gradient(g, alphas[j], p.upper_bound(j))));
  }
  return worst;
}

inline SvmSolution solve_svm(const SvmProblem& p, const SvmOptions& options = {}) {
  validate(p);
  if (!(options.tol > 0.0)) throw Error(ErrorKind::input, "svm-core", "tol must be positive");

  const auto n = p.size();
  const auto d = p.dim();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  double b = 0.0;

  Eigen::VectorXd qdiag(n);
  for (Eigen::Index j = 0; j < n; ++j) qdiag[j] = p.instances.row(j).squaredNorm() + 1.0;

  std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  std::uint64_t rng_state = 0x9E3779B97F4A7C15ULL;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  double pg_max_old = kInf;
  double pg_min_old = -kInf;
  double violation = kInf;
  int iter = 0;
  // Budget in full-data sweeps: passes over a shrunk active set cost proportionally less.
  const double budget = static_cast<double>(options.max_iter) * static_cast<double>(n);
  double visits = 0.0;
  bool exhausted = false;

  for (;; ++iter) {
    if (visits >= budget) {
      exhausted = true;
      break;
    }
    visits += static_cast<double>(active.size());
    svm_detail::permute(active, rng_state);
    double pg_max_new = -kInf;
    double pg_min_new = kInf;

    for (std::size_t s = 0; s < active.size();) {
      const auto j = active[s];
      const double y = p.targets[j];
      const double upper = p.upper_bound(j);
      const double g = y * (p.instances.row(j).dot(theta) + b) - p.margins[j];

      // Shrinking: drop variables pinned at a bound whose gradient points outward.
      double pg = 0.0;
      if (alpha[j] <= 0.0) {
        if (g > pg_max_old) {
          active[s] = active.back();
          active.pop_back();
          continue;
        }
        pg = std::min(g, 0.0);
      } else if (alpha[j] >= upper) {
        if (g < pg_min_old) {
          active[s] = active.back();
          active.pop_back();
          continue;
        }
        pg = std::max(g, 0.0);
      } else {
        pg = g;
      }
      pg_max_new = std::max(pg_max_new, pg);
      pg_min_new = std::min(pg_min_new, pg);

      if (pg != 0.0) {
        const double old = alpha[j];
        alpha[j] = std::clamp(old - g / qdiag[j], 0.0, upper);
        const double step = (alpha[j] - old) * y;
        if (step != 0.0) {
          theta.noalias() += step * p.instances.row(j).transpose();
          b += step;
        }
      }
      ++s;
    }

    if (active.empty()) pg_max_new = pg_min_new = 0.0;
    violation = std::max(pg_max_new, -pg_min_new);
    if (violation <= options.tol) {
      if (static_cast<Eigen::Index>(active.size()) == n) break;
      // Converged on the shrunk set: restore everything and re-check.
      active.resize(static_cast<std::size_t>(n));
      std::iota(active.begin(), active.end(), Eigen::Index{0});
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max_new > 0.0 ? pg_max_new : kInf;
    pg_min_old = pg_min_new < 0.0 ? pg_min_new : -kInf;
  }

  if (exhausted) {
    violation = kkt_residual(p, alpha);
    if (violation > options.tol)
      throw ConvergenceError("svm-core", "dual coordinate descent did not converge", violation);
  }

  SvmSolution sol;
  // Recompute from alpha so theta is exactly the support-vector expansion.
  const Eigen::VectorXd ya = alpha.cwiseProduct(p.targets);
  sol.theta = p.instances.transpose() * ya;
  sol.intercept = ya.sum();
  sol.alphas = std::move(alpha);
  for (Eigen::Index j = 0; j < n; ++j)
    if (sol.alphas[j] > 0.0) sol.support_index_set.push_back(j);
  sol.objective = 0.5 * (sol.theta.squaredNorm() + sol.intercept * sol.intercept) - p.margins.dot(sol.alphas);
  sol.iterations = iter;
  sol.max_violation = kkt_residual(p, sol.alphas);
  return sol;
}

/// Direction nu = sum over support vectors of alpha_j y_j x_j.
inline Eigen::VectorXd extract_direction(const SvmSolution& solution, const SvmProblem& problem) {
  if (solution.alphas.size() != problem.size() || problem.targets.size() != problem.size())
    throw Error(ErrorKind::input, "svm-core", "extract_direction: solution does not match problem");
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(problem.dim());
  for (Eigen::Index j = 0; j < problem.size(); ++j)
    if (solution.alphas[j] > 0.0) nu += solution.alphas[j] * problem.targets[j] * problem.instances.row(j).transpose();
  return nu;
}

/// Per-dimension affine map to zero mean and unit variance.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer identity(Eigen::Index d) {
    return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  }

  static Standardizer fit(const Eigen::MatrixXd& rows) {
    if (rows.rows() == 0) throw Error(ErrorKind::input, "svm-core", "standardizer: no rows");
    Standardizer s;
    s.mean = rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
    s.scale = (centered.colwise().squaredNorm() / static_cast<double>(rows.rows())).cwiseSqrt().transpose();
    for (Eigen::Index k = 0; k < s.scale.size(); ++k)
      if (!(s.scale[k] > 1e-12)) s.scale[k] = 1.0;
    return s;
  }

  Eigen::Index dim() const { return mean.size(); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != dim()) throw Error(ErrorKind::input, "svm-core", "standardizer: dimension mismatch");
    return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

}  // namespace veriprobe
