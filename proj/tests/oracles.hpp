#pragma once

// Independent reference implementations used to check the library. They are
// deliberately naive: brute-force enumeration and straight-line arithmetic.

#include <algorithm>
#include <bit>
#include <functional>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/binomial.hpp>

#include "veriprobe/svm.hpp"

namespace oracle {

/// Exact dual optimum of a small box-constrained SVM dual by enumerating every
/// assignment of each multiplier to {lower bound, upper bound, free}.
inline double svm_dual_optimum(const veriprobe::SvmProblem& p) {
  const auto n = p.size();
  Eigen::MatrixXd Q(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      Q(i, j) = p.targets[i] * p.targets[j] * (p.instances.row(i).dot(p.instances.row(j)) + 1.0);

  double best = std::numeric_limits<double>::infinity();
  std::int64_t combos = 1;
  for (Eigen::Index i = 0; i < n; ++i) combos *= 3;
  for (std::int64_t code = 0; code < combos; ++code) {
    std::vector<int> state(static_cast<std::size_t>(n));
    std::int64_t c = code;
    for (auto& s : state) {
      s = static_cast<int>(c % 3);
      c /= 3;
    }
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] == 1) alpha[i] = p.upper_bound(i);
      if (state[static_cast<std::size_t>(i)] == 2) free.push_back(i);
    }
    if (!free.empty()) {
      const auto f = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd A(f, f);
      Eigen::VectorXd rhs(f);
      for (Eigen::Index a = 0; a < f; ++a) {
        rhs[a] = p.margins[free[static_cast<std::size_t>(a)]];
        for (Eigen::Index j = 0; j < n; ++j)
          if (state[static_cast<std::size_t>(j)] == 1) rhs[a] -= Q(free[static_cast<std::size_t>(a)], j) * alpha[j];
        for (Eigen::Index b = 0; b < f; ++b) A(a, b) = Q(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      lu.setThreshold(1e-10);
      if (lu.rank() < f) continue;  // some optimal point always has a nonsingular free block
      const Eigen::VectorXd x = lu.solve(rhs);
      bool feasible = true;
      for (Eigen::Index a = 0; a < f; ++a) {
        const auto j = free[static_cast<std::size_t>(a)];
        if (x[a] < -1e-12 || x[a] > p.upper_bound(j) + 1e-12) feasible = false;
        alpha[j] = std::clamp(x[a], 0.0, p.upper_bound(j));
      }
      if (!feasible) continue;
    }
    const double obj = 0.5 * alpha.dot(Q * alpha) - p.margins.dot(alpha);
    best = std::min(best, obj);
  }
  return best;
}

struct MeanDiffReference {
  std::vector<double> theta;
  std::vector<std::vector<double>> sigma;
  std::vector<double> w;
  double b = 0.0;
};

/// Straight-line mean-difference training: loops for means and covariances,
/// Gauss-Jordan elimination for the inverse.
inline MeanDiffReference mean_diff(const std::vector<std::vector<double>>& pos,
                                   const std::vector<std::vector<double>>& neg, double ridge) {
  const std::size_t d = pos[0].size();
  auto mean = [d](const std::vector<std::vector<double>>& X) {
    std::vector<double> m(d, 0.0);
    for (const auto& x : X)
      for (std::size_t k = 0; k < d; ++k) m[k] += x[k];
    for (auto& v : m) v /= static_cast<double>(X.size());
    return m;
  };
  const auto mp = mean(pos), mn = mean(neg);
  MeanDiffReference r;
  r.theta.resize(d);
  for (std::size_t k = 0; k < d; ++k) r.theta[k] = mp[k] - mn[k];

  r.sigma.assign(d, std::vector<double>(d, 0.0));
  auto scatter = [&](const std::vector<std::vector<double>>& X, const std::vector<double>& m) {
    for (const auto& x : X)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) r.sigma[i][j] += (x[i] - m[i]) * (x[j] - m[j]);
  };
  scatter(pos, mp);
  scatter(neg, mn);
  const double dof = static_cast<double>(pos.size() + neg.size() - 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) r.sigma[i][j] /= dof;
    r.sigma[i][i] += ridge;
  }

  // Gauss-Jordan on [sigma | I].
  std::vector<std::vector<double>> aug(d, std::vector<double>(2 * d, 0.0));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) aug[i][j] = r.sigma[i][j];
    aug[i][d + i] = 1.0;
  }
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t row = col + 1; row < d; ++row)
      if (std::abs(aug[row][col]) > std::abs(aug[piv][col])) piv = row;
    std::swap(aug[piv], aug[col]);
    const double pv = aug[col][col];
    for (auto& v : aug[col]) v /= pv;
    for (std::size_t row = 0; row < d; ++row) {
      if (row == col) continue;
      const double factor = aug[row][col];
      for (std::size_t j = 0; j < 2 * d; ++j) aug[row][j] -= factor * aug[col][j];
    }
  }
  r.w.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) r.w[i] += aug[i][d + j] * r.theta[j];

  auto mean_score = [&](const std::vector<std::vector<double>>& X) {
    double s = 0.0;
    for (const auto& x : X)
      for (std::size_t k = 0; k < d; ++k) s += x[k] * r.w[k];
    return s / static_cast<double>(X.size());
  };
  r.b = 0.5 * (mean_score(pos) + mean_score(neg));
  return r;
}

/// Multiclass MCC evaluated term by term from integer counts over the
/// predicted block `counts[t][p]` (no abstain column).
inline double mcc_direct(const std::vector<std::vector<std::int64_t>>& counts) {
  const std::size_t k = counts.size();
  std::int64_t c = 0, s = 0;
  std::vector<std::int64_t> t(k, 0), p(k, 0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      t[i] += counts[i][j];
      p[j] += counts[i][j];
      s += counts[i][j];
      if (i == j) c += counts[i][j];
    }
  long double num = static_cast<long double>(c) * s, pp = 0, tt = 0;
  for (std::size_t i = 0; i < k; ++i) {
    num -= static_cast<long double>(p[i]) * t[i];
    pp += static_cast<long double>(p[i]) * p[i];
    tt += static_cast<long double>(t[i]) * t[i];
  }
  const long double ss = static_cast<long double>(s) * s;
  const long double den = (ss - pp) * (ss - tt);
  if (den == 0) return 0.0;
  return static_cast<double>(num / std::sqrt(den));
}

/// P(X >= k) for X ~ Binomial(n, 1/2) from Boost's CDF.
inline double binomial_tail(unsigned n, unsigned k) {
  if (k == 0) return 1.0;
  boost::math::binomial_distribution<double> dist(n, 0.5);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(k - 1)));
}

struct Edge {
  int a, b;
  double w;
};

/// Minimum spanning tree by enumerating every (M-1)-edge subset.
inline std::vector<Edge> mst_enumerate(int m, const std::vector<Edge>& edges) {
  const auto e = static_cast<int>(edges.size());
  std::vector<Edge> best;
  double best_w = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << e); ++mask) {
    if (std::popcount(mask) != m - 1) continue;
    std::vector<int> parent(static_cast<std::size_t>(m));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[static_cast<std::size_t>(x)] == x ? x : find(parent[static_cast<std::size_t>(x)]); };
    bool acyclic = true;
    double w = 0.0;
    std::vector<Edge> chosen;
    for (int i = 0; i < e; ++i)
      if (mask & (1u << i)) {
        const int ra = find(edges[static_cast<std::size_t>(i)].a), rb = find(edges[static_cast<std::size_t>(i)].b);
        if (ra == rb) acyclic = false;
        parent[static_cast<std::size_t>(ra)] = rb;
        w += edges[static_cast<std::size_t>(i)].w;
        chosen.push_back(edges[static_cast<std::size_t>(i)]);
      }
    if (acyclic && w < best_w) {
      best_w = w;
      best = chosen;
    }
  }
  return best;
}

}  // namespace oracle
