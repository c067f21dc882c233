#pragma once

// Multiple-instance training: the sMIL first stage and the two-stage
// sparse-aware procedure that relabels positive-bag instances by score
// quantile and intra-bag mask before a final single-instance SVM fit.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "veriprobe/error.hpp"
#include "veriprobe/svm.hpp"

namespace veriprobe {

struct Bag {
  Eigen::MatrixXd instances;  // L x d
  int label = 0;              // 1 positive, 0 negative
  Eigen::VectorXi mask;       // L entries of {0,1}

  Eigen::Index size() const { return instances.rows(); }
  Eigen::Index dim() const { return instances.cols(); }
};

struct MilConfig {
  double eta = 0.1;
  double cost = 1.0;
  double tol = 1e-4;
  int max_iter = 10000;

  SvmOptions svm_options() const { return {tol, max_iter}; }
};

inline void validate(const Bag& bag) {
  const std::string module = "mil";
  if (bag.size() < 1) throw Error(ErrorKind::input, module, "empty bag");
  if (bag.mask.size() != bag.size()) throw Error(ErrorKind::input, module, "mask length differs from bag size");
  if (bag.label != 0 && bag.label != 1) throw Error(ErrorKind::input, module, "bag label must be 0 or 1");
  for (Eigen::Index i = 0; i < bag.mask.size(); ++i)
    if (bag.mask[i] != 0 && bag.mask[i] != 1) throw Error(ErrorKind::input, module, "mask entries must be 0 or 1");
  if (bag.label == 1 && bag.mask.sum() == 0)
    throw Error(ErrorKind::input, module, "positive bag has no masked instance");
}

inline void validate(const MilConfig& config) {
  if (!(config.eta > 0.0 && config.eta <= 1.0)) throw Error(ErrorKind::input, "mil", "eta must lie in (0,1]");
  if (!(config.cost > 0.0)) throw Error(ErrorKind::input, "mil", "cost must be positive");
}

/// Nearest-rank (inclusive) quantile: the ceil(p*n)-th smallest value, with
/// p = 0 giving the minimum and p = 1 the maximum.
inline double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::input, "mil", "quantile of empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::input, "mil", "quantile level outside [0,1]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  // Small slack so that e.g. p = 1 - 0.1 does not round up past an exact rank.
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

inline double bag_score(const Eigen::VectorXd& theta, double intercept, const Bag& bag) {
  if (bag.dim() != theta.size()) throw Error(ErrorKind::input, "mil", "bag_score: dimension mismatch");
  if (bag.size() < 1) throw Error(ErrorKind::input, "mil", "bag_score: empty bag");
  return (bag.instances * theta).maxCoeff() + intercept;
}

inline double bag_score(const SvmSolution& solution, const Bag& bag) {
  return bag_score(solution.theta, solution.intercept, bag);
}

namespace mil_detail {

inline Eigen::Index check_sides(std::span<const Bag> positive, std::span<const Bag> negative) {
  if (positive.empty() || negative.empty())
    throw Error(ErrorKind::input, "mil", "need at least one positive and one negative bag");
  const auto d = positive.front().dim();
  for (const auto* side : {&positive, &negative})
    for (const auto& bag : *side) {
      validate(bag);
      if (bag.dim() != d) throw Error(ErrorKind::input, "mil", "bags disagree on dimension");
    }
  return d;
}

inline Eigen::Index instance_count(std::span<const Bag> bags) {
  Eigen::Index n = 0;
  for (const auto& b : bags) n += b.size();
  return n;
}

}  // namespace mil_detail

/// Single-instance problem of the sMIL stage: one mean instance per positive
/// bag with margin (2 - L)/L, every negative instance with margin 1.
inline SvmProblem build_smil_problem(std::span<const Bag> positive, std::span<const Bag> negative, double cost) {
  const auto d = mil_detail::check_sides(positive, negative);
  const auto n_pos = static_cast<Eigen::Index>(positive.size());
  const auto n = n_pos + mil_detail::instance_count(negative);

  SvmProblem p;
  p.instances.resize(n, d);
  p.targets.resize(n);
  p.margins.resize(n);
  Eigen::Index row = 0;
  for (const auto& bag : positive) {
    const double len = static_cast<double>(bag.size());
    p.instances.row(row) = bag.instances.colwise().mean();
    p.targets[row] = 1.0;
    p.margins[row] = (2.0 - len) / len;
    ++row;
  }
  for (const auto& bag : negative) {
    p.instances.middleRows(row, bag.size()) = bag.instances;
    p.targets.segment(row, bag.size()).setConstant(-1.0);
    p.margins.segment(row, bag.size()).setOnes();
    row += bag.size();
  }
  p.cost = cost;
  p.class_weights = inverse_frequency_weights(p.targets);
  return p;
}

inline SvmSolution solve_smil(std::span<const Bag> positive, std::span<const Bag> negative, const MilConfig& config) {
  validate(config);
  return solve_svm(build_smil_problem(positive, negative, config.cost), config.svm_options());
}

/// +1 where score >= threshold and mask == 1, else -1.
inline std::vector<int> relabel_positive_instances(std::span<const double> scores, std::span<const int> mask,
                                                   double threshold) {
  if (scores.size() != mask.size()) throw Error(ErrorKind::input, "mil", "scores and mask differ in length");
  std::vector<int> labels(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) labels[j] = (scores[j] >= threshold && mask[j] == 1) ? 1 : -1;
  return labels;
}

struct SawmilModel {
  SvmSolution solution;      // final single-instance fit
  SvmSolution initial;       // sMIL stage
  double threshold = 0.0;    // quantile of positive-instance scores
  std::size_t relabeled_positive = 0;
  SvmProblem final_problem;
};

inline SawmilModel train_sawmil(std::span<const Bag> positive, std::span<const Bag> negative,
                                const MilConfig& config) {
  validate(config);
  SawmilModel model;
  model.initial = solve_smil(positive, negative, config);

  const auto d = positive.front().dim();
  const auto n_pos_inst = mil_detail::instance_count(positive);
  const auto n_neg_inst = mil_detail::instance_count(negative);

  Eigen::MatrixXd pos_instances(n_pos_inst, d);
  std::vector<int> mask;
  mask.reserve(static_cast<std::size_t>(n_pos_inst));
  Eigen::Index row = 0;
  for (const auto& bag : positive) {
    pos_instances.middleRows(row, bag.size()) = bag.instances;
    for (Eigen::Index i = 0; i < bag.size(); ++i) mask.push_back(bag.mask[i]);
    row += bag.size();
  }
  const Eigen::VectorXd s = (pos_instances * model.initial.theta).array() + model.initial.intercept;
  std::vector<double> scores(s.data(), s.data() + s.size());

  model.threshold = nearest_rank_quantile(scores, 1.0 - config.eta);
  const auto labels = relabel_positive_instances(scores, mask, model.threshold);
  model.relabeled_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (model.relabeled_positive == 0)
    throw Error(ErrorKind::degenerate_filter, "mil", "no positive-bag instance survived the quantile and mask filter");

  SvmProblem& p = model.final_problem;
  p.instances.resize(n_pos_inst + n_neg_inst, d);
  p.instances.topRows(n_pos_inst) = pos_instances;
  p.targets.resize(n_pos_inst + n_neg_inst);
  for (Eigen::Index j = 0; j < n_pos_inst; ++j) p.targets[j] = labels[static_cast<std::size_t>(j)];
  row = n_pos_inst;
  for (const auto& bag : negative) {
    p.instances.middleRows(row, bag.size()) = bag.instances;
    row += bag.size();
  }
  p.targets.tail(n_neg_inst).setConstant(-1.0);
  p.margins = Eigen::VectorXd::Ones(p.size());
  p.cost = config.cost;
  p.class_weights = inverse_frequency_weights(p.targets);

  model.solution = solve_svm(p, config.svm_options());
  return model;
}

}  // namespace veriprobe
