#pragma once

// Linear veracity probes: the mean-difference baseline, one-vs-all sAwMIL
// probes and their softmax assembly into a three-class probe.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "veriprobe/conformal.hpp"
#include "veriprobe/error.hpp"
#include "veriprobe/labels.hpp"
#include "veriprobe/mil.hpp"
#include "veriprobe/svm.hpp"
#include "veriprobe/tensor_io.hpp"

namespace veriprobe {

enum class ProbeKind { is_true, is_false, is_neither, mean_diff };

inline std::string_view to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::is_true: return "is_true";
    case ProbeKind::is_false: return "is_false";
    case ProbeKind::is_neither: return "is_neither";
    case ProbeKind::mean_diff: return "mean_diff";
  }
  return "";
}

inline std::optional<ProbeKind> parse_probe_kind(std::string_view text) {
  if (text == "is_true") return ProbeKind::is_true;
  if (text == "is_false") return ProbeKind::is_false;
  if (text == "is_neither") return ProbeKind::is_neither;
  if (text == "mean_diff") return ProbeKind::mean_diff;
  return std::nullopt;
}

/// Statement class a one-vs-all probe separates from the rest.
inline Label target_label(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::is_true: return Label::true_;
    case ProbeKind::is_false: return Label::false_;
    case ProbeKind::is_neither: return Label::neither;
    case ProbeKind::mean_diff: break;
  }
  throw Error(ErrorKind::input, "probes", "mean_diff has no one-vs-all target");
}

inline ProbeKind one_vs_all_kind(Label label) {
  switch (label) {
    case Label::true_: return ProbeKind::is_true;
    case Label::false_: return ProbeKind::is_false;
    case Label::neither: return ProbeKind::is_neither;
  }
  return ProbeKind::is_true;
}

struct LinearProbe {
  ProbeKind kind = ProbeKind::is_true;
  Eigen::VectorXd theta;
  double intercept = 0.0;
  Standardizer standardizer;
  Eigen::VectorXd nu;
  std::optional<ConformalCalibration> calibration;

  Eigen::Index dim() const { return theta.size(); }

  Eigen::VectorXd instance_scores(const Eigen::MatrixXd& rows) const {
    return (standardizer.apply(rows) * theta).array() + intercept;
  }

  /// Maximum instance score over the bag.
  double bag_score(const Eigen::MatrixXd& rows) const {
    if (rows.rows() == 0) throw Error(ErrorKind::input, "probes", "empty bag");
    return instance_scores(rows).maxCoeff();
  }

  double last_token_score(const Eigen::MatrixXd& rows) const {
    if (rows.rows() == 0) throw Error(ErrorKind::input, "probes", "empty bag");
    return instance_scores(rows.bottomRows(1))[0];
  }
};

struct MulticlassProbe {
  std::array<LinearProbe, 3> members;  // is_true, is_false, is_neither
  std::array<double, 3> softmax_scale{1.0, 1.0, 1.0};
  std::array<double, 3> softmax_shift{0.0, 0.0, 0.0};
  std::optional<ConformalCalibration> calibration;

  Eigen::Index dim() const { return members[0].dim(); }
};

// ---------------------------------------------------------------------------
// Mean-difference probe.

struct MeanDiffModel {
  Eigen::VectorXd theta;      // mu+ - mu-
  Eigen::MatrixXd sigma;      // pooled covariance, ridge included
  Eigen::MatrixXd sigma_inv;
  double intercept = 0.0;     // midpoint of the class-mean projections

  Eigen::VectorXd weights() const { return sigma_inv * theta; }

  /// Positive on the side of the positive class mean.
  double score(const Eigen::VectorXd& x) const { return x.dot(weights()) - intercept; }
};

namespace probe_detail {

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

inline Eigen::MatrixXd pooled_covariance(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg) {
  const Eigen::VectorXd mu_pos = pos.colwise().mean().transpose();
  const Eigen::VectorXd mu_neg = neg.colwise().mean().transpose();
  const double n_pos = static_cast<double>(pos.rows());
  const double n_neg = static_cast<double>(neg.rows());
  return ((n_pos - 1.0) * sample_covariance(pos, mu_pos) + (n_neg - 1.0) * sample_covariance(neg, mu_neg)) /
         (n_pos + n_neg - 2.0);
}

}  // namespace probe_detail

/// 1e-3 * trace(Sigma) / d for the pooled covariance of the two classes.
inline double default_ridge(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg) {
  const Eigen::MatrixXd sigma = probe_detail::pooled_covariance(pos, neg);
  return 1e-3 * sigma.trace() / static_cast<double>(sigma.rows());
}

inline MeanDiffModel train_mean_diff(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg, double ridge) {
  const std::string module = "probes";
  if (pos.rows() < 2 || neg.rows() < 2)
    throw Error(ErrorKind::input, module, "mean-difference probe needs at least two samples per class");
  if (pos.cols() != neg.cols()) throw Error(ErrorKind::input, module, "class matrices disagree on dimension");
  if (!(ridge >= 0.0)) throw Error(ErrorKind::input, module, "ridge must be non-negative");

  const auto d = pos.cols();
  const Eigen::VectorXd mu_pos = pos.colwise().mean().transpose();
  const Eigen::VectorXd mu_neg = neg.colwise().mean().transpose();

  MeanDiffModel m;
  m.theta = mu_pos - mu_neg;
  m.sigma = probe_detail::pooled_covariance(pos, neg) + ridge * Eigen::MatrixXd::Identity(d, d);

  Eigen::LLT<Eigen::MatrixXd> llt(m.sigma);
  bool singular = llt.info() != Eigen::Success;
  if (!singular) {
    // Squared Cholesky pivots are the Schur complements; compare them to the variances.
    const Eigen::VectorXd pivots = Eigen::MatrixXd(llt.matrixL()).diagonal().array().square();
    singular = pivots.minCoeff() <= 1e-12 * m.sigma.diagonal().maxCoeff();
  }
  if (singular) throw Error(ErrorKind::singular, module, "pooled covariance is singular; use a positive ridge");
  m.sigma_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  m.sigma_inv = 0.5 * (m.sigma_inv + m.sigma_inv.transpose());

  const Eigen::VectorXd w = m.sigma_inv * m.theta;
  m.intercept = 0.5 * ((pos * w).mean() + (neg * w).mean());
  return m;
}

inline LinearProbe to_linear_probe(const MeanDiffModel& m) {
  LinearProbe p;
  p.kind = ProbeKind::mean_diff;
  p.theta = m.weights();
  p.intercept = -m.intercept;
  p.standardizer = Standardizer::identity(m.theta.size());
  p.nu = m.theta;
  return p;
}

// ---------------------------------------------------------------------------
// One-vs-all sAwMIL probes.

/// Statement bags grouped by veracity label. Bag::label is ignored and
/// reassigned per probe.
using BagsByClass = std::map<Label, std::vector<Bag>>;

inline Standardizer fit_standardizer(const BagsByClass& bags_by_class) {
  Eigen::Index rows = 0, d = 0;
  for (const auto& [label, bags] : bags_by_class)
    for (const auto& b : bags) {
      rows += b.size();
      d = b.dim();
    }
  Eigen::MatrixXd all(rows, d);
  Eigen::Index r = 0;
  for (const auto& [label, bags] : bags_by_class)
    for (const auto& b : bags) {
      all.middleRows(r, b.size()) = b.instances;
      r += b.size();
    }
  return Standardizer::fit(all);
}

inline LinearProbe train_one_vs_all(const BagsByClass& bags_by_class, ProbeKind target, const MilConfig& config,
                                    const std::optional<Standardizer>& shared = std::nullopt) {
  const Label positive_label = target_label(target);
  for (Label l : kAllLabels) {
    auto it = bags_by_class.find(l);
    if (it == bags_by_class.end() || it->second.empty())
      throw Error(ErrorKind::input, "probes", "one-vs-all training needs bags of every label");
  }
  const Standardizer standardizer = shared ? *shared : fit_standardizer(bags_by_class);

  std::vector<Bag> positive, negative;
  for (const auto& [label, bags] : bags_by_class)
    for (const auto& b : bags) {
      Bag copy{standardizer.apply(b.instances), label == positive_label ? 1 : 0, b.mask};
      (label == positive_label ? positive : negative).push_back(std::move(copy));
    }

  const SawmilModel model = train_sawmil(positive, negative, config);
  LinearProbe probe;
  probe.kind = target;
  probe.theta = model.solution.theta;
  probe.intercept = model.solution.intercept;
  probe.standardizer = standardizer;
  probe.nu = extract_direction(model.solution, model.final_problem);
  return probe;
}

// ---------------------------------------------------------------------------
// Softmax assembly.

struct SoftmaxFitOptions {
  double l2 = 1e-4;
  int max_steps = 10000;
  double tol = 1e-8;
};

inline std::array<double, 3> softmax(const std::array<double, 3>& z) {
  const double top = std::max({z[0], z[1], z[2]});
  std::array<double, 3> p{};
  double total = 0.0;
  for (int k = 0; k < 3; ++k) total += (p[k] = std::exp(z[k] - top));
  for (auto& v : p) v /= total;
  return p;
}

inline std::array<double, 3> apply_softmax(const std::array<double, 3>& scores, const std::array<double, 3>& scale,
                                           const std::array<double, 3>& shift) {
  return softmax({scores[0] * scale[0] + shift[0], scores[1] * scale[1] + shift[1], scores[2] * scale[2] + shift[2]});
}

struct SoftmaxParams {
  std::array<double, 3> scale{1.0, 1.0, 1.0};
  std::array<double, 3> shift{0.0, 0.0, 0.0};
};

/// Multinomial logistic regression of labels on per-class scores,
/// z_k = s_k * scale_k + shift_k, with an L2 penalty on all six parameters.
/// Damped Newton steps with backtracking.
inline SoftmaxParams fit_softmax(std::span<const std::array<double, 3>> scores, std::span<const int> labels,
                                 const SoftmaxFitOptions& options = {}) {
  const std::string module = "probes";
  if (scores.empty() || scores.size() != labels.size())
    throw Error(ErrorKind::input, module, "softmax fit needs matching, non-empty scores and labels");
  for (int y : labels)
    if (y < 0 || y > 2) throw Error(ErrorKind::input, module, "class index out of range");

  const double n = static_cast<double>(scores.size());
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  Vec6 params;
  params << 1, 1, 1, 0, 0, 0;

  auto loss = [&](const Vec6& w) {
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      std::array<double, 3> z{};
      for (int k = 0; k < 3; ++k) z[k] = scores[i][k] * w[k] + w[3 + k];
      const double top = std::max({z[0], z[1], z[2]});
      const double lse = top + std::log(std::exp(z[0] - top) + std::exp(z[1] - top) + std::exp(z[2] - top));
      total += lse - z[labels[i]];
    }
    return total / n + 0.5 * options.l2 * w.squaredNorm();
  };

  double current = loss(params);
  for (int step = 0; step < options.max_steps; ++step) {
    Vec6 grad = options.l2 * params;
    Mat6 hess = options.l2 * Mat6::Identity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto p = apply_softmax(scores[i], {params[0], params[1], params[2]}, {params[3], params[4], params[5]});
      Eigen::Matrix<double, 3, 6> jac = Eigen::Matrix<double, 3, 6>::Zero();
      Eigen::Vector3d residual;
      Eigen::Matrix3d curvature;
      for (int k = 0; k < 3; ++k) {
        jac(k, k) = scores[i][k];
        jac(k, 3 + k) = 1.0;
        residual[k] = p[k] - (labels[i] == k ? 1.0 : 0.0);
        for (int l = 0; l < 3; ++l) curvature(k, l) = (k == l ? p[k] : 0.0) - p[k] * p[l];
      }
      grad += jac.transpose() * residual / n;
      hess += jac.transpose() * curvature * jac / n;
    }
    if (grad.norm() <= options.tol) return {{params[0], params[1], params[2]}, {params[3], params[4], params[5]}};

    const Vec6 direction = -hess.ldlt().solve(grad);
    double t = 1.0;
    Vec6 candidate = params + direction;
    double next = loss(candidate);
    while (next > current + 1e-4 * t * grad.dot(direction) && t > 1e-12) {
      t *= 0.5;
      candidate = params + t * direction;
      next = loss(candidate);
    }
    if (!(next < current)) {
      // No further decrease is representable; accept a near-stationary point.
      if (grad.norm() <= 1e3 * options.tol) return {{params[0], params[1], params[2]}, {params[3], params[4], params[5]}};
      break;
    }
    params = candidate;
    current = next;
  }
  throw ConvergenceError(module, "softmax calibration did not converge", current);
}

inline std::array<double, 3> member_scores(const MulticlassProbe& probe, const Eigen::MatrixXd& bag) {
  if (bag.cols() != probe.dim()) throw Error(ErrorKind::input, "probes", "bag dimension mismatch");
  return {probe.members[0].bag_score(bag), probe.members[1].bag_score(bag), probe.members[2].bag_score(bag)};
}

inline std::array<double, 3> predict_multiclass(const MulticlassProbe& probe, const Eigen::MatrixXd& bag) {
  return apply_softmax(member_scores(probe, bag), probe.softmax_scale, probe.softmax_shift);
}

inline MulticlassProbe fit_multiclass(const std::array<LinearProbe, 3>& probes,
                                      std::span<const Eigen::MatrixXd> train_bags, std::span<const Label> labels,
                                      const SoftmaxFitOptions& options = {}) {
  const auto d = probes[0].dim();
  for (int k = 0; k < 3; ++k) {
    if (probes[k].dim() != d) throw Error(ErrorKind::input, "probes", "member probes disagree on dimension");
    if (probes[k].kind != one_vs_all_kind(kAllLabels[k]))
      throw Error(ErrorKind::input, "probes", "members must be ordered is_true, is_false, is_neither");
  }
  MulticlassProbe probe;
  probe.members = probes;
  std::vector<std::array<double, 3>> scores;
  std::vector<int> classes;
  for (std::size_t i = 0; i < train_bags.size(); ++i) {
    scores.push_back(member_scores(probe, train_bags[i]));
    classes.push_back(index_of(labels[i]));
  }
  const auto params = fit_softmax(scores, classes, options);
  probe.softmax_scale = params.scale;
  probe.softmax_shift = params.shift;
  return probe;
}

// ---------------------------------------------------------------------------
// JSON serialisation. Doubles are written as shortest round-trip decimal strings.

namespace probe_detail {

inline std::string num(double v) { return io_detail::format_double(v); }

inline double parse_num(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  auto v = io_detail::parse_double(j.get<std::string>());
  if (!v) throw Error(ErrorKind::format, "probes", "bad number in probe file");
  return *v;
}

inline nlohmann::ordered_json vec(const Eigen::VectorXd& v) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v[i]));
  return out;
}

inline Eigen::VectorXd parse_vec(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_num(j[i]);
  return v;
}

}  // namespace probe_detail

inline nlohmann::ordered_json calibration_to_json(const ConformalCalibration& cal) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(cal.mode);
  j["alpha"] = probe_detail::num(cal.alpha);
  j["scores"] = nlohmann::ordered_json::array();
  for (double s : cal.scores) j["scores"].push_back(probe_detail::num(s));
  return j;
}

inline ConformalCalibration calibration_from_json(const nlohmann::json& j) {
  ConformalCalibration cal;
  const auto mode = j.at("mode").get<std::string>();
  if (mode != "binary" && mode != "multiclass") throw Error(ErrorKind::format, "probes", "unknown calibration mode");
  cal.mode = mode == "binary" ? ConformalMode::binary : ConformalMode::multiclass;
  cal.alpha = probe_detail::parse_num(j.at("alpha"));
  for (const auto& s : j.at("scores")) cal.scores.push_back(probe_detail::parse_num(s));
  return cal;
}

inline nlohmann::ordered_json to_json(const LinearProbe& p) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(p.kind);
  j["d"] = p.dim();
  j["theta"] = probe_detail::vec(p.theta);
  j["b"] = probe_detail::num(p.intercept);
  j["standardizer"] = {{"mean", probe_detail::vec(p.standardizer.mean)},
                       {"scale", probe_detail::vec(p.standardizer.scale)}};
  j["nu"] = probe_detail::vec(p.nu);
  if (p.calibration) j["calibration"] = calibration_to_json(*p.calibration);
  return j;
}

inline nlohmann::ordered_json to_json(const MulticlassProbe& p) {
  nlohmann::ordered_json j;
  j["kind"] = "multiclass";
  j["d"] = p.dim();
  j["members"] = nlohmann::ordered_json::array();
  for (const auto& m : p.members) j["members"].push_back(to_json(m));
  j["softmax_scale"] = nlohmann::ordered_json::array();
  j["softmax_shift"] = nlohmann::ordered_json::array();
  for (int k = 0; k < 3; ++k) {
    j["softmax_scale"].push_back(probe_detail::num(p.softmax_scale[k]));
    j["softmax_shift"].push_back(probe_detail::num(p.softmax_shift[k]));
  }
  if (p.calibration) j["calibration"] = calibration_to_json(*p.calibration);
  return j;
}

inline LinearProbe linear_probe_from_json(const nlohmann::json& j) {
  const std::string module = "probes";
  LinearProbe p;
  try {
    const auto kind = parse_probe_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorKind::format, module, "unknown probe kind");
    p.kind = *kind;
    p.theta = probe_detail::parse_vec(j.at("theta"));
    p.intercept = probe_detail::parse_num(j.at("b"));
    p.standardizer.mean = probe_detail::parse_vec(j.at("standardizer").at("mean"));
    p.standardizer.scale = probe_detail::parse_vec(j.at("standardizer").at("scale"));
    p.nu = probe_detail::parse_vec(j.at("nu"));
    if (j.contains("calibration")) p.calibration = calibration_from_json(j.at("calibration"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, module, std::string("probe file: ") + e.what());
  }
  const auto d = j.at("d").get<Eigen::Index>();
  if (p.theta.size() != d || p.nu.size() != d || p.standardizer.mean.size() != d || p.standardizer.scale.size() != d)
    throw Error(ErrorKind::format, module, "probe file: vector lengths disagree with d");
  if ((p.standardizer.scale.array() <= 0.0).any() || !p.nu.allFinite())
    throw Error(ErrorKind::format, module, "probe file: invalid standardizer or direction");
  return p;
}

using AnyProbe = std::variant<LinearProbe, MulticlassProbe>;

inline AnyProbe probe_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "multiclass") return linear_probe_from_json(j);
  MulticlassProbe p;
  try {
    const auto& members = j.at("members");
    if (members.size() != 3) throw Error(ErrorKind::format, "probes", "multiclass probe needs three members");
    for (int k = 0; k < 3; ++k) p.members[k] = linear_probe_from_json(members[k]);
    for (int k = 0; k < 3; ++k) {
      p.softmax_scale[k] = probe_detail::parse_num(j.at("softmax_scale")[k]);
      p.softmax_shift[k] = probe_detail::parse_num(j.at("softmax_shift")[k]);
    }
    if (j.contains("calibration")) p.calibration = calibration_from_json(j.at("calibration"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "probes", std::string("probe file: ") + e.what());
  }
  for (int k = 0; k < 3; ++k)
    if (p.members[k].dim() != p.members[0].dim() ||
        p.members[k].standardizer.mean != p.members[0].standardizer.mean ||
        p.members[k].standardizer.scale != p.members[0].standardizer.scale)
      throw Error(ErrorKind::format, "probes", "multiclass members disagree on dimension or standardizer");
  return p;
}

}  // namespace veriprobe
