#pragma once

// Confusion matrices with an abstain column, multiclass MCC and its
// acceptance-weighted variant, bootstrap intervals and the zero-shot
// option-token mapping.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "veriprobe/error.hpp"
#include "veriprobe/labels.hpp"

namespace veriprobe {

/// Rows are ground-truth classes; columns are predicted classes followed by
/// a final abstain column.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes = 3)
      : classes_(classes), counts_(static_cast<std::size_t>(classes * (classes + 1)), 0) {
    if (classes < 2) throw Error(ErrorKind::input, "evaluation", "confusion matrix needs at least two classes");
  }

  int classes() const { return classes_; }
  int abstain_column() const { return classes_; }

  std::int64_t& at(int truth, int column) { return counts_[index(truth, column)]; }
  std::int64_t at(int truth, int column) const { return counts_[index(truth, column)]; }

  void add(int truth, std::optional<int> predicted) { ++at(truth, predicted.value_or(abstain_column())); }

  std::int64_t row_total(int truth) const {
    std::int64_t s = 0;
    for (int c = 0; c <= classes_; ++c) s += at(truth, c);
    return s;
  }

  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto v : counts_) s += v;
    return s;
  }

  std::int64_t abstained() const {
    std::int64_t s = 0;
    for (int r = 0; r < classes_; ++r) s += at(r, abstain_column());
    return s;
  }

  /// Each row divided by its total (abstentions included); empty rows stay zero.
  std::vector<std::vector<double>> normalized() const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(classes_),
                                         std::vector<double>(static_cast<std::size_t>(classes_ + 1), 0.0));
    for (int r = 0; r < classes_; ++r) {
      const auto t = row_total(r);
      if (t == 0) continue;
      for (int c = 0; c <= classes_; ++c)
        out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
            static_cast<double>(at(r, c)) / static_cast<double>(t);
    }
    return out;
  }

 private:
  std::size_t index(int truth, int column) const {
    if (truth < 0 || truth >= classes_ || column < 0 || column > classes_)
      throw Error(ErrorKind::input, "evaluation", "confusion matrix index out of range");
    return static_cast<std::size_t>(truth * (classes_ + 1) + column);
  }

  int classes_;
  std::vector<std::int64_t> counts_;
};

struct MccResult {
  double value = 0.0;
  bool degenerate = false;  // a variance term vanished; value reported as 0
};

/// Multiclass MCC over the non-abstained block:
/// (c s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2)).
inline MccResult mcc_result(const ConfusionMatrix& cm) {
  const int k = cm.classes();
  double c = 0.0, s = 0.0, pt = 0.0, pp = 0.0, tt = 0.0;
  for (int i = 0; i < k; ++i) {
    double t_i = 0.0, p_i = 0.0;
    for (int j = 0; j < k; ++j) {
      t_i += static_cast<double>(cm.at(i, j));
      p_i += static_cast<double>(cm.at(j, i));
    }
    c += static_cast<double>(cm.at(i, i));
    s += t_i;
    pt += p_i * t_i;
    pp += p_i * p_i;
    tt += t_i * t_i;
  }
  if (s == 0.0) throw Error(ErrorKind::undefined_metric, "evaluation", "MCC undefined: every prediction abstained");
  const double denom = (s * s - pp) * (s * s - tt);
  if (denom <= 0.0) return {0.0, true};
  return {(c * s - pt) / std::sqrt(denom), false};
}

inline double mcc(const ConfusionMatrix& cm) { return mcc_result(cm).value; }

inline double w_mcc(double mcc_value, std::int64_t n_abstained, std::int64_t n_total) {
  if (n_total <= 0 || n_abstained < 0 || n_abstained > n_total)
    throw Error(ErrorKind::input, "evaluation", "invalid abstention counts");
  return mcc_value * (1.0 - static_cast<double>(n_abstained) / static_cast<double>(n_total));
}

/// W-MCC of a matrix; an all-abstained matrix scores 0.
inline double w_mcc(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  const auto abstained = cm.abstained();
  if (total == 0) throw Error(ErrorKind::input, "evaluation", "empty confusion matrix");
  if (abstained == total) return 0.0;
  return w_mcc(mcc(cm), abstained, total);
}

/// Percentile interval of `metric` over seeded bootstrap resamples of the outcomes.
template <typename T>
std::pair<double, double> bootstrap_ci(std::span<const T> outcomes,
                                       const std::function<double(std::span<const T>)>& metric, int n_boot,
                                       std::uint64_t seed, double level = 0.95) {
  if (outcomes.empty()) throw Error(ErrorKind::input, "evaluation", "bootstrap over empty outcomes");
  if (n_boot < 100) throw Error(ErrorKind::input, "evaluation", "bootstrap needs n_boot >= 100");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, outcomes.size() - 1);
  std::vector<T> sample(outcomes.size());
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(n_boot));
  for (int b = 0; b < n_boot; ++b) {
    for (auto& s : sample) s = outcomes[pick(rng)];
    stats.push_back(metric(std::span<const T>(sample)));
  }
  std::sort(stats.begin(), stats.end());
  auto percentile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, stats.size() - 1);
    return stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
  };
  const double tail = (1.0 - level) / 2.0;
  return {percentile(tail), percentile(1.0 - tail)};
}

/// One evaluated statement: ground truth and prediction (nullopt = abstain).
struct Outcome {
  int truth = 0;
  std::optional<int> predicted;
};

inline ConfusionMatrix confusion_from(std::span<const Outcome> outcomes, int classes) {
  ConfusionMatrix cm(classes);
  for (const auto& o : outcomes) cm.add(o.truth, o.predicted);
  return cm;
}

struct EvalReport {
  double mcc = 0.0;
  bool mcc_degenerate = false;
  double acceptance_rate = 0.0;
  double w_mcc = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t n_total = 0;
  std::int64_t n_abstained = 0;
  ConfusionMatrix counts{3};
  std::vector<std::vector<double>> normalized;
};

inline EvalReport make_report(std::span<const Outcome> outcomes, int classes, int n_boot, std::uint64_t seed) {
  EvalReport r;
  r.counts = confusion_from(outcomes, classes);
  r.n_total = r.counts.total();
  r.n_abstained = r.counts.abstained();
  if (r.n_total == 0) throw Error(ErrorKind::input, "evaluation", "no outcomes to evaluate");
  r.acceptance_rate = 1.0 - static_cast<double>(r.n_abstained) / static_cast<double>(r.n_total);
  if (r.n_abstained < r.n_total) {
    const auto m = mcc_result(r.counts);
    r.mcc = m.value;
    r.mcc_degenerate = m.degenerate;
  }
  r.w_mcc = r.mcc * r.acceptance_rate;
  r.normalized = r.counts.normalized();
  const std::function<double(std::span<const Outcome>)> metric = [classes](std::span<const Outcome> s) {
    return w_mcc(confusion_from(s, classes));
  };
  std::tie(r.ci_low, r.ci_high) = bootstrap_ci<Outcome>(outcomes, metric, n_boot, seed);
  return r;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r, const std::vector<std::string>& class_names) {
  nlohmann::ordered_json j;
  j["mcc"] = r.mcc;
  j["mcc_degenerate"] = r.mcc_degenerate;
  j["acceptance_rate"] = r.acceptance_rate;
  j["w_mcc"] = r.w_mcc;
  j["ci_low"] = r.ci_low;
  j["ci_high"] = r.ci_high;
  j["n_total"] = r.n_total;
  j["n_abstained"] = r.n_abstained;
  auto columns = nlohmann::ordered_json::array();
  for (const auto& n : class_names) columns.push_back(n);
  columns.push_back("abstain");
  j["columns"] = columns;
  j["confusion"] = nlohmann::ordered_json::object();
  j["confusion_normalized"] = nlohmann::ordered_json::object();
  for (int row = 0; row < r.counts.classes(); ++row) {
    auto counts = nlohmann::ordered_json::array();
    for (int c = 0; c <= r.counts.classes(); ++c) counts.push_back(r.counts.at(row, c));
    j["confusion"][class_names[static_cast<std::size_t>(row)]] = counts;
    j["confusion_normalized"][class_names[static_cast<std::size_t>(row)]] = r.normalized[static_cast<std::size_t>(row)];
  }
  return j;
}

/// Normalized confusion table as CSV: truth, one column per prediction, abstain.
inline std::string confusion_csv(const EvalReport& r, const std::vector<std::string>& class_names) {
  std::string out = "truth";
  for (const auto& n : class_names) out += "," + n;
  out += ",abstain\n";
  for (int row = 0; row < r.counts.classes(); ++row) {
    out += class_names[static_cast<std::size_t>(row)];
    for (double v : r.normalized[static_cast<std::size_t>(row)]) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.6f", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Zero-shot prompting: option tokens [1] true, [2] false, [3] and [4] neither;
// all remaining vocabulary mass counts as abstention.

struct ZeroShotMass {
  double true_ = 0.0;
  double false_ = 0.0;
  double neither = 0.0;
  double abstain = 0.0;
};

inline ZeroShotMass zero_shot_label_map(const std::map<int, double>& token_probs) {
  double total = 0.0;
  for (const auto& [token, p] : token_probs) {
    if (!(p >= 0.0)) throw Error(ErrorKind::input, "evaluation", "negative token probability");
    total += p;
  }
  if (total > 1.0 + 1e-9) throw Error(ErrorKind::input, "evaluation", "token probabilities exceed 1");
  auto get = [&](int option) {
    auto it = token_probs.find(option);
    return it == token_probs.end() ? 0.0 : it->second;
  };
  ZeroShotMass m;
  m.true_ = get(1);
  m.false_ = get(2);
  m.neither = get(3) + get(4);
  m.abstain = std::max(0.0, 1.0 - (get(1) + get(2) + get(3) + get(4)));
  return m;
}

/// Argmax over the three labels; abstains when the leftover mass beats every label.
inline std::optional<Label> zero_shot_predict(const ZeroShotMass& m) {
  const std::array<double, 3> mass{m.true_, m.false_, m.neither};
  const auto best = static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin());
  if (m.abstain > mass[static_cast<std::size_t>(best)]) return std::nullopt;
  return kAllLabels[static_cast<std::size_t>(best)];
}

}  // namespace veriprobe
