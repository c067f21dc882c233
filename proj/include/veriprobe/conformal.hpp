#pragma once

// Split conformal prediction over probe outputs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "veriprobe/error.hpp"

namespace veriprobe {

enum class ConformalMode { binary, multiclass };

inline std::string_view to_string(ConformalMode mode) {
  return mode == ConformalMode::binary ? "binary" : "multiclass";
}

/// exp(-y s): small when the signed score sits on the side of label y.
inline double binary_nc(double s, int y) { return std::exp(-static_cast<double>(y) * s); }

/// (1 - (p_y - max_{i != y} p_i)) / 2, in [0, 1].
inline double multiclass_nc(std::span<const double> p, int y) {
  const std::string module = "conformal";
  if (p.size() < 2) throw Error(ErrorKind::input, module, "need at least two classes");
  if (y < 0 || static_cast<std::size_t>(y) >= p.size()) throw Error(ErrorKind::input, module, "class index out of range");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= -1e-9)) throw Error(ErrorKind::input, module, "probability vector off simplex");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::input, module, "probability vector off simplex");
  double rival = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (static_cast<int>(i) != y) rival = std::max(rival, p[i]);
  return (1.0 - (p[static_cast<std::size_t>(y)] - rival)) / 2.0;
}

struct ConformalCalibration {
  ConformalMode mode = ConformalMode::binary;
  std::vector<double> scores;  // ascending
  double alpha = 0.1;

  /// ceil((n+1)(1-alpha))-th smallest calibration score; +inf when that rank exceeds n.
  double threshold() const {
    const auto n = static_cast<double>(scores.size());
    const auto rank = static_cast<std::size_t>(std::ceil((n + 1.0) * (1.0 - alpha) - 1e-9));
    if (rank == 0) return -std::numeric_limits<double>::infinity();
    if (rank > scores.size()) return std::numeric_limits<double>::infinity();
    return scores[rank - 1];
  }

  /// Strict comparison: a tie with the threshold does not cover.
  bool covers(double candidate) const { return candidate < threshold(); }
};

struct BinarySample {
  double score = 0.0;
  int label = 1;  // -1 or +1
};

struct MulticlassSample {
  std::vector<double> probabilities;
  int label = 0;
};

inline ConformalCalibration calibrate_from_nonconformity(std::vector<double> nonconformity, double alpha,
                                                         ConformalMode mode) {
  if (nonconformity.empty()) throw Error(ErrorKind::input, "conformal", "empty calibration set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::input, "conformal", "alpha must lie in (0,1)");
  std::sort(nonconformity.begin(), nonconformity.end());
  return {mode, std::move(nonconformity), alpha};
}

inline ConformalCalibration calibrate(std::span<const BinarySample> samples, double alpha) {
  std::vector<double> nc;
  nc.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.label != 1 && s.label != -1) throw Error(ErrorKind::input, "conformal", "binary labels must be -1 or +1");
    nc.push_back(binary_nc(s.score, s.label));
  }
  return calibrate_from_nonconformity(std::move(nc), alpha, ConformalMode::binary);
}

inline ConformalCalibration calibrate(std::span<const MulticlassSample> samples, double alpha) {
  std::vector<double> nc;
  nc.reserve(samples.size());
  for (const auto& s : samples) nc.push_back(multiclass_nc(s.probabilities, s.label));
  return calibrate_from_nonconformity(std::move(nc), alpha, ConformalMode::multiclass);
}

/// Candidate nonconformity per binary label, ordered {+1, -1}.
inline std::vector<double> binary_candidates(double score) { return {binary_nc(score, 1), binary_nc(score, -1)}; }

inline std::vector<double> multiclass_candidates(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t y = 0; y < p.size(); ++y) out[y] = multiclass_nc(p, static_cast<int>(y));
  return out;
}

/// Indices of the candidate labels whose nonconformity falls below the
/// calibrated threshold.
inline std::vector<int> prediction_set(const ConformalCalibration& cal, std::span<const double> candidate_scores) {
  const double q = cal.threshold();
  std::vector<int> out;
  for (std::size_t y = 0; y < candidate_scores.size(); ++y)
    if (candidate_scores[y] < q) out.push_back(static_cast<int>(y));
  return out;
}

/// Point decision: the sole member of a singleton set, otherwise nothing (abstain).
inline std::optional<int> decide(std::span<const int> set) {
  if (set.size() == 1) return set.front();
  return std::nullopt;
}

}  // namespace veriprobe
