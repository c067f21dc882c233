#pragma once

// Statistics for directional-intervention experiments. Hidden-state edits are
// performed by an external runner; this module consumes the resulting
// probability traces.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "veriprobe/error.hpp"
#include "veriprobe/tensor_io.hpp"

namespace veriprobe {

struct TraceDeltas {
  double plus = 0.0;   // shift along +nu
  double minus = 0.0;  // shift along -nu
};

inline TraceDeltas deltas(const TraceRecord& t) { return {t.p_plus - t.p_base, t.p_minus - t.p_base}; }

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

/// Majority sign of the positive-shift deltas; an exact split is an error.
inline int dominant_direction(std::span<const double> deltas_plus) {
  if (deltas_plus.empty()) throw Error(ErrorKind::input, "intervention", "no deltas");
  std::size_t pos = 0, neg = 0;
  for (double d : deltas_plus) {
    pos += d > 0.0;
    neg += d < 0.0;
  }
  const auto half = static_cast<double>(deltas_plus.size()) / 2.0;
  if (static_cast<double>(pos) > half) return 1;
  if (static_cast<double>(neg) > half) return -1;
  throw Error(ErrorKind::tie, "intervention", "no strict majority sign among positive-shift deltas");
}

/// 1 when the two shifts move in opposite directions and the positive shift
/// follows the dominant direction. Zero deltas never succeed.
inline int per_statement_success(double delta_plus, double delta_minus, int dominant) {
  if (dominant != 1 && dominant != -1) throw Error(ErrorKind::input, "intervention", "direction must be -1 or +1");
  const int sp = sign_of(delta_plus);
  const int sm = sign_of(delta_minus);
  return (sp != 0 && sm != 0 && sp != sm && sp == dominant) ? 1 : 0;
}

/// P(X >= k) for X ~ Binomial(n, 1/2). Terms are built by ratio recursion
/// outward from the mode, so nothing overflows and the relative error stays
/// around n ulps.
inline double binomial_upper_tail(std::size_t n, std::size_t k) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  const std::size_t mode = n / 2;
  std::vector<double> t(n + 1, 0.0);
  t[mode] = 1.0;
  for (std::size_t i = mode; i < n; ++i)
    t[i + 1] = t[i] * static_cast<double>(n - i) / static_cast<double>(i + 1);
  for (std::size_t i = mode; i > 0; --i) t[i - 1] = t[i] * static_cast<double>(i) / static_cast<double>(n - i + 1);
  double tail = 0.0, total = 0.0;
  for (std::size_t i = n + 1; i-- > 0;) {
    total += t[i];
    if (i >= k) tail += t[i];
  }
  return std::min(1.0, tail / total);
}

struct SuccessRateTest {
  double omega = 0.0;
  double p_value = 1.0;
  std::size_t successes = 0;
  std::size_t n = 0;
};

/// Success rate and exact one-sided binomial p-value against omega <= 0.5.
inline SuccessRateTest success_rate_test(std::span<const int> successes) {
  if (successes.empty()) throw Error(ErrorKind::input, "intervention", "no statements");
  SuccessRateTest r;
  r.n = successes.size();
  for (int s : successes) {
    if (s != 0 && s != 1) throw Error(ErrorKind::input, "intervention", "success indicators must be 0 or 1");
    r.successes += static_cast<std::size_t>(s);
  }
  r.omega = static_cast<double>(r.successes) / static_cast<double>(r.n);
  r.p_value = binomial_upper_tail(r.n, r.successes);
  return r;
}

struct LocalityResult {
  double mean_delta_correct = 0.0;
  double mean_delta_random = 0.0;
  bool pass = false;
};

inline LocalityResult locality_check(std::span<const TraceRecord> traces) {
  if (traces.empty()) throw Error(ErrorKind::input, "intervention", "no traces");
  LocalityResult r;
  for (const auto& t : traces) {
    r.mean_delta_correct += std::abs(t.p_plus - t.p_minus);
    r.mean_delta_random += std::abs(t.r_plus - t.r_minus);
  }
  const auto n = static_cast<double>(traces.size());
  r.mean_delta_correct /= n;
  r.mean_delta_random /= n;
  r.pass = r.mean_delta_correct > r.mean_delta_random;
  return r;
}

/// Log-probability of a continuation from its per-token conditional log-probabilities.
inline double sequence_logprob(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw Error(ErrorKind::input, "intervention", "empty token list");
  double s = 0.0;
  for (double lp : token_logprobs) {
    if (!(lp <= 0.0)) throw Error(ErrorKind::input, "intervention", "log-probabilities must be finite and <= 0");
    s += lp;
  }
  return s;
}

struct StatementEffect {
  std::string statement_id;
  double delta_plus = 0.0;
  double delta_minus = 0.0;
  int success = 0;
};

struct InterventionSummary {
  std::vector<StatementEffect> per_statement;
  int dominant_direction = 0;  // 0 only when the majority vote tied
  double success_rate = 0.0;
  double p_value = 1.0;
  bool locality_pass = false;
  double mean_delta_correct = 0.0;
  double mean_delta_random = 0.0;
  double reported_success_rate = 0.0;  // zero unless every criterion holds
  std::vector<std::string> reasons;
};

/// Full decoder-level analysis. A decoder counts as steerable when the rate
/// beats one half, the binomial test is significant and locality holds;
/// otherwise the reported rate is zero and `reasons` says why.
inline InterventionSummary summarize(std::span<const TraceRecord> traces, double significance = 0.05) {
  if (traces.empty()) throw Error(ErrorKind::input, "intervention", "no traces");
  if (!(significance > 0.0 && significance < 1.0))
    throw Error(ErrorKind::input, "intervention", "significance level must lie in (0,1)");
  InterventionSummary s;
  std::vector<double> plus;
  plus.reserve(traces.size());
  for (const auto& t : traces) {
    const auto d = deltas(t);
    s.per_statement.push_back({t.statement_id, d.plus, d.minus, 0});
    plus.push_back(d.plus);
  }
  try {
    s.dominant_direction = dominant_direction(plus);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::tie) throw;
    s.dominant_direction = 0;
    s.reasons.emplace_back("direction_tie");
  }
  std::vector<int> successes;
  successes.reserve(traces.size());
  for (auto& e : s.per_statement) {
    e.success = s.dominant_direction == 0 ? 0 : per_statement_success(e.delta_plus, e.delta_minus, s.dominant_direction);
    successes.push_back(e.success);
  }
  const auto test = success_rate_test(successes);
  s.success_rate = test.omega;
  s.p_value = test.p_value;
  const auto loc = locality_check(traces);
  s.locality_pass = loc.pass;
  s.mean_delta_correct = loc.mean_delta_correct;
  s.mean_delta_random = loc.mean_delta_random;

  if (s.dominant_direction != 0) {
    if (!(s.success_rate > 0.5)) s.reasons.emplace_back("no_majority");
    if (!(s.p_value < significance)) s.reasons.emplace_back("not_significant");
  }
  if (!s.locality_pass) s.reasons.emplace_back("locality_failed");
  s.reported_success_rate = s.reasons.empty() ? s.success_rate : 0.0;
  return s;
}

inline nlohmann::ordered_json summary_to_json(const InterventionSummary& s, double significance) {
  nlohmann::ordered_json j;
  j["n_statements"] = s.per_statement.size();
  j["dominant_direction"] = s.dominant_direction;
  j["success_rate"] = s.success_rate;
  j["p_value"] = s.p_value;
  j["significance"] = significance;
  j["locality_pass"] = s.locality_pass;
  j["mean_delta_correct"] = s.mean_delta_correct;
  j["mean_delta_random"] = s.mean_delta_random;
  j["reported_success_rate"] = s.reported_success_rate;
  j["reasons"] = s.reasons;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& e : s.per_statement)
    rows.push_back({{"statement_id", e.statement_id},
                    {"delta_plus", e.delta_plus},
                    {"delta_minus", e.delta_minus},
                    {"success", e.success}});
  j["per_statement"] = rows;
  return j;
}

}  // namespace veriprobe
