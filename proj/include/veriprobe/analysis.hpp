#pragma once

// Cross-model similarity from multiclass probe outputs: Jensen-Shannon
// divergence, layer-matched model distances and a minimum spanning tree.

#include <algorithm>
#include <array>
#include <limits>
#include <tuple>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "veriprobe/error.hpp"
#include "veriprobe/tensor_io.hpp"

namespace veriprobe {

namespace analysis_detail {

inline void check_simplex(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::input, "analysis", "distribution off simplex");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::input, "analysis", "distribution off simplex");
}

}  // namespace analysis_detail

/// 0.5 KL(p||m) + 0.5 KL(q||m) with m the midpoint. `log_base` defaults to e,
/// bounding the result by ln 2.
inline double js_divergence(std::span<const double> p, std::span<const double> q, double log_base = M_E) {
  if (p.size() != q.size() || p.empty()) throw Error(ErrorKind::input, "analysis", "distributions differ in support");
  analysis_detail::check_simplex(p);
  analysis_detail::check_simplex(q);
  double kp = 0.0, kq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kp += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) kq += q[i] * std::log(q[i] / m);
  }
  return std::max(0.0, 0.5 * kp + 0.5 * kq) / std::log(log_base);
}

struct StatementOutput {
  std::vector<double> probabilities;
  bool abstained = false;
};

/// One model's probe outputs on one dataset, per layer.
struct DatasetOutputs {
  std::map<int, double> layer_scores;  // W-MCC per layer
  std::map<int, std::map<std::string, StatementOutput>> layers;
};

struct ModelOutputs {
  std::string model_id;
  std::map<std::string, DatasetOutputs> datasets;
};

/// Best-scoring ceil(fraction * L) layers; ties favour the lower layer index.
inline std::vector<int> top_layers(const DatasetOutputs& d, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorKind::input, "analysis", "top fraction must lie in (0,1]");
  std::vector<int> ids;
  for (const auto& [layer, _] : d.layers) ids.push_back(layer);
  if (ids.empty()) throw Error(ErrorKind::input, "analysis", "model has no layers");
  auto score = [&](int layer) {
    auto it = d.layer_scores.find(layer);
    return it == d.layer_scores.end() ? -std::numeric_limits<double>::infinity() : it->second;
  };
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return score(a) > score(b); });
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-9)));
  ids.resize(std::min(keep, ids.size()));
  return ids;
}

struct LayerPairDistance {
  double distance = 0.0;
  int layer_a = 0;
  int layer_b = 0;
  std::size_t compared = 0;
  std::size_t excluded = 0;  // shared statements dropped for abstention
};

/// Mean per-statement JSD over the statements both layers scored without abstaining.
inline std::optional<LayerPairDistance> layer_pair_distance(const std::map<std::string, StatementOutput>& a,
                                                            const std::map<std::string, StatementOutput>& b,
                                                            double log_base = M_E) {
  LayerPairDistance r;
  double total = 0.0;
  for (const auto& [id, out_a] : a) {
    auto it = b.find(id);
    if (it == b.end()) continue;
    if (out_a.abstained || it->second.abstained) {
      ++r.excluded;
      continue;
    }
    total += js_divergence(out_a.probabilities, it->second.probabilities, log_base);
    ++r.compared;
  }
  if (r.compared == 0) return std::nullopt;
  r.distance = total / static_cast<double>(r.compared);
  return r;
}

/// Minimum over top-layer pairs of the mean per-statement divergence.
inline LayerPairDistance model_distance(const DatasetOutputs& a, const DatasetOutputs& b, double top_fraction = 0.5,
                                        double log_base = M_E) {
  std::optional<LayerPairDistance> best;
  for (int la : top_layers(a, top_fraction))
    for (int lb : top_layers(b, top_fraction)) {
      auto d = layer_pair_distance(a.layers.at(la), b.layers.at(lb), log_base);
      if (!d) continue;
      d->layer_a = la;
      d->layer_b = lb;
      if (!best || d->distance < best->distance) best = d;
    }
  if (!best) throw Error(ErrorKind::input, "analysis", "models share no non-abstained statements");
  return *best;
}

/// Mean of per-dataset distances over the datasets both models cover.
inline double model_distance(const ModelOutputs& a, const ModelOutputs& b, double top_fraction = 0.5,
                             double log_base = M_E) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [name, da] : a.datasets) {
    auto it = b.datasets.find(name);
    if (it == b.datasets.end()) continue;
    total += model_distance(da, it->second, top_fraction, log_base).distance;
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::input, "analysis", "models " + a.model_id + " and " + b.model_id + " share no dataset");
  return total / static_cast<double>(count);
}

struct DistanceMatrix {
  std::vector<std::string> model_ids;
  Eigen::MatrixXd values;
};

inline void validate(const DistanceMatrix& dm) {
  const auto m = static_cast<Eigen::Index>(dm.model_ids.size());
  if (dm.values.rows() != m || dm.values.cols() != m)
    throw Error(ErrorKind::input, "analysis", "distance matrix shape does not match model list");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (dm.values(i, i) != 0.0) throw Error(ErrorKind::input, "analysis", "distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < m; ++j)
      if (!(dm.values(i, j) >= 0.0) || dm.values(i, j) != dm.values(j, i))
        throw Error(ErrorKind::input, "analysis", "distance matrix must be symmetric and non-negative");
  }
}

/// Pairwise distances with models in ascending id order, so input order never matters.
inline DistanceMatrix build_distance_matrix(std::vector<ModelOutputs> models, double top_fraction = 0.5,
                                            double log_base = M_E) {
  std::sort(models.begin(), models.end(), [](const auto& x, const auto& y) { return x.model_id < y.model_id; });
  DistanceMatrix dm;
  const auto m = static_cast<Eigen::Index>(models.size());
  dm.values = Eigen::MatrixXd::Zero(m, m);
  for (const auto& mo : models) dm.model_ids.push_back(mo.model_id);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      dm.values(i, j) = dm.values(j, i) = model_distance(models[static_cast<std::size_t>(i)],
                                                         models[static_cast<std::size_t>(j)], top_fraction, log_base);
  return dm;
}

struct TreeEdge {
  std::string a;  // lexicographically smaller endpoint
  std::string b;
  double weight = 0.0;

  bool operator==(const TreeEdge&) const = default;
};

/// Kruskal's algorithm; equal weights are broken by the (a, b) name pair.
inline std::vector<TreeEdge> minimum_spanning_tree(const DistanceMatrix& dm) {
  validate(dm);
  const auto m = dm.model_ids.size();
  if (m < 2) throw Error(ErrorKind::input, "analysis", "spanning tree needs at least two models");
  std::vector<std::tuple<double, std::string, std::string, std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      auto x = dm.model_ids[i], y = dm.model_ids[j];
      std::size_t xi = i, yi = j;
      if (y < x) {
        std::swap(x, y);
        std::swap(xi, yi);
      }
      edges.emplace_back(dm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), x, y, xi, yi);
    }
  std::sort(edges.begin(), edges.end());
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<TreeEdge> tree;
  for (const auto& [w, x, y, xi, yi] : edges) {
    const auto rx = find(xi), ry = find(yi);
    if (rx == ry) continue;
    parent[rx] = ry;
    tree.push_back({x, y, w});
    if (tree.size() + 1 == m) break;
  }
  return tree;
}

inline double tree_weight(std::span<const TreeEdge> edges) {
  double s = 0.0;
  for (const auto& e : edges) s += e.weight;
  return s;
}

// ---------------------------------------------------------------------------
// Serialization.

inline constexpr std::string_view kTernaryHeader =
    "model_id,dataset,layer,layer_w_mcc,statement_id,label,p_true,p_false,p_neither,abstained";

struct TernaryRow {
  std::string model_id;
  std::string dataset;
  int layer = 0;
  double layer_w_mcc = 0.0;
  std::string statement_id;
  std::string label;
  std::array<double, 3> p{};
  bool abstained = false;
};

inline std::string format_ternary_row(const TernaryRow& r) {
  std::string out = r.model_id + "," + r.dataset + "," + std::to_string(r.layer) + "," +
                    io_detail::format_double(r.layer_w_mcc) + "," + r.statement_id + "," + r.label;
  for (double v : r.p) out += "," + io_detail::format_double(v);
  out += r.abstained ? ",1" : ",0";
  return out;
}

/// Groups ternary output rows into per-model structures.
inline std::vector<ModelOutputs> parse_ternary_outputs(std::string_view bytes) {
  const std::string module = "analysis";
  const auto lines = io_detail::lines_of(bytes);
  if (lines.empty() || lines.front() != kTernaryHeader)
    throw Error(ErrorKind::format, module, "ternary output header mismatch");
  std::map<std::string, ModelOutputs> models;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = io_detail::split_csv_line(lines[i]);
    const auto where = "line " + std::to_string(i + 1);
    if (f.size() != 10) throw Error(ErrorKind::format, module, where + ": expected 10 columns");
    auto& mo = models[f[0]];
    mo.model_id = f[0];
    auto& ds = mo.datasets[f[1]];
    int layer = 0;
    try {
      layer = std::stoi(f[2]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::format, module, where + ": bad layer index");
    }
    const auto score = io_detail::parse_double(f[3]);
    if (!score) throw Error(ErrorKind::format, module, where + ": bad layer score");
    ds.layer_scores[layer] = *score;
    StatementOutput out;
    for (int k = 0; k < 3; ++k) {
      const auto v = io_detail::parse_double(f[6 + static_cast<std::size_t>(k)]);
      if (!v) throw Error(ErrorKind::format, module, where + ": bad probability");
      out.probabilities.push_back(*v);
    }
    if (f[9] != "0" && f[9] != "1") throw Error(ErrorKind::format, module, where + ": abstained must be 0 or 1");
    out.abstained = f[9] == "1";
    if (!ds.layers[layer].emplace(f[4], std::move(out)).second)
      throw Error(ErrorKind::duplication, module, where + ": duplicate statement " + f[4]);
  }
  std::vector<ModelOutputs> result;
  for (auto& [id, mo] : models) result.push_back(std::move(mo));
  return result;
}

inline std::string distance_csv(const DistanceMatrix& dm) {
  std::string out = "model_id";
  for (const auto& id : dm.model_ids) out += "," + id;
  out += '\n';
  for (std::size_t i = 0; i < dm.model_ids.size(); ++i) {
    out += dm.model_ids[i];
    for (std::size_t j = 0; j < dm.model_ids.size(); ++j)
      out += "," + io_detail::format_double(dm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json mst_to_json(std::span<const TreeEdge> edges) {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : edges) arr.push_back({{"a", e.a}, {"b", e.b}, {"weight", e.weight}});
  j["edges"] = arr;
  j["total_weight"] = tree_weight(edges);
  return j;
}

}  // namespace veriprobe
