#pragma once

// Seeded synthetic data shared by the unit and acceptance suites.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "veriprobe/mil.hpp"
#include "veriprobe/svm.hpp"
#include "veriprobe/tensor_io.hpp"

namespace fixture {

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Eigen::VectorXd unit_vector(std::mt19937_64& rng, Eigen::Index d) { return gaussian_vector(rng, d).normalized(); }

/// Small random SVM dual with both classes, varied costs and margins.
inline veriprobe::SvmProblem random_svm_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(2, 8), dd(1, 3);
  const int n = nd(rng), d = dd(rng);
  veriprobe::SvmProblem p;
  p.instances = gaussian_matrix(rng, n, d);
  p.targets.resize(n);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < n; ++i) p.targets[i] = coin(rng) ? 1.0 : -1.0;
  p.targets[0] = 1.0;
  p.targets[1] = -1.0;
  p.margins.resize(n);
  std::uniform_real_distribution<double> mu(-0.5, 1.5);
  for (int i = 0; i < n; ++i) p.margins[i] = mu(rng);
  p.cost = std::exp(std::uniform_real_distribution<double>(std::log(0.1), std::log(10.0))(rng));
  p.class_weights = veriprobe::inverse_frequency_weights(p.targets);
  return p;
}

/// Noise bags where each positive bag carries one token shifted by
/// `strength * u`. Masks cover a suffix containing that token, or with
/// `tight_mask` only the shifted token itself. Passing `u` reuses a direction.
struct PlantedBags {
  Eigen::VectorXd u;
  std::vector<veriprobe::Bag> positive, negative;
};

inline PlantedBags planted_bags(std::uint64_t seed, Eigen::Index d, int per_class, double strength = 4.0,
                                bool tight_mask = false, const Eigen::VectorXd* u = nullptr) {
  std::mt19937_64 rng(seed);
  PlantedBags out;
  out.u = unit_vector(rng, d);
  if (u) out.u = *u;
  std::uniform_int_distribution<int> len(4, 10);
  auto make = [&](int label) {
    veriprobe::Bag b;
    const int L = len(rng);
    b.instances = gaussian_matrix(rng, L, d);
    b.label = label;
    const int offset = std::uniform_int_distribution<int>(1, L - 2)(rng);
    b.mask = Eigen::VectorXi::Zero(L);
    b.mask.tail(L - offset).setOnes();
    if (label == 1) {
      const int t = std::uniform_int_distribution<int>(offset, L - 1)(rng);
      b.instances.row(t) += strength * out.u.transpose();
      if (tight_mask) {
        b.mask.setZero();
        b.mask[t] = 1;
      }
    }
    return b;
  };
  for (int i = 0; i < per_class; ++i) {
    out.positive.push_back(make(1));
    out.negative.push_back(make(0));
  }
  return out;
}

/// Three isotropic Gaussian classes in the plane; probabilities are the exact
/// posteriors under equal priors.
struct GaussianSample {
  std::vector<double> p;
  int label;
};

inline std::vector<GaussianSample> gaussian_three_class(std::mt19937_64& rng, int n) {
  const std::array<Eigen::Vector2d, 3> means{Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 1.7)};
  std::uniform_int_distribution<int> cls(0, 2);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<GaussianSample> out;
  for (int i = 0; i < n; ++i) {
    const int y = cls(rng);
    const Eigen::Vector2d x = means[static_cast<std::size_t>(y)] + Eigen::Vector2d(z(rng), z(rng));
    std::array<double, 3> logit{};
    for (int k = 0; k < 3; ++k) logit[static_cast<std::size_t>(k)] = -0.5 * (x - means[static_cast<std::size_t>(k)]).squaredNorm();
    const double mx = *std::max_element(logit.begin(), logit.end());
    double tot = 0.0;
    for (auto& l : logit) tot += (l = std::exp(l - mx));
    out.push_back({{logit[0] / tot, logit[1] / tot, logit[2] / tot}, y});
  }
  return out;
}

/// Intervention traces in which each statement succeeds with probability
/// `rate` (opposite shifts, positive one upward). Random continuations barely move.
inline std::vector<veriprobe::TraceRecord> planted_traces(std::uint64_t seed, int n, double rate) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> base(0.2, 0.6), up(0.05, 0.3), down(0.05, 0.15), jitter(-0.002, 0.002);
  std::bernoulli_distribution success(rate), coin(0.5);
  std::vector<veriprobe::TraceRecord> out;
  for (int i = 0; i < n; ++i) {
    veriprobe::TraceRecord t;
    t.statement_id = "t" + std::to_string(i);
    t.p_base = base(rng);
    if (success(rng)) {
      t.p_plus = t.p_base + up(rng);
      t.p_minus = t.p_base - down(rng);
    } else if (coin(rng)) {
      t.p_plus = t.p_base + up(rng);
      t.p_minus = t.p_base + down(rng);
    } else {
      t.p_plus = t.p_base - down(rng);
      t.p_minus = t.p_base - down(rng);
    }
    t.r_base = 0.01;
    t.r_plus = 0.01 + jitter(rng);
    t.r_minus = 0.01 + jitter(rng);
    out.push_back(t);
  }
  return out;
}

/// Pronounceable made-up names built from syllables, all distinct.
inline std::vector<std::string> syllable_names(std::uint64_t seed, int count, int syllables) {
  static const std::array<const char*, 24> parts{"ka", "lo", "mi", "ran", "te", "vo", "sul", "bra", "den", "fi", "go",
                                                 "har", "is", "jun", "ke", "lar", "mon", "nes", "or", "pel", "qua",
                                                 "ros", "tin", "zu"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1);
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    std::string s;
    for (int k = 0; k < syllables; ++k) s += parts[pick(rng)];
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

/// City/country entity table as CSV text: every city in exactly one country.
inline std::string city_table(std::uint64_t seed, int cities, int countries) {
  const auto city_names = syllable_names(seed, cities, 3);
  const auto country_names = syllable_names(seed + 7, countries, 2);
  std::string csv = "subject,object\n";
  for (int i = 0; i < cities; ++i)
    csv += city_names[static_cast<std::size_t>(i)] + "," + country_names[static_cast<std::size_t>(i % countries)] + "\n";
  return csv;
}

/// Fake activations: one token per whitespace word plus a leading token, noise
/// everywhere and a label-specific offset on the actualized tokens.
inline veriprobe::ActivationSet fake_activations(const std::vector<veriprobe::StatementRecord>& statements,
                                                 Eigen::Index d, std::uint64_t seed, double strength = 3.0,
                                                 int layer = 0, const std::string& model = "fake-model") {
  std::mt19937_64 rng(seed);
  std::array<Eigen::VectorXd, 3> dirs;
  const Eigen::MatrixXd basis = gaussian_matrix(rng, d, 3).householderQr().householderQ() * Eigen::MatrixXd::Identity(d, 3);
  for (int k = 0; k < 3; ++k) dirs[static_cast<std::size_t>(k)] = basis.col(k);
  veriprobe::ActivationSet set;
  set.model_id = model;
  set.layer_index = layer;
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (const auto& s : statements) {
    const int words = veriprobe::io_detail::whitespace_token_count(s.text);
    const int L = words + 1;
    veriprobe::ActivationRecord r;
    r.statement_id = s.statement_id;
    r.embeddings.resize(L, d);
    for (int t = 0; t < L; ++t)
      for (Eigen::Index j = 0; j < d; ++j) r.embeddings(t, j) = n(rng);
    const auto& dir = dirs[static_cast<std::size_t>(veriprobe::index_of(s.label))];
    for (int t = s.mask_offset(); t < L; ++t) r.embeddings.row(t) += (strength * dir).cast<float>().transpose();
    set.records.push_back(std::move(r));
  }
  return set;
}

}  // namespace fixture
