#pragma once

// Statement dataset forging: n-gram Markov name generation for synthetic
// entities, template rendering, and entity-exclusive train/calibration/test
// splits.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "veriprobe/error.hpp"
#include "veriprobe/labels.hpp"
#include "veriprobe/tensor_io.hpp"

namespace veriprobe {

namespace text {

/// Splits UTF-8 text into code points, each kept as its own byte string.
inline std::vector<std::string> code_points(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '-') {
      if (!cur.empty()) out.push_back(ascii_lower(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(ascii_lower(cur));
  return out;
}

inline bool shares_word(std::string_view a, std::string_view b) {
  const auto wa = words(a);
  const auto wb = words(b);
  for (const auto& w : wa)
    if (std::find(wb.begin(), wb.end(), w) != wb.end()) return true;
  return false;
}

}  // namespace text

// ---------------------------------------------------------------------------
// n-gram Markov chain.

inline constexpr std::string_view kStartToken = "[start]";
inline constexpr std::string_view kEndToken = "[end]";

/// Overlapping n-grams of a word with boundary markers, e.g. for n = 2
/// "ability" -> [start]a ab bi il li it ty y[end].
inline std::vector<std::string> ngram_decomposition(std::string_view word, int n) {
  const auto cps = text::code_points(word);
  std::vector<std::string> out;
  if (n < 2 || static_cast<int>(cps.size()) < n) return out;
  auto join = [&](std::size_t from, std::size_t count) {
    std::string s;
    for (std::size_t k = 0; k < count; ++k) s += cps[from + k];
    return s;
  };
  const auto m = static_cast<std::size_t>(n);
  out.push_back(std::string(kStartToken) + join(0, m - 1));
  for (std::size_t i = 0; i + m <= cps.size(); ++i) out.push_back(join(i, m));
  out.push_back(join(cps.size() - (m - 1), m - 1) + std::string(kEndToken));
  return out;
}

/// Chain over the full-width n-grams of each word. START and END stand in for
/// the boundary grams of the decomposition.
struct TransitionMatrix {
  int ngram_len = 3;
  std::map<std::string, std::map<std::string, double>> transitions;
  std::size_t skipped_words = 0;

  double probability(const std::string& from, const std::string& to) const {
    auto it = transitions.find(from);
    if (it == transitions.end()) return 0.0;
    auto jt = it->second.find(to);
    return jt == it->second.end() ? 0.0 : jt->second;
  }
};

namespace datagen_detail {

inline std::vector<std::string> inner_grams(std::string_view word, int n) {
  const auto cps = text::code_points(word);
  std::vector<std::string> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= cps.size(); ++i) {
    std::string g;
    for (int k = 0; k < n; ++k) g += cps[i + static_cast<std::size_t>(k)];
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace datagen_detail

inline TransitionMatrix build_transition_matrix(const std::vector<std::string>& words, int n) {
  if (words.empty()) throw Error(ErrorKind::input, "datagen", "no words to learn from");
  if (n < 2) throw Error(ErrorKind::input, "datagen", "n-gram length must be at least 2");
  TransitionMatrix tm;
  tm.ngram_len = n;
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  const std::string start(kStartToken), end(kEndToken);
  for (const auto& raw : words) {
    const auto grams = datagen_detail::inner_grams(text::ascii_lower(raw), n);
    if (grams.empty()) {
      ++tm.skipped_words;
      continue;
    }
    ++counts[start][grams.front()];
    for (std::size_t i = 0; i + 1 < grams.size(); ++i) ++counts[grams[i]][grams[i + 1]];
    ++counts[grams.back()][end];
  }
  if (counts.empty()) throw Error(ErrorKind::input, "datagen", "every word is shorter than the n-gram length");
  for (const auto& [from, row] : counts) {
    double total = 0.0;
    for (const auto& [to, c] : row) total += static_cast<double>(c);
    auto& out = tm.transitions[from];
    for (const auto& [to, c] : row) out[to] = static_cast<double>(c) / total;
  }
  return tm;
}

/// True when every consecutive n-gram step of `name` has positive probability.
inline bool walk_in_support(const TransitionMatrix& tm, std::string_view name) {
  const auto grams = datagen_detail::inner_grams(text::ascii_lower(name), tm.ngram_len);
  if (grams.empty()) return false;
  if (tm.probability(std::string(kStartToken), grams.front()) <= 0.0) return false;
  for (std::size_t i = 0; i + 1 < grams.size(); ++i)
    if (tm.probability(grams[i], grams[i + 1]) <= 0.0) return false;
  return tm.probability(grams.back(), std::string(kEndToken)) > 0.0;
}

/// Seeded sampler of chain walks; successive calls continue one RNG stream.
class NameGenerator {
 public:
  explicit NameGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string next(const TransitionMatrix& tm, int min_len, int max_len, const std::set<std::string>& blocklist,
                   int max_attempts = 1000) {
    if (tm.transitions.empty()) throw Error(ErrorKind::input, "datagen", "empty transition matrix");
    const std::string start(kStartToken), end(kEndToken);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      std::string state = start;
      std::string name;
      int length = 0;
      bool finished = false;
      while (length <= max_len + tm.ngram_len) {
        auto it = tm.transitions.find(state);
        if (it == tm.transitions.end()) break;
        const std::string next_state = sample(it->second);
        if (next_state == end) {
          finished = true;
          break;
        }
        const auto cps = text::code_points(next_state);
        if (state == start) {
          name = next_state;
          length = static_cast<int>(cps.size());
        } else {
          name += cps.back();
          ++length;
        }
        state = next_state;
      }
      if (!finished || length < min_len || length > max_len) continue;
      if (blocklist.count(text::ascii_lower(name))) continue;
      return name;
    }
    throw Error(ErrorKind::generation, "datagen", "name generation retry budget exhausted");
  }

 private:
  std::string sample(const std::map<std::string, double>& row) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    double acc = 0.0;
    for (const auto& [to, p] : row) {
      acc += p;
      if (u < acc) return to;
    }
    return row.rbegin()->first;
  }

  std::mt19937_64 rng_;
};

inline std::string generate_name(const TransitionMatrix& tm, std::uint64_t seed, int min_len, int max_len,
                                 const std::set<std::string>& blocklist) {
  NameGenerator gen(seed);
  return gen.next(tm, min_len, max_len, blocklist);
}

// ---------------------------------------------------------------------------
// Templates.

enum class Dataset { city_locations, medical_indications, word_definitions };
enum class Relation { located_in, indicated_for, synonym_of, type_of, instance_of };

inline std::string_view to_string(Dataset d) {
  switch (d) {
    case Dataset::city_locations: return "city_locations";
    case Dataset::medical_indications: return "medical_indications";
    case Dataset::word_definitions: return "word_definitions";
  }
  return "";
}

inline std::optional<Dataset> parse_dataset(std::string_view s) {
  if (s == "city_locations") return Dataset::city_locations;
  if (s == "medical_indications") return Dataset::medical_indications;
  if (s == "word_definitions") return Dataset::word_definitions;
  return std::nullopt;
}

inline std::optional<Relation> parse_relation(std::string_view s) {
  if (s == "located_in") return Relation::located_in;
  if (s == "indicated_for") return Relation::indicated_for;
  if (s == "synonym" || s == "synonym_of") return Relation::synonym_of;
  if (s == "type_of") return Relation::type_of;
  if (s == "instance_of") return Relation::instance_of;
  return std::nullopt;
}

/// Sentence pattern with `{subject}` and `{object}` slots; `{article}` is
/// filled with a/an for the object where present.
struct Pattern {
  Relation relation;
  std::string affirmative;
  std::string negated;
};

struct TemplateSpec {
  Dataset dataset = Dataset::city_locations;
  std::vector<Pattern> patterns;

  const Pattern& pattern_for(Relation r) const {
    for (const auto& p : patterns)
      if (p.relation == r) return p;
    throw Error(ErrorKind::input, "datagen", "no template for relation");
  }

  static TemplateSpec for_dataset(Dataset d) {
    switch (d) {
      case Dataset::city_locations:
        return {d, {{Relation::located_in, "The city of {subject} is located in {object}.",
                     "The city of {subject} is not located in {object}."}}};
      case Dataset::medical_indications:
        return {d, {{Relation::indicated_for, "{subject} is indicated for the treatment of {object}.",
                     "{subject} is not indicated for the treatment of {object}."}}};
      case Dataset::word_definitions:
        return {d,
                {{Relation::synonym_of, "{subject} is a synonym of {article} {object}.",
                  "{subject} is not a synonym of {article} {object}."},
                 {Relation::type_of, "{subject} is a type of {article} {object}.",
                  "{subject} is not a type of {article} {object}."},
                 {Relation::instance_of, "{subject} is {article} {object}.", "{subject} is not {article} {object}."}}};
    }
    return {};
  }
};

namespace datagen_detail {

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

inline void replace_once(std::string& s, std::string_view slot, std::string_view value) {
  const auto pos = s.find(slot);
  if (pos != std::string::npos) s.replace(pos, slot.size(), value);
}

}  // namespace datagen_detail

inline void validate(const TemplateSpec& spec) {
  for (const auto& p : spec.patterns)
    for (const auto* s : {&p.affirmative, &p.negated})
      if (datagen_detail::count_occurrences(*s, "{subject}") != 1 ||
          datagen_detail::count_occurrences(*s, "{object}") != 1 ||
          datagen_detail::count_occurrences(*s, "{article}") > 1)
        throw Error(ErrorKind::input, "datagen", "template slots must appear exactly once: " + *s);
}

struct Fact {
  std::string subject;
  std::string object;
  Relation relation = Relation::located_in;
};

struct RenderedStatement {
  std::string text;
  int pre_actualized_len = 0;  // whitespace tokens before the object slot
};

inline RenderedStatement render_statement(const TemplateSpec& spec, const Fact& fact, Polarity polarity) {
  std::string pattern = polarity == Polarity::affirmative ? spec.pattern_for(fact.relation).affirmative
                                                          : spec.pattern_for(fact.relation).negated;
  std::string subject = fact.subject;
  if (spec.dataset == Dataset::city_locations) {
    // Names that already say "city" drop the "The city of" lead-in.
    const auto w = text::words(fact.subject);
    if (std::find(w.begin(), w.end(), "city") != w.end())
      datagen_detail::replace_once(pattern, "The city of {subject}", "{subject}");
  } else {
    subject = text::capitalize(subject);
  }
  const char first = fact.object.empty() ? 'x' : static_cast<char>(std::tolower(static_cast<unsigned char>(fact.object[0])));
  const std::string article = std::string_view("aeiou").find(first) != std::string_view::npos ? "an" : "a";

  datagen_detail::replace_once(pattern, "{subject}", subject);
  datagen_detail::replace_once(pattern, "{article}", article);
  const auto object_pos = pattern.find("{object}");
  RenderedStatement out;
  out.pre_actualized_len = io_detail::whitespace_token_count(std::string_view(pattern).substr(0, object_pos));
  datagen_detail::replace_once(pattern, "{object}", fact.object);
  out.text = std::move(pattern);
  return out;
}

// ---------------------------------------------------------------------------
// Forging.

struct LabelPlan {
  int true_affirmative = 0;
  int true_negated = 0;
  int false_affirmative = 0;
  int false_negated = 0;
  int neither_affirmative = 0;
  int neither_negated = 0;

  int total() const {
    return true_affirmative + true_negated + false_affirmative + false_negated + neither_affirmative +
           neither_negated;
  }

  /// Composition of the published City Locations set (7252 statements).
  static LabelPlan city_locations_reference() { return {1392, 1376, 1358, 1374, 876, 876}; }
};

struct ForgeOptions {
  std::uint64_t seed = 0;
  std::string id_prefix = "s";
};

inline std::string subject_entity_id(std::string_view subject) { return "subj:" + text::ascii_lower(subject); }

/// Emits labelled statements. True facts yield true affirmative / false
/// negated statements; sampled wrong pairs yield false affirmative / true
/// negated ones; synthetic facts yield neither statements in both polarities.
inline std::vector<StatementRecord> forge_statements(const std::vector<Fact>& facts,
                                                     const std::vector<Fact>& synthetic, const TemplateSpec& spec,
                                                     const LabelPlan& plan, const ForgeOptions& options) {
  const std::string module = "datagen";
  validate(spec);
  if (facts.empty()) throw Error(ErrorKind::input, module, "empty entity table");
  if ((plan.neither_affirmative > 0 || plan.neither_negated > 0) && synthetic.empty())
    throw Error(ErrorKind::input, module, "neither statements requested without synthetic entities");

  std::mt19937_64 rng(options.seed);

  // Correct objects per subject, for the no-shared-word rule on wrong pairs.
  std::map<std::string, std::vector<std::string>> correct;
  std::map<Relation, std::vector<std::string>> objects_by_relation;
  for (const auto& f : facts) {
    correct[text::ascii_lower(f.subject)].push_back(f.object);
    auto& objs = objects_by_relation[f.relation];
    if (std::find(objs.begin(), objs.end(), f.object) == objs.end()) objs.push_back(f.object);
  }

  std::vector<Fact> true_order = facts;
  std::shuffle(true_order.begin(), true_order.end(), rng);

  std::vector<Fact> wrong;
  for (const auto& f : true_order) {
    const auto& pool = objects_by_relation[f.relation];
    const auto& right = correct[text::ascii_lower(f.subject)];
    for (int attempt = 0; attempt < 64; ++attempt) {
      const auto& candidate = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      bool clash = false;
      for (const auto& r : right) clash = clash || text::shares_word(candidate, r);
      if (!clash) {
        wrong.push_back({f.subject, candidate, f.relation});
        break;
      }
    }
  }

  auto take = [&](const std::vector<Fact>& pool, int count, const char* what) {
    if (count > static_cast<int>(pool.size()))
      throw Error(ErrorKind::input, module,
                  std::string("label plan asks for more ") + what + " statements than distinct pairs available");
    return std::vector<Fact>(pool.begin(), pool.begin() + count);
  };

  std::vector<Fact> true_negated_pool = true_order;
  std::shuffle(true_negated_pool.begin(), true_negated_pool.end(), rng);
  std::vector<Fact> wrong_negated_pool = wrong;
  std::shuffle(wrong_negated_pool.begin(), wrong_negated_pool.end(), rng);

  struct Job {
    std::vector<Fact> facts;
    Label label;
    Polarity polarity;
  };
  const std::vector<Job> jobs = {
      {take(true_order, plan.true_affirmative, "true affirmative"), Label::true_, Polarity::affirmative},
      {take(wrong_negated_pool, plan.true_negated, "true negated"), Label::true_, Polarity::negated},
      {take(wrong, plan.false_affirmative, "false affirmative"), Label::false_, Polarity::affirmative},
      {take(true_negated_pool, plan.false_negated, "false negated"), Label::false_, Polarity::negated},
      {take(synthetic, plan.neither_affirmative, "neither affirmative"), Label::neither, Polarity::affirmative},
      {take(synthetic, plan.neither_negated, "neither negated"), Label::neither, Polarity::negated},
  };

  std::vector<StatementRecord> out;
  out.reserve(static_cast<std::size_t>(plan.total()));
  for (const auto& job : jobs)
    for (const auto& f : job.facts) {
      const auto rendered = render_statement(spec, f, job.polarity);
      StatementRecord r;
      char id[32];
      std::snprintf(id, sizeof(id), "%05zu", out.size());
      r.statement_id = options.id_prefix + id;
      r.text = rendered.text;
      r.pre_actualized_len = rendered.pre_actualized_len;
      r.label = job.label;
      r.polarity = job.polarity;
      r.entity_ids = {subject_entity_id(f.subject)};
      out.push_back(std::move(r));
    }
  return out;
}

/// Decorations applied to synthetic country names, with their position.
struct NameDecoration {
  std::string_view word;
  bool prefix;
};

inline constexpr std::array<NameDecoration, 8> kCountryDecorations = {{
    {"Island", false}, {"Republic of", true}, {"Kingdom", false}, {"West", true},
    {"East", true},    {"North", true},       {"South", true},    {"Land", false},
}};

struct SyntheticOptions {
  std::uint64_t seed = 0;
  int subject_count = 220;
  int object_count = 140;
  int pair_count = 876;
  int min_len = 4;
  int max_len = 12;
  double decoration_probability = 0.25;
};

/// Synthetic (subject, object) pairs for neither statements. Subjects use a
/// 3-gram chain over real subjects; objects use 2-grams for countries and
/// 3-grams otherwise. Names in the blocklist or in the real tables are rejected.
inline std::vector<Fact> synthesize_facts(const std::vector<Fact>& facts, Dataset dataset,
                                          const std::set<std::string>& blocklist, const SyntheticOptions& options) {
  const std::string module = "datagen";
  if (facts.empty()) throw Error(ErrorKind::input, module, "empty entity table");
  std::vector<std::string> subjects, objects;
  std::set<Relation> relations;
  std::set<std::string> banned = blocklist;
  for (const auto& f : facts) {
    subjects.push_back(f.subject);
    objects.push_back(f.object);
    relations.insert(f.relation);
    banned.insert(text::ascii_lower(f.subject));
    banned.insert(text::ascii_lower(f.object));
  }
  const auto subject_tm = build_transition_matrix(subjects, 3);
  const auto object_tm = build_transition_matrix(objects, dataset == Dataset::city_locations ? 2 : 3);

  NameGenerator gen(options.seed);
  std::mt19937_64 rng(options.seed ^ 0x5DEECE66DULL);
  auto unique_names = [&](const TransitionMatrix& tm, int count, bool decorate) {
    std::vector<std::string> names;
    for (int i = 0; i < count; ++i) {
      std::string name = text::capitalize(gen.next(tm, options.min_len, options.max_len, banned));
      banned.insert(text::ascii_lower(name));
      if (decorate && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < options.decoration_probability) {
        const auto& deco = kCountryDecorations[std::uniform_int_distribution<std::size_t>(
            0, kCountryDecorations.size() - 1)(rng)];
        name = deco.prefix ? std::string(deco.word) + " " + name : name + " " + std::string(deco.word);
      }
      names.push_back(std::move(name));
    }
    return names;
  };
  const auto syn_subjects = unique_names(subject_tm, options.subject_count, false);
  const auto syn_objects = unique_names(object_tm, options.object_count, dataset == Dataset::city_locations);
  const std::vector<Relation> relation_list(relations.begin(), relations.end());

  std::vector<Fact> out;
  std::set<std::pair<std::string, std::string>> used;
  for (int i = 0; static_cast<int>(out.size()) < options.pair_count; ++i) {
    if (i > options.pair_count * 100) throw Error(ErrorKind::generation, module, "could not form distinct synthetic pairs");
    Fact f;
    f.subject = syn_subjects[static_cast<std::size_t>(i) % syn_subjects.size()];
    f.object = syn_objects[std::uniform_int_distribution<std::size_t>(0, syn_objects.size() - 1)(rng)];
    f.relation = relation_list[std::uniform_int_distribution<std::size_t>(0, relation_list.size() - 1)(rng)];
    if (!used.insert({f.subject, f.object}).second) continue;
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits.

struct SplitRatios {
  double train = 0.55;
  double calibration = 0.20;
  double test = 0.25;
};

/// Assigns whole entity groups (statements connected through shared entity
/// ids) to splits, largest group first, each to the split furthest below its
/// target size.
inline std::vector<StatementRecord> split_dataset(std::vector<StatementRecord> records, const SplitRatios& ratios,
                                                  std::uint64_t seed) {
  const std::string module = "datagen";
  const std::array<double, 3> target{ratios.train, ratios.calibration, ratios.test};
  const double ratio_sum = target[0] + target[1] + target[2];
  if (!(target[0] > 0 && target[1] > 0 && target[2] > 0) || std::abs(ratio_sum - 1.0) > 1e-9)
    throw Error(ErrorKind::input, module, "split ratios must be positive and sum to 1");
  if (records.empty()) return records;

  std::vector<std::size_t> parent(records.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<std::string, std::size_t> owner;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].entity_ids.empty())
      throw Error(ErrorKind::input, module, "statement " + records[i].statement_id + " has no entity ids");
    for (const auto& e : records[i].entity_ids) {
      auto [it, inserted] = owner.emplace(e, i);
      if (!inserted) parent[find(i)] = find(it->second);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[find(i)].push_back(i);

  std::vector<std::vector<std::size_t>> ordered;
  for (auto& [root, members] : groups) ordered.push_back(std::move(members));
  std::mt19937_64 rng(seed);
  std::shuffle(ordered.begin(), ordered.end(), rng);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });

  const double n = static_cast<double>(records.size());
  const double cap = *std::max_element(target.begin(), target.end());
  if (static_cast<double>(ordered.front().size()) > cap * n)
    throw Error(ErrorKind::infeasible, module, "an entity group is larger than the largest split");

  std::array<double, 3> filled{0, 0, 0};
  constexpr std::array<Split, 3> kSplits{Split::train, Split::calibration, Split::test};
  for (const auto& group : ordered) {
    int best = 0;
    double best_deficit = -1e300;
    for (int k = 0; k < 3; ++k) {
      const double deficit = target[static_cast<std::size_t>(k)] * n - filled[static_cast<std::size_t>(k)];
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = k;
      }
    }
    filled[static_cast<std::size_t>(best)] += static_cast<double>(group.size());
    for (auto i : group) records[i].split = kSplits[static_cast<std::size_t>(best)];
  }
  return records;
}

// ---------------------------------------------------------------------------
// Entity tables and blocklists.

namespace datagen_detail {

inline std::vector<std::string> parse_csv_row(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace datagen_detail

/// CSV with header `subject,object` or `subject,relation,object`.
inline std::vector<Fact> parse_entity_table(std::string_view bytes, Dataset dataset) {
  const std::string module = "datagen";
  const auto lines = io_detail::lines_of(bytes);
  if (lines.empty()) throw Error(ErrorKind::input, module, "empty entity table");
  const auto header = datagen_detail::parse_csv_row(lines.front());
  const bool with_relation = header.size() == 3;
  if (!(header == std::vector<std::string>{"subject", "object"} ||
        header == std::vector<std::string>{"subject", "relation", "object"}))
    throw Error(ErrorKind::format, module, "entity table header must be subject,object or subject,relation,object");
  const Relation fallback = dataset == Dataset::city_locations       ? Relation::located_in
                            : dataset == Dataset::medical_indications ? Relation::indicated_for
                                                                      : Relation::synonym_of;
  std::vector<Fact> facts;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto row = datagen_detail::parse_csv_row(lines[i]);
    if (row.size() != header.size())
      throw Error(ErrorKind::format, module, "entity table line " + std::to_string(i + 1) + ": wrong column count");
    Fact f;
    f.subject = row[0];
    f.object = row.back();
    f.relation = fallback;
    if (with_relation) {
      const auto r = parse_relation(row[1]);
      if (!r) throw Error(ErrorKind::schema, module, "unknown relation '" + row[1] + "'");
      f.relation = *r;
    }
    if (f.subject.empty() || f.object.empty())
      throw Error(ErrorKind::format, module, "entity table line " + std::to_string(i + 1) + ": empty field");
    facts.push_back(std::move(f));
  }
  if (facts.empty()) throw Error(ErrorKind::input, module, "empty entity table");
  return facts;
}

inline std::set<std::string> parse_blocklist(std::string_view bytes) {
  std::set<std::string> out;
  for (auto line : io_detail::lines_of(bytes))
    if (!line.empty()) out.insert(text::ascii_lower(line));
  return out;
}

}  // namespace veriprobe
