#pragma once

// Command-line front end. `run` parses argv, executes one subcommand and
// returns the process exit code; errors are reported as JSON on stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "veriprobe/analysis.hpp"
#include "veriprobe/conformal.hpp"
#include "veriprobe/datagen.hpp"
#include "veriprobe/error.hpp"
#include "veriprobe/evaluation.hpp"
#include "veriprobe/intervention.hpp"
#include "veriprobe/labels.hpp"
#include "veriprobe/mil.hpp"
#include "veriprobe/probes.hpp"
#include "veriprobe/tensor_io.hpp"

namespace veriprobe::cli {

inline constexpr std::string_view kVersion = "1.0.0";

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of the effective configuration. Paths enter by file name only so that
/// the same run in another directory hashes identically.
inline std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

inline std::string path_key(const std::string& p) { return p.empty() ? "" : fs::path(p).filename().string(); }

struct Artifact {
  fs::path path;
  std::string bytes;
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Writes the artifacts and a manifest listing each one's hash.
inline void publish(const std::vector<Artifact>& artifacts, const fs::path& manifest_path, std::string_view command,
                    const json& config, const std::string& hash, const std::vector<fs::path>& inputs) {
  for (const auto& a : artifacts)
    for (const auto& in : inputs)
      if (fs::weakly_canonical(a.path) == fs::weakly_canonical(in))
        throw Error(ErrorKind::input, "cli", "refusing to overwrite input " + in.string());
  json manifest;
  manifest["tool"] = "veriprobe";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["config_hash"] = hash;
  manifest["artifacts"] = json::object();
  for (const auto& a : artifacts) {
    if (a.path.has_parent_path()) fs::create_directories(a.path.parent_path());
    io_detail::write_file_bytes(a.path, a.bytes);
    manifest["artifacts"][a.path.filename().string()] = hex64(fnv1a64(a.bytes));
  }
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  io_detail::write_file_bytes(manifest_path, dump(manifest));
}

// ---------------------------------------------------------------------------
// Data assembly.

struct StatementBag {
  const StatementRecord* statement = nullptr;
  Eigen::MatrixXd rows;
  Eigen::VectorXi mask;
};

/// Bags for the statements of `split`, in statement-file order. Tokens from the
/// actualized offset onward are masked in.
inline std::vector<StatementBag> collect_bags(const std::vector<StatementRecord>& statements,
                                              const ActivationSet& activations, Split split) {
  std::unordered_map<std::string, const ActivationRecord*> index;
  for (const auto& r : activations.records) index.emplace(r.statement_id, &r);
  std::vector<StatementBag> out;
  for (const auto& s : statements) {
    if (!s.split) throw Error(ErrorKind::input, "cli", "statement " + s.statement_id + " has no split");
    if (*s.split != split) continue;
    auto it = index.find(s.statement_id);
    if (it == index.end()) throw Error(ErrorKind::input, "cli", "no activations for statement " + s.statement_id);
    StatementBag bag;
    bag.statement = &s;
    bag.rows = it->second->embeddings.cast<double>();
    const auto len = bag.rows.rows();
    if (s.mask_offset() >= len)
      throw Error(ErrorKind::input, "cli", "statement " + s.statement_id + ": actualized part lies beyond its tokens");
    bag.mask.resize(len);
    for (Eigen::Index t = 0; t < len; ++t) bag.mask[t] = t >= s.mask_offset() ? 1 : 0;
    out.push_back(std::move(bag));
  }
  if (out.empty()) throw Error(ErrorKind::input, "cli", std::string("no statements in the ") + std::string(to_string(split)) + " split");
  return out;
}

inline BagsByClass group_by_label(const std::vector<StatementBag>& bags) {
  BagsByClass out;
  for (const auto& b : bags) out[b.statement->label].push_back({b.rows, 0, b.mask});
  return out;
}

/// Signed score of a binary probe: max over the bag for sAwMIL probes, last
/// token for the mean-difference probe.
inline double binary_score(const LinearProbe& p, const Eigen::MatrixXd& rows) {
  return p.kind == ProbeKind::mean_diff ? p.last_token_score(rows) : p.bag_score(rows);
}

/// +1 when the statement belongs to the probe's positive class.
inline int binary_target(const LinearProbe& p, Label label) { return label == target_label(p.kind) ? 1 : -1; }

inline AnyProbe load_probe(const fs::path& path) {
  const auto bytes = io_detail::read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "probes", std::string("probe file is not JSON: ") + e.what());
  }
  return probe_from_json(j);
}

inline json probe_json(const AnyProbe& probe, const std::string& hash) {
  json j = std::visit([](const auto& p) { return to_json(p); }, probe);
  j["config_hash"] = hash;
  return j;
}

inline void check_dim(const AnyProbe& probe, const ActivationSet& acts) {
  const auto d = std::visit([](const auto& p) { return p.dim(); }, probe);
  if (d != acts.hidden_width()) throw Error(ErrorKind::input, "cli", "probe dimension differs from activation width");
}

// ---------------------------------------------------------------------------
// Options.

struct ForgeArgs {
  std::string dataset = "city_locations";
  std::string entities;
  std::string blocklist;
  std::string out;
  std::uint64_t seed = 0;
  std::string plan = "reference";
  int per_cell = 0;
  double train = 0.55, calibration = 0.20, test = 0.25;
};

struct TrainArgs {
  std::string statements, activations, out;
  std::string probe = "multiclass";
  double cost = 1.0, eta = 0.1, tol = 1e-4, ridge = -1.0;
  int max_iter = 10000, threads = 1, n_boot = 1000;
  std::uint64_t seed = 0;
};

struct CalibrateArgs {
  std::string probe, statements, activations, out;
  double alpha = 0.1;
};

struct EvaluateArgs {
  std::string probe, statements, activations, out;
  std::string split = "test";
  std::string ood_label;  // neither|abstain; empty picks the per-probe default
  std::string dataset;
  std::string source_dataset;
  int n_boot = 1000;
  std::uint64_t seed = 0;
};

struct InterveneArgs {
  std::string traces, out;
  double alpha = 0.05;
};

struct CompareArgs {
  std::vector<std::string> outputs;
  std::string out;
  double top_fraction = 0.5;
  double log_base = 2.718281828459045;
};

// ---------------------------------------------------------------------------
// Commands.

inline int run_forge(const ForgeArgs& a) {
  const auto dataset = parse_dataset(a.dataset);
  if (!dataset) throw Error(ErrorKind::input, "cli", "unknown dataset " + a.dataset);
  if (a.plan != "reference" && a.plan != "balanced") throw Error(ErrorKind::input, "cli", "plan must be reference or balanced");
  json config{{"dataset", a.dataset}, {"entities", path_key(a.entities)}, {"blocklist", path_key(a.blocklist)},
              {"out", path_key(a.out)},  {"seed", a.seed},                    {"plan", a.plan},
              {"per_cell", a.per_cell},  {"ratios", {a.train, a.calibration, a.test}}};
  const auto hash = config_hash(config);

  const auto facts = parse_entity_table(io_detail::read_file_bytes(a.entities), *dataset);
  const auto blocklist = a.blocklist.empty() ? std::set<std::string>{} : parse_blocklist(io_detail::read_file_bytes(a.blocklist));
  LabelPlan plan = LabelPlan::city_locations_reference();
  if (a.plan == "balanced") {
    const int cell = a.per_cell > 0 ? a.per_cell : static_cast<int>(facts.size());
    plan = {cell, cell, cell, cell, cell, cell};
  }
  SyntheticOptions syn;
  syn.seed = a.seed + 1;
  syn.pair_count = std::max(plan.neither_affirmative, plan.neither_negated);
  syn.subject_count = std::max(2, (syn.pair_count + 3) / 4);
  syn.object_count = std::max(2, (syn.pair_count + 5) / 6);
  const auto synthetic = plan.neither_affirmative + plan.neither_negated > 0
                             ? synthesize_facts(facts, *dataset, blocklist, syn)
                             : std::vector<Fact>{};
  auto records = forge_statements(facts, synthetic, TemplateSpec::for_dataset(*dataset), plan,
                                  {a.seed, std::string(to_string(*dataset)).substr(0, 4) + "-"});
  records = split_dataset(std::move(records), {a.train, a.calibration, a.test}, a.seed + 2);

  publish({{a.out, format_statements(records)}}, a.out + ".manifest.json", "forge", config, hash,
          {a.entities, a.blocklist});
  return 0;
}

inline int run_train(const TrainArgs& a) {
  const bool multiclass = a.probe == "multiclass";
  const auto kind = parse_probe_kind(a.probe);
  if (!multiclass && !kind) throw Error(ErrorKind::input, "cli", "unknown probe kind " + a.probe);
  json config{{"statements", path_key(a.statements)}, {"activations", path_key(a.activations)},
              {"out", path_key(a.out)},               {"probe", a.probe},
              {"cost", a.cost},                       {"eta", a.eta},
              {"tol", a.tol},                         {"max_iter", a.max_iter},
              {"ridge", a.ridge},                     {"n_boot", a.n_boot},
              {"seed", a.seed}};
  const auto hash = config_hash(config);

  const auto statements = read_statements(a.statements);
  const auto acts = read_activation_file(a.activations);
  const auto bags = collect_bags(statements, acts, Split::train);
  MilConfig mil{a.eta, a.cost, a.tol, a.max_iter};

  AnyProbe probe;
  std::vector<Outcome> outcomes;
  std::vector<std::string> classes;
  if (multiclass) {
    const auto by_class = group_by_label(bags);
    const auto standardizer = fit_standardizer(by_class);
    std::array<LinearProbe, 3> members;
    if (a.threads > 1) {
      std::array<std::future<LinearProbe>, 3> jobs;
      for (int k = 0; k < 3; ++k)
        jobs[k] = std::async(std::launch::async, [&, k] {
          return train_one_vs_all(by_class, one_vs_all_kind(kAllLabels[k]), mil, standardizer);
        });
      for (int k = 0; k < 3; ++k) members[k] = jobs[k].get();
    } else {
      for (int k = 0; k < 3; ++k) members[k] = train_one_vs_all(by_class, one_vs_all_kind(kAllLabels[k]), mil, standardizer);
    }
    std::vector<Eigen::MatrixXd> rows;
    std::vector<Label> labels;
    for (const auto& b : bags) {
      rows.push_back(b.rows);
      labels.push_back(b.statement->label);
    }
    const auto mc = fit_multiclass(members, rows, labels);
    for (const auto& b : bags) {
      const auto p = predict_multiclass(mc, b.rows);
      outcomes.push_back({index_of(b.statement->label),
                          static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin())});
    }
    classes = {"true", "false", "neither"};
    probe = mc;
  } else if (*kind == ProbeKind::mean_diff) {
    std::vector<Eigen::VectorXd> pos, neg;
    for (const auto& b : bags) {
      if (b.statement->label == Label::neither) continue;
      (b.statement->label == Label::true_ ? pos : neg).push_back(b.rows.bottomRows(1).transpose());
    }
    auto stack = [](const std::vector<Eigen::VectorXd>& v, Eigen::Index d) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), d);
      for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
      return m;
    };
    const auto d = acts.hidden_width();
    const Eigen::MatrixXd P = stack(pos, d), N = stack(neg, d);
    if (P.rows() < 2 || N.rows() < 2)
      throw Error(ErrorKind::input, "cli", "mean-difference training needs at least two true and two false statements");
    const double ridge = a.ridge >= 0.0 ? a.ridge : default_ridge(P, N);
    const auto lp = to_linear_probe(train_mean_diff(P, N, ridge));
    for (const auto& b : bags) {
      if (b.statement->label == Label::neither) continue;
      outcomes.push_back({index_of(b.statement->label), lp.last_token_score(b.rows) >= 0.0 ? 0 : 1});
    }
    classes = {"true", "false"};
    probe = lp;
  } else {
    const auto lp = train_one_vs_all(group_by_label(bags), *kind, mil);
    for (const auto& b : bags)
      outcomes.push_back({binary_target(lp, b.statement->label) == 1 ? 0 : 1, lp.bag_score(b.rows) >= 0.0 ? 0 : 1});
    classes = {std::string(to_string(target_label(*kind))), "rest"};
    probe = lp;
  }

  const auto report = make_report(outcomes, static_cast<int>(classes.size()), a.n_boot, a.seed);
  json rj = report_to_json(report, classes);
  rj["split"] = "train";
  rj["probe"] = a.probe;
  rj["config_hash"] = hash;
  const fs::path out(a.out);
  publish({{out / "probe.json", dump(probe_json(probe, hash))}, {out / "train_report.json", dump(rj)}},
          out / "manifest.json", "train", config, hash, {a.statements, a.activations});
  return 0;
}

inline int run_calibrate(const CalibrateArgs& a) {
  json config{{"probe", path_key(a.probe)},
              {"statements", path_key(a.statements)},
              {"activations", path_key(a.activations)},
              {"out", path_key(a.out)},
              {"alpha", a.alpha}};
  const auto hash = config_hash(config);
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw Error(ErrorKind::input, "cli", "alpha must lie in (0,1)");

  auto probe = load_probe(a.probe);
  const auto statements = read_statements(a.statements);
  const auto acts = read_activation_file(a.activations);
  check_dim(probe, acts);
  const auto bags = collect_bags(statements, acts, Split::calibration);

  if (auto* mc = std::get_if<MulticlassProbe>(&probe)) {
    std::vector<MulticlassSample> samples;
    for (const auto& b : bags) {
      const auto p = predict_multiclass(*mc, b.rows);
      samples.push_back({{p.begin(), p.end()}, index_of(b.statement->label)});
    }
    mc->calibration = calibrate(std::span<const MulticlassSample>(samples), a.alpha);
  } else {
    auto& lp = std::get<LinearProbe>(probe);
    std::vector<BinarySample> samples;
    for (const auto& b : bags) {
      if (lp.kind == ProbeKind::mean_diff && b.statement->label == Label::neither) continue;
      samples.push_back({binary_score(lp, b.rows), binary_target(lp, b.statement->label)});
    }
    lp.calibration = calibrate(std::span<const BinarySample>(samples), a.alpha);
  }
  const fs::path out(a.out);
  publish({{out / "probe.json", dump(probe_json(probe, hash))}}, out / "manifest.json", "calibrate", config, hash,
          {a.probe, a.statements, a.activations});
  return 0;
}

inline int run_evaluate(const EvaluateArgs& a, std::string_view command) {
  const auto split = parse_split(a.split);
  if (!split) throw Error(ErrorKind::input, "cli", "unknown split " + a.split);
  if (!a.ood_label.empty() && a.ood_label != "neither" && a.ood_label != "abstain")
    throw Error(ErrorKind::input, "cli", "ood-label must be neither or abstain");

  auto probe = load_probe(a.probe);
  const bool multiclass = std::holds_alternative<MulticlassProbe>(probe);
  const std::string ood = !a.ood_label.empty() ? a.ood_label : multiclass ? "abstain" : "neither";
  const std::string dataset = !a.dataset.empty() ? a.dataset : fs::path(a.statements).stem().string();
  json config{{"probe", path_key(a.probe)}, {"statements", path_key(a.statements)},
              {"activations", path_key(a.activations)}, {"out", path_key(a.out)},
              {"split", a.split},                       {"ood_label", ood},
              {"dataset", dataset},                     {"source_dataset", a.source_dataset},
              {"n_boot", a.n_boot},                     {"seed", a.seed}};
  const auto hash = config_hash(config);

  const auto statements = read_statements(a.statements);
  const auto acts = read_activation_file(a.activations);
  check_dim(probe, acts);
  const auto bags = collect_bags(statements, acts, *split);

  std::vector<Outcome> outcomes;
  std::vector<std::string> classes{"true", "false", "neither"};
  std::vector<TernaryRow> ternary;
  std::string kind_name = "multiclass";
  if (const auto* mc = std::get_if<MulticlassProbe>(&probe)) {
    for (const auto& b : bags) {
      const auto p = predict_multiclass(*mc, b.rows);
      std::optional<int> pred;
      if (mc->calibration) {
        const auto set = prediction_set(*mc->calibration, multiclass_candidates(p));
        pred = decide(set);
      } else {
        pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      }
      if (!pred && ood == "neither") pred = index_of(Label::neither);
      outcomes.push_back({index_of(b.statement->label), pred});
      ternary.push_back({acts.model_id, dataset, acts.layer_index, 0.0, b.statement->statement_id,
                         std::string(to_string(b.statement->label)), p, !pred.has_value()});
    }
  } else {
    const auto& lp = std::get<LinearProbe>(probe);
    kind_name = std::string(to_string(lp.kind));
    const bool md = lp.kind == ProbeKind::mean_diff;
    if (!md) classes = {std::string(to_string(target_label(lp.kind))), "rest"};
    for (const auto& b : bags) {
      const double s = binary_score(lp, b.rows);
      std::optional<int> sign;
      if (lp.calibration) {
        const auto set = prediction_set(*lp.calibration, binary_candidates(s));
        if (const auto d = decide(set)) sign = *d == 0 ? 1 : -1;
      } else {
        sign = s >= 0.0 ? 1 : -1;
      }
      if (md) {
        std::optional<int> pred;
        if (sign) pred = *sign == 1 ? index_of(Label::true_) : index_of(Label::false_);
        else if (ood == "neither") pred = index_of(Label::neither);
        outcomes.push_back({index_of(b.statement->label), pred});
      } else {
        std::optional<int> pred;
        if (sign) pred = *sign == 1 ? 0 : 1;
        outcomes.push_back({binary_target(lp, b.statement->label) == 1 ? 0 : 1, pred});
      }
    }
  }

  const auto report = make_report(outcomes, static_cast<int>(classes.size()), a.n_boot, a.seed);
  json rj = report_to_json(report, classes);
  rj["probe"] = kind_name;
  rj["model_id"] = acts.model_id;
  rj["layer"] = acts.layer_index;
  rj["dataset"] = dataset;
  rj["split"] = a.split;
  rj["ood_label"] = ood;
  if (command == "generalize") {
    rj["protocol"] = "cross_dataset";
    rj["source_dataset"] = a.source_dataset;
  }
  rj["config_hash"] = hash;

  const fs::path out(a.out);
  std::vector<Artifact> artifacts{{out / "report.json", dump(rj)}, {out / "confusion.csv", confusion_csv(report, classes)}};
  if (!ternary.empty()) {
    std::string csv = std::string(kTernaryHeader) + "\n";
    for (auto& row : ternary) {
      row.layer_w_mcc = report.w_mcc;
      csv += format_ternary_row(row) + "\n";
    }
    artifacts.push_back({out / "ternary.csv", std::move(csv)});
  }
  publish(artifacts, out / "manifest.json", command, config, hash, {a.probe, a.statements, a.activations});
  return 0;
}

inline int run_intervene(const InterveneArgs& a) {
  json config{{"traces", path_key(a.traces)}, {"alpha", a.alpha}, {"out", path_key(a.out)}};
  const auto hash = config_hash(config);
  const auto traces = read_traces(a.traces);
  auto j = summary_to_json(summarize(traces, a.alpha), a.alpha);
  j["config_hash"] = hash;
  publish({{a.out, dump(j)}}, a.out + ".manifest.json", "intervene", config, hash, {a.traces});
  return 0;
}

inline int run_compare(const CompareArgs& a) {
  if (a.outputs.size() < 1) throw Error(ErrorKind::input, "cli", "compare needs ternary output files");
  std::vector<std::string> keys;
  for (const auto& p : a.outputs) keys.push_back(path_key(p));
  std::sort(keys.begin(), keys.end());
  json config{{"outputs", keys}, {"out", path_key(a.out)}, {"top_fraction", a.top_fraction}, {"log_base", a.log_base}};
  const auto hash = config_hash(config);

  // Rows from all files are merged, so one model may span several files.
  std::map<std::string, ModelOutputs> merged;
  for (const auto& p : a.outputs)
    for (auto& mo : parse_ternary_outputs(io_detail::read_file_bytes(p))) {
      auto& target = merged[mo.model_id];
      target.model_id = mo.model_id;
      for (auto& [ds, outs] : mo.datasets) {
        auto& dst = target.datasets[ds];
        for (auto& [layer, score] : outs.layer_scores) dst.layer_scores[layer] = score;
        for (auto& [layer, stmts] : outs.layers)
          for (auto& [id, o] : stmts)
            if (!dst.layers[layer].emplace(id, o).second)
              throw Error(ErrorKind::duplication, "analysis", "statement " + id + " repeated for model " + mo.model_id);
      }
    }
  std::vector<ModelOutputs> models;
  for (auto& [id, mo] : merged) models.push_back(std::move(mo));
  if (models.size() < 2) throw Error(ErrorKind::input, "cli", "compare needs at least two models");
  const auto dm = build_distance_matrix(models, a.top_fraction, a.log_base);
  const auto tree = minimum_spanning_tree(dm);
  auto mst = mst_to_json(tree);
  mst["config_hash"] = hash;
  const fs::path out(a.out);
  std::vector<fs::path> inputs(a.outputs.begin(), a.outputs.end());
  publish({{out / "distances.csv", distance_csv(dm)}, {out / "mst.json", dump(mst)}}, out / "manifest.json", "compare",
          config, hash, inputs);
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point.

inline void print_error(std::ostream& err, std::string_view code, std::string_view module, std::string_view message) {
  json j;
  j["error"] = {{"code", code}, {"module", module}, {"message", message}};
  err << j.dump() << "\n";
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Veracity probes over LLM activations", "veriprobe"};
  app.set_config("--config", "", "TOML or INI file with option defaults");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  ForgeArgs forge;
  auto* f = app.add_subcommand("forge", "Generate a labelled statement dataset with entity-exclusive splits");
  f->add_option("--dataset", forge.dataset, "city_locations, medical_indications or word_definitions")->capture_default_str();
  f->add_option("--entities", forge.entities, "Entity CSV (subject,object or subject,relation,object)")->required();
  f->add_option("--blocklist", forge.blocklist, "Names synthetic entities must avoid, one per line");
  f->add_option("--out", forge.out, "Output JSON-lines file")->required();
  f->add_option("--seed", forge.seed)->capture_default_str();
  f->add_option("--plan", forge.plan, "reference or balanced")->capture_default_str();
  f->add_option("--per-cell", forge.per_cell, "Statements per label/polarity cell for the balanced plan");
  f->add_option("--train-ratio", forge.train)->capture_default_str();
  f->add_option("--calibration-ratio", forge.calibration)->capture_default_str();
  f->add_option("--test-ratio", forge.test)->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a probe on the train split");
  t->add_option("--statements", train.statements)->required();
  t->add_option("--activations", train.activations)->required();
  t->add_option("--probe", train.probe, "is_true|is_false|is_neither|mean_diff|multiclass")->capture_default_str();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--cost,-C", train.cost)->capture_default_str();
  t->add_option("--eta", train.eta)->capture_default_str();
  t->add_option("--tol", train.tol)->capture_default_str();
  t->add_option("--max-iter", train.max_iter)->capture_default_str();
  t->add_option("--ridge", train.ridge, "Mean-difference ridge; negative selects the trace-scaled default")->capture_default_str();
  t->add_option("--threads", train.threads)->capture_default_str();
  t->add_option("--n-boot", train.n_boot)->capture_default_str();
  t->add_option("--seed", train.seed)->capture_default_str();

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Fit conformal thresholds on the calibration split");
  c->add_option("--probe", cal.probe)->required();
  c->add_option("--statements", cal.statements)->required();
  c->add_option("--activations", cal.activations)->required();
  c->add_option("--out", cal.out)->required();
  c->add_option("--alpha", cal.alpha)->capture_default_str();

  EvaluateArgs eval, gen;
  auto add_eval = [](CLI::App* sub, EvaluateArgs& e) {
    sub->add_option("--probe", e.probe)->required();
    sub->add_option("--statements", e.statements)->required();
    sub->add_option("--activations", e.activations)->required();
    sub->add_option("--out", e.out)->required();
    sub->add_option("--split", e.split)->capture_default_str();
    sub->add_option("--ood-label", e.ood_label, "How abstentions count: neither or abstain");
    sub->add_option("--dataset", e.dataset, "Dataset name for reports (default: statements file stem)");
    sub->add_option("--n-boot", e.n_boot)->capture_default_str();
    sub->add_option("--seed", e.seed)->capture_default_str();
  };
  auto* e = app.add_subcommand("evaluate", "Score a probe on a split");
  add_eval(e, eval);
  auto* g = app.add_subcommand("generalize", "Score a probe on the test split of another dataset");
  add_eval(g, gen);
  g->add_option("--source-dataset", gen.source_dataset, "Dataset the probe was trained on");

  InterveneArgs iv;
  auto* i = app.add_subcommand("intervene", "Success rate, binomial test and locality for intervention traces");
  i->add_option("--traces", iv.traces)->required();
  i->add_option("--alpha", iv.alpha, "Significance level")->capture_default_str();
  i->add_option("--out", iv.out)->required();

  CompareArgs cmp;
  auto* m = app.add_subcommand("compare", "Distances and minimum spanning tree between models");
  m->add_option("--outputs", cmp.outputs, "Ternary CSV files from evaluate")->required();
  m->add_option("--out", cmp.out)->required();
  m->add_option("--top-fraction", cmp.top_fraction)->capture_default_str();
  m->add_option("--log-base", cmp.log_base)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) return app.exit(ex);  // --help, --version
    print_error(err, "input", "cli", ex.what());
    return exit_code(ErrorKind::input);
  }

  try {
    if (*f) return run_forge(forge);
    if (*t) return run_train(train);
    if (*c) return run_calibrate(cal);
    if (*e) return run_evaluate(eval, "evaluate");
    if (*g) return run_evaluate(gen, "generalize");
    if (*i) return run_intervene(iv);
    if (*m) return run_compare(cmp);
  } catch (const Error& ex) {
    print_error(err, to_string(ex.kind()), ex.module(), ex.what());
    return exit_code(ex.kind());
  } catch (const std::exception& ex) {
    print_error(err, "input", "cli", ex.what());
    return exit_code(ErrorKind::input);
  }
  return exit_code(ErrorKind::input);
}

}  // namespace veriprobe::cli
