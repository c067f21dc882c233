#pragma once

// Readers and writers for the three on-disk inputs: activation containers,
// statement datasets (JSON lines) and intervention probability traces (CSV).

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "veriprobe/error.hpp"
#include "veriprobe/labels.hpp"

namespace veriprobe {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ActivationRecord {
  std::string statement_id;
  RowMatrixF embeddings;  // L x d, one row per token

  Eigen::Index token_count() const { return embeddings.rows(); }
};

struct ActivationSet {
  std::string model_id;
  int layer_index = 0;
  std::vector<ActivationRecord> records;

  Eigen::Index hidden_width() const { return records.empty() ? 0 : records.front().embeddings.cols(); }

  const ActivationRecord* find(std::string_view statement_id) const {
    for (const auto& r : records)
      if (r.statement_id == statement_id) return &r;
    return nullptr;
  }
};

struct StatementRecord {
  std::string statement_id;
  std::string text;
  int pre_actualized_len = 0;
  Label label = Label::true_;
  Polarity polarity = Polarity::affirmative;
  std::vector<std::string> entity_ids;
  std::optional<Split> split;
  // Index of the first actualized model token, written by activation
  // ingestion when model tokens do not line up with whitespace words.
  std::optional<int> actualized_token_offset;

  int mask_offset() const { return actualized_token_offset.value_or(pre_actualized_len); }
};

struct TraceRecord {
  std::string statement_id;
  double p_base = 1.0;
  double p_plus = 1.0;
  double p_minus = 1.0;
  double r_base = 1.0;
  double r_plus = 1.0;
  double r_minus = 1.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

namespace io_detail {

inline constexpr char kActivationMagic[8] = {'V', 'P', 'A', 'C', 'T', '\0', '\0', '\1'};

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::input, "tensor-io", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::input, "tensor-io", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::uint32_t load_u32_le(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

inline void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline float load_f32_le(const char* p) {
  std::uint32_t bits = load_u32_le(p);
  return std::bit_cast<float>(bits);
}

inline void append_f32_le(std::string& out, float value) {
  append_u32_le(out, std::bit_cast<std::uint32_t>(value));
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

inline std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::string tmp(text);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    fields.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::vector<std::string_view> lines_of(std::string_view bytes) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto nl = bytes.find('\n', start);
    if (nl == std::string_view::npos) nl = bytes.size();
    auto line = bytes.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

inline int whitespace_token_count(std::string_view text) {
  int count = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Activation container: 8-byte magic, u32 LE header length, JSON header,
// then row-major little-endian float32 payloads in record order.

inline std::string encode_activations(const ActivationSet& set) {
  nlohmann::ordered_json header;
  header["model_id"] = set.model_id;
  header["layer_index"] = set.layer_index;
  header["dtype"] = "f32";
  header["records"] = nlohmann::ordered_json::array();
  for (const auto& r : set.records) {
    nlohmann::ordered_json entry;
    entry["statement_id"] = r.statement_id;
    entry["rows"] = r.embeddings.rows();
    entry["cols"] = r.embeddings.cols();
    header["records"].push_back(std::move(entry));
  }
  const std::string header_text = header.dump();

  std::string out(io_detail::kActivationMagic, sizeof(io_detail::kActivationMagic));
  io_detail::append_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (const auto& r : set.records) {
    const float* data = r.embeddings.data();
    for (Eigen::Index i = 0; i < r.embeddings.size(); ++i) io_detail::append_f32_le(out, data[i]);
  }
  return out;
}

inline ActivationSet decode_activations(std::string_view bytes) {
  const std::string module = "tensor-io";
  constexpr std::size_t kPrefix = sizeof(io_detail::kActivationMagic) + 4;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), io_detail::kActivationMagic, 8) != 0)
    throw Error(ErrorKind::format, module, "activation file: bad magic");
  const std::uint32_t header_len = io_detail::load_u32_le(bytes.data() + 8);
  if (bytes.size() < kPrefix + header_len)
    throw Error(ErrorKind::truncation, module, "activation file: header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPrefix, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, module, std::string("activation header: ") + e.what());
  }

  ActivationSet set;
  std::vector<std::pair<std::int64_t, std::int64_t>> shapes;
  try {
    if (header.at("dtype").get<std::string>() != "f32")
      throw Error(ErrorKind::format, module, "activation header: unsupported dtype");
    set.model_id = header.at("model_id").get<std::string>();
    set.layer_index = header.at("layer_index").get<int>();
    if (set.layer_index < 0) throw Error(ErrorKind::format, module, "activation header: negative layer_index");
    for (const auto& entry : header.at("records")) {
      ActivationRecord r;
      r.statement_id = entry.at("statement_id").get<std::string>();
      const auto rows = entry.at("rows").get<std::int64_t>();
      const auto cols = entry.at("cols").get<std::int64_t>();
      if (rows < 1 || cols < 1)
        throw Error(ErrorKind::format, module, "activation header: record " + r.statement_id + " has empty shape");
      shapes.emplace_back(rows, cols);
      set.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, module, std::string("activation header: ") + e.what());
  }

  std::uint64_t expected = 0;
  for (auto [rows, cols] : shapes) expected += static_cast<std::uint64_t>(rows * cols) * 4u;
  const std::uint64_t available = bytes.size() - kPrefix - header_len;
  if (available != expected)
    throw Error(ErrorKind::truncation, module,
                "activation payload is " + std::to_string(available) + " bytes, header declares " +
                    std::to_string(expected));

  std::set<std::string> seen;
  const char* cursor = bytes.data() + kPrefix + header_len;
  for (std::size_t k = 0; k < set.records.size(); ++k) {
    auto& r = set.records[k];
    auto [rows, cols] = shapes[k];
    if (!set.records.empty() && cols != shapes.front().second)
      throw Error(ErrorKind::data, module, "activation records disagree on hidden width");
    if (!seen.insert(r.statement_id).second)
      throw Error(ErrorKind::duplication, module, "duplicate statement_id " + r.statement_id);
    r.embeddings.resize(rows, cols);
    float* data = r.embeddings.data();
    for (std::int64_t i = 0; i < rows * cols; ++i, cursor += 4) {
      data[i] = io_detail::load_f32_le(cursor);
      if (!std::isfinite(data[i]))
        throw Error(ErrorKind::data, module, "non-finite activation in record " + r.statement_id);
    }
  }
  return set;
}

inline ActivationSet read_activation_file(const std::filesystem::path& path) {
  return decode_activations(io_detail::read_file_bytes(path));
}

inline void write_activation_file(const std::filesystem::path& path, const ActivationSet& set) {
  io_detail::write_file_bytes(path, encode_activations(set));
}

// ---------------------------------------------------------------------------
// Statements: one JSON object per line.

inline nlohmann::ordered_json statement_to_json(const StatementRecord& r) {
  nlohmann::ordered_json j;
  j["statement_id"] = r.statement_id;
  j["text"] = r.text;
  j["pre_actualized_len"] = r.pre_actualized_len;
  j["label"] = to_string(r.label);
  j["polarity"] = to_string(r.polarity);
  j["entity_ids"] = r.entity_ids;
  if (r.split) j["split"] = to_string(*r.split);
  if (r.actualized_token_offset) j["actualized_token_offset"] = *r.actualized_token_offset;
  return j;
}

inline StatementRecord statement_from_json(const nlohmann::json& j) {
  const std::string module = "tensor-io";
  StatementRecord r;
  try {
    r.statement_id = j.at("statement_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.pre_actualized_len = j.at("pre_actualized_len").get<int>();
    const auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw Error(ErrorKind::schema, module, "unknown label in " + r.statement_id);
    r.label = *label;
    const auto polarity = parse_polarity(j.at("polarity").get<std::string>());
    if (!polarity) throw Error(ErrorKind::schema, module, "unknown polarity in " + r.statement_id);
    r.polarity = *polarity;
    r.entity_ids = j.at("entity_ids").get<std::vector<std::string>>();
    if (j.contains("split")) {
      const auto split = parse_split(j.at("split").get<std::string>());
      if (!split) throw Error(ErrorKind::schema, module, "unknown split in " + r.statement_id);
      r.split = *split;
    }
    if (j.contains("actualized_token_offset")) r.actualized_token_offset = j.at("actualized_token_offset").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, module, std::string("statement record: ") + e.what());
  }
  if (r.pre_actualized_len < 0 || r.pre_actualized_len >= io_detail::whitespace_token_count(r.text))
    throw Error(ErrorKind::schema, module, "pre_actualized_len out of range in " + r.statement_id);
  if (r.actualized_token_offset && *r.actualized_token_offset < 0)
    throw Error(ErrorKind::schema, module, "negative actualized_token_offset in " + r.statement_id);
  return r;
}

inline std::vector<StatementRecord> parse_statements(std::string_view bytes) {
  std::vector<StatementRecord> records;
  std::set<std::string> seen;
  for (auto line : io_detail::lines_of(bytes)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::format, "tensor-io", std::string("statements: ") + e.what());
    }
    auto r = statement_from_json(j);
    if (!seen.insert(r.statement_id).second)
      throw Error(ErrorKind::duplication, "tensor-io", "duplicate statement_id " + r.statement_id);
    records.push_back(std::move(r));
  }
  return records;
}

inline std::string format_statements(const std::vector<StatementRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += statement_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<StatementRecord> read_statements(const std::filesystem::path& path) {
  return parse_statements(io_detail::read_file_bytes(path));
}

inline void write_statements(const std::filesystem::path& path, const std::vector<StatementRecord>& records) {
  io_detail::write_file_bytes(path, format_statements(records));
}

// ---------------------------------------------------------------------------
// Traces: CSV with a fixed seven-column header.

inline constexpr std::string_view kTraceHeader = "statement_id,p_base,p_plus,p_minus,r_base,r_plus,r_minus";

inline std::vector<TraceRecord> parse_traces(std::string_view bytes) {
  const std::string module = "tensor-io";
  auto lines = io_detail::lines_of(bytes);
  if (lines.empty() || lines.front() != kTraceHeader)
    throw Error(ErrorKind::format, module, "traces: expected header '" + std::string(kTraceHeader) + "'");
  std::vector<TraceRecord> out;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = io_detail::split_csv_line(lines[i]);
    if (fields.size() != 7)
      throw Error(ErrorKind::format, module, "traces line " + std::to_string(i + 1) + ": expected 7 columns");
    TraceRecord r;
    r.statement_id = fields[0];
    double* slots[6] = {&r.p_base, &r.p_plus, &r.p_minus, &r.r_base, &r.r_plus, &r.r_minus};
    for (int k = 0; k < 6; ++k) {
      auto v = io_detail::parse_double(fields[k + 1]);
      if (!v) throw Error(ErrorKind::format, module, "traces line " + std::to_string(i + 1) + ": bad number");
      if (!(*v > 0.0 && *v <= 1.0))
        throw Error(ErrorKind::range, module,
                    "traces line " + std::to_string(i + 1) + ": probability outside (0,1]");
      *slots[k] = *v;
    }
    if (!seen.insert(r.statement_id).second)
      throw Error(ErrorKind::duplication, module, "duplicate statement_id " + r.statement_id);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_traces(const std::vector<TraceRecord>& traces) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& r : traces) {
    if (r.statement_id.find_first_of(",\n\r\"") != std::string::npos)
      throw Error(ErrorKind::format, "tensor-io", "statement_id not CSV-safe: " + r.statement_id);
    out += r.statement_id;
    for (double v : {r.p_base, r.p_plus, r.p_minus, r.r_base, r.r_plus, r.r_minus}) {
      out += ',';
      out += io_detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<TraceRecord> read_traces(const std::filesystem::path& path) {
  return parse_traces(io_detail::read_file_bytes(path));
}

inline void write_traces(const std::filesystem::path& path, const std::vector<TraceRecord>& traces) {
  io_detail::write_file_bytes(path, format_traces(traces));
}

}  // namespace veriprobe
