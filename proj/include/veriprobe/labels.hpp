#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace veriprobe {

/// Veracity label of a statement. The numeric values double as class indices
/// in confusion matrices and multiclass probability vectors.
enum class Label : int { true_ = 0, false_ = 1, neither = 2 };

enum class Polarity { affirmative, negated };

enum class Split { train, calibration, test };

inline constexpr std::array<Label, 3> kAllLabels = {Label::true_, Label::false_, Label::neither};

inline constexpr int index_of(Label label) { return static_cast<int>(label); }

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::true_: return "true";
    case Label::false_: return "false";
    case Label::neither: return "neither";
  }
  return "";
}

inline std::string_view to_string(Polarity polarity) {
  return polarity == Polarity::affirmative ? "affirmative" : "negated";
}

inline std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::calibration: return "calibration";
    case Split::test: return "test";
  }
  return "";
}

inline std::optional<Label> parse_label(std::string_view text) {
  if (text == "true") return Label::true_;
  if (text == "false") return Label::false_;
  if (text == "neither") return Label::neither;
  return std::nullopt;
}

inline std::optional<Polarity> parse_polarity(std::string_view text) {
  if (text == "affirmative") return Polarity::affirmative;
  if (text == "negated") return Polarity::negated;
  return std::nullopt;
}

inline std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "calibration") return Split::calibration;
  if (text == "test") return Split::test;
  return std::nullopt;
}

}  // namespace veriprobe
