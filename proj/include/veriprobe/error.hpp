#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace veriprobe {

enum class ErrorKind {
  input,
  convergence,
  degenerate_filter,
  format,
  truncation,
  data,
  schema,
  duplication,
  range,
  singular,
  tie,
  generation,
  infeasible,
  undefined_metric,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::degenerate_filter: return "degenerate_filter";
    case ErrorKind::format: return "format";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::data: return "data";
    case ErrorKind::schema: return "schema";
    case ErrorKind::duplication: return "duplication";
    case ErrorKind::range: return "range";
    case ErrorKind::singular: return "singular";
    case ErrorKind::tie: return "tie";
    case ErrorKind::generation: return "generation";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::undefined_metric: return "undefined_metric";
  }
  return "unknown";
}

/// Process exit code for an error kind: 2 input, 3 convergence,
/// 4 degenerate filter, 5 format.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::convergence: return 3;
    case ErrorKind::degenerate_filter: return 4;
    case ErrorKind::format:
    case ErrorKind::truncation: return 5;
    default: return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(message), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

/// Solver ran out of iterations; carries the last projected-gradient violation.
class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& message, double final_gap)
      : Error(ErrorKind::convergence, std::move(module), message), final_gap_(final_gap) {}

  double final_gap() const noexcept { return final_gap_; }

 private:
  double final_gap_;
};

}  // namespace veriprobe
