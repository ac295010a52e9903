#pragma once

#include <stdexcept>
#include <string>

namespace bym2 {

// Base class for all library failures.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file or configuration. `line` is 1-based, 0 when unknown.
struct parse_error : error {
  int line;
  explicit parse_error(const std::string& msg, int line_number = 0)
      : error(line_number > 0 ? "line " + std::to_string(line_number) + ": " + msg
                              : msg),
        line(line_number) {}
};

// Numerical failure: indefinite matrices, non-convergence, domain errors.
struct numeric_error : error {
  using error::error;
};

struct not_positive_definite : numeric_error {
  using numeric_error::numeric_error;
};

struct non_convergence : numeric_error {
  using numeric_error::numeric_error;
};

}  // namespace bym2
