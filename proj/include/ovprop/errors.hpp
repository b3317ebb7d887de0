#pragma once

#include <stdexcept>
#include <string>

namespace ovprop {

// Error kinds surfaced through the CLI's machine-readable report. Each maps
// to one `kind` string (see error_kind()).

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An extrinsic code whose angle or axis cannot be recovered.
class DegenerateCode : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooFewPoints : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Synthetic placement could not find non-overlapping positions.
class PackingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid-argument";
  if (dynamic_cast<const DegenerateCode*>(&e)) return "degenerate-code";
  if (dynamic_cast<const TooFewPoints*>(&e)) return "too-few-points";
  if (dynamic_cast<const PackingFailure*>(&e)) return "packing-failure";
  if (dynamic_cast<const FormatError*>(&e)) return "format-error";
  return "internal";
}

}  // namespace ovprop
