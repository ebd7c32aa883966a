#pragma once

#include <stdexcept>
#include <string>

namespace dllap {

// Precondition or shape violation.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unsupported file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A named tensor required by the layer graph is absent from the archive.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration is valid but cannot run in the requested mode (e.g. streaming
// a graph with lookahead).
class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not allowed in the object's current lifecycle state.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dllap
