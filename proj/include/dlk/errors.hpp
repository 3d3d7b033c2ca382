#pragma once

#include <stdexcept>
#include <string>

namespace dlk {

// Base for everything this library throws.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input that a caller can fix: bad files, bad shapes, bad values.
class InputError : public Error {
 public:
  using Error::Error;
};

// Grid/layer dimensions that do not fit together.
class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

// Unreadable or syntactically invalid input (JSON text, IDX bytes).
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

// Structurally wrong document: missing/unknown/wrongly-typed fields.
class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

// Well-formed but unacceptable value (non-finite weight, label out of range).
class ValueError : public InputError {
 public:
  using InputError::InputError;
};

// Filesystem failure, message names the path.
class IoError : public InputError {
 public:
  using InputError::InputError;
};

// A bug in this library or in a kernel program, not in caller input.
class InternalError : public Error {
 public:
  using Error::Error;
};

// Out-of-bounds buffer access inside a threadgroup program; the message
// names the buffer, phase and thread id.
class IndexFault : public InternalError {
 public:
  using InternalError::InternalError;
};

}  // namespace dlk
