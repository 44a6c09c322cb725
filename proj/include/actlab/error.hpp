#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace actlab {

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorKind {
  InvalidArgument,
  Syntax,
  Arity,
  NonConstExponent,
  NonFiniteOutput,
  ShapeMismatch,
  ShapeTooSmall,
  BadRange,
  UnknownActivation,
  UnknownEquationId,
  Domain,
  NotTrainable,
  SchemaVersionMismatch,
  HashMismatch,
  Io,
  ProposerTimeout,
  ProposerProtocol,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with the byte offset where it was detected and what the
/// parser would have accepted there.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::vector<std::string> expected,
              const std::string& found);

  std::size_t position() const noexcept { return position_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::vector<std::string> expected_;
};

class ArityError : public Error {
 public:
  ArityError(std::string op, std::size_t got, std::size_t want,
             std::size_t position);

  const std::string& op() const noexcept { return op_; }
  std::size_t got() const noexcept { return got_; }
  std::size_t want() const noexcept { return want_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string op_;
  std::size_t got_;
  std::size_t want_;
  std::size_t position_;
};

/// Raised when an expression evaluates to NaN/Inf. `node_id` is the postorder
/// index of the first node whose values became non-finite.
class NonFiniteOutput : public Error {
 public:
  explicit NonFiniteOutput(std::size_t node_id);

  std::size_t node_id() const noexcept { return node_id_; }

 private:
  std::size_t node_id_;
};

}  // namespace actlab
