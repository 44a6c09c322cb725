#include "actlab/error.hpp"

#include <sstream>

namespace actlab {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::Arity: return "ArityError";
    case ErrorKind::NonConstExponent: return "NonConstExponent";
    case ErrorKind::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ShapeTooSmall: return "ShapeTooSmall";
    case ErrorKind::BadRange: return "BadRange";
    case ErrorKind::UnknownActivation: return "UnknownActivation";
    case ErrorKind::UnknownEquationId: return "UnknownEquationId";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::NotTrainable: return "NotTrainable";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::HashMismatch: return "HashMismatch";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::ProposerTimeout: return "ProposerTimeout";
    case ErrorKind::ProposerProtocol: return "ProposerProtocolError";
  }
  return "Unknown";
}

namespace {

std::string syntax_message(std::size_t position,
                           const std::vector<std::string>& expected,
                           const std::string& found) {
  std::ostringstream os;
  os << "syntax error at offset " << position << ": expected ";
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) os << (i + 1 == expected.size() ? " or " : ", ");
    os << expected[i];
  }
  os << ", found " << (found.empty() ? "end of input" : "'" + found + "'");
  return os.str();
}

}  // namespace

SyntaxError::SyntaxError(std::size_t position, std::vector<std::string> expected,
                         const std::string& found)
    : Error(ErrorKind::Syntax, syntax_message(position, expected, found)),
      position_(position),
      expected_(std::move(expected)) {}

ArityError::ArityError(std::string op, std::size_t got, std::size_t want,
                       std::size_t position)
    : Error(ErrorKind::Arity,
            "operator '" + op + "' at offset " + std::to_string(position) +
                " takes " + std::to_string(want) + " argument(s), got " +
                std::to_string(got)),
      op_(std::move(op)),
      got_(got),
      want_(want),
      position_(position) {}

NonFiniteOutput::NonFiniteOutput(std::size_t node_id)
    : Error(ErrorKind::NonFiniteOutput,
            "non-finite value produced at expression node " +
                std::to_string(node_id)),
      node_id_(node_id) {}

}  // namespace actlab
