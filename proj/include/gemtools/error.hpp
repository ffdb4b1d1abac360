#pragma once

#include <stdexcept>
#include <string>

namespace gemtools {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Argument,    ///< bad caller-supplied parameter
  Parse,       ///< malformed input file structure
  Value,       ///< a token that is not a legal value
  Validation,  ///< structurally valid input violating an invariant
  Degenerate,  ///< numerically degenerate data (e.g. no polymorphic SNPs)
  Constraint,  ///< infeasible optimisation constraints
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error argument_error(const std::string& msg) { return {ErrorKind::Argument, msg}; }
inline Error parse_error(const std::string& msg) { return {ErrorKind::Parse, msg}; }
inline Error value_error(const std::string& msg) { return {ErrorKind::Value, msg}; }
inline Error validation_error(const std::string& msg) { return {ErrorKind::Validation, msg}; }
inline Error degenerate_error(const std::string& msg) { return {ErrorKind::Degenerate, msg}; }
inline Error constraint_error(const std::string& msg) { return {ErrorKind::Constraint, msg}; }
inline Error io_error(const std::string& msg) { return {ErrorKind::Io, msg}; }

}  // namespace gemtools
