#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quartree {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input too small or structurally empty (fewer than two leaves, an empty
// group, a partition with fewer than four members, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Arguments that violate an operation's precondition.
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// CSV/table validation failures.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Iterative solvers and training runs that produced non-finite values or
// failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace quartree
