#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridse {

// Parse failures carry the 1-based line number of the offending record.
class ParseError : public std::runtime_error {
public:
  enum class Kind {
    Syntax,
    DuplicateBusId,
    MissingSlack,
    DanglingEndpoint,
    UnknownMeasurementKind,
    NonPositiveVariance,
    UnresolvableLocation,
  };

  ParseError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        kind_(kind),
        line_(line) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

private:
  Kind kind_;
  std::size_t line_;
};

// Branch with r = x = 0 has no series admittance.
class SingularBranchError : public std::runtime_error {
public:
  SingularBranchError(int from, int to)
      : std::runtime_error("branch " + std::to_string(from) + "-" +
                           std::to_string(to) + " has zero series impedance"),
        from_(from),
        to_(to) {}

  int from() const noexcept { return from_; }
  int to() const noexcept { return to_; }

private:
  int from_;
  int to_;
};

class DimensionMismatchError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class IndexOutOfRangeError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

// Cholesky hit a non-positive pivot; carries the failing column.
class NotPositiveDefiniteError : public std::runtime_error {
public:
  explicit NotPositiveDefiniteError(std::size_t column)
      : std::runtime_error("matrix not positive definite at column " +
                           std::to_string(column)),
        column_(column) {}

  std::size_t column() const noexcept { return column_; }

private:
  std::size_t column_;
};

// A vertex kernel threw; carries the failing vertex.
class StageError : public std::runtime_error {
public:
  StageError(std::size_t vertex, const std::string& what)
      : std::runtime_error("vertex " + std::to_string(vertex) + ": " + what),
        vertex_(vertex) {}

  std::size_t vertex() const noexcept { return vertex_; }

private:
  std::size_t vertex_;
};

// A kernel tried to read peer outputs of the superstep in flight.
class SuperstepViolationError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace gridse
