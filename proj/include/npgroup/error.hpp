#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace npgroup {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, inconsistent shapes, violated preconditions.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A computation that could not be completed on otherwise valid input.
/// The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularFit : public NumericalError {
public:
    explicit SingularFit(std::size_t point)
        : NumericalError("singular local fit at observation " + std::to_string(point) +
                         " (bandwidth too small for local support)"),
          point_index(point) {}
    std::size_t point_index;
};

class InfeasibleRates : public ValidationError {
public:
    InfeasibleRates(std::size_t r, int q)
        : ValidationError("no bandwidth exponent satisfies the rate conditions for r=" +
                          std::to_string(r) + ", q=" + std::to_string(q)),
          r(r), q(q) {}
    std::size_t r;
    int q;
};

class TooFewObservations : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class TooFewCells : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyGroup : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyInput : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DegenerateVariance : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateCovariance : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line(line) {}
    ParseError(std::vector<std::size_t> lines, const std::string& what)
        : ValidationError(what), line(lines.empty() ? 0 : lines.front()), lines(std::move(lines)) {}
    std::size_t line;
    std::vector<std::size_t> lines;
};

class MissingColumn : public ValidationError {
public:
    explicit MissingColumn(const std::string& name)
        : ValidationError("missing column '" + name + "'"), name(name) {}
    std::string name;
};

class OverlappingGroups : public ValidationError {
public:
    explicit OverlappingGroups(const std::string& column)
        : ValidationError("column '" + column + "' is assigned to more than one group"),
          column(column) {}
    std::string column;
};

class UnassignedColumn : public ValidationError {
public:
    explicit UnassignedColumn(const std::string& column)
        : ValidationError("column '" + column + "' is not assigned to any group"),
          column(column) {}
    std::string column;
};

}  // namespace npgroup
