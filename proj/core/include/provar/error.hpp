#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace provar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad numeric cell, missing header, ...).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what), row_(row), column_(column) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  /// 1-based data row (0 when the error is not tied to a row).
  std::size_t row() const { return row_; }
  /// 1-based column (0 when the error is not tied to a column).
  std::size_t column() const { return column_; }

 private:
  std::size_t row_ = 0;
  std::size_t column_ = 0;
};

/// Data that parses but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Covariate names or order disagree between a model and a dataset.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::vector<std::string> missing,
              std::vector<std::string> extra)
      : Error(what), missing_(std::move(missing)), extra_(std::move(extra)) {}

  const std::vector<std::string>& missing() const { return missing_; }
  const std::vector<std::string>& extra() const { return extra_; }

 private:
  std::vector<std::string> missing_;
  std::vector<std::string> extra_;
};

/// Rank-deficient or badly conditioned regression design.
class SingularDesignError : public Error {
 public:
  SingularDesignError(const std::string& what, std::vector<std::string> columns)
      : Error(what), columns_(std::move(columns)) {}

  /// Columns judged to be (nearly) linear combinations of the others.
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

}  // namespace provar
