#ifndef RULESHAP_ERROR_H_
#define RULESHAP_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ruleshap {

// Bad input or configuration. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A header/column lookup failed.
class MissingColumnError : public ValidationError {
 public:
  explicit MissingColumnError(const std::string& column)
      : ValidationError("missing column: '" + column + "'"), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

// Malformed CSV content. `row` is the 1-based data row (header excluded).
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t row, const std::string& what)
      : ValidationError("parse error at data row " + std::to_string(row) +
                        ": " + what),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// Failures during numerical work. The CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChainDivergenceError : public NumericError {
 public:
  ChainDivergenceError(std::size_t iteration, const std::string& what)
      : NumericError("Gibbs chain diverged at iteration " +
                     std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace ruleshap

#endif  // RULESHAP_ERROR_H_
