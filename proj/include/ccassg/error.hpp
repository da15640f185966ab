#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccassg {

// Operand dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent dataset content. `line` is 1-based, 0 when the
// problem is not tied to a line.
class DataError : public std::runtime_error {
 public:
  enum class Kind { missing_file, malformed_line, index_out_of_range, count_mismatch, invalid };

  DataError(Kind kind, std::string file, std::size_t line, const std::string& what)
      : std::runtime_error(format(file, line, what)), kind_(kind), file_(std::move(file)), line_(line) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, std::size_t line, const std::string& what) {
    std::string out = file;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + what;
  }

  Kind kind_;
  std::string file_;
  std::size_t line_;
};

// Invalid configuration value; `key` names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// NaN/Inf or a degenerate quantity encountered during computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A normalized-embedding column with (near) zero spread.
class DegenerateColumnError : public NumericalError {
 public:
  explicit DegenerateColumnError(std::size_t column)
      : NumericalError("degenerate column " + std::to_string(column) + ": standard deviation is zero"),
        column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccassg
