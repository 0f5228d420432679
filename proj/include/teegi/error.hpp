#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace teegi {

/// Malformed input document; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Operation not permitted in the current state machine mode.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Run configuration rejected during validation; names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace teegi
