#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace funnelkit {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A malformed or invariant-violating record in a JSONL log.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + ", line " + std::to_string(line)), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Invalid funnel/experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace funnelkit
