#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stsad {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data problems.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Caller contract violations.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Numeric failures.
class DegenerateChannelError : public Error {
 public:
  DegenerateChannelError(const std::string& channel, const std::string& what)
      : Error("degenerate channel '" + channel + "': " + what), channel_(channel) {}
  const std::string& channel() const { return channel_; }

 private:
  std::string channel_;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

/// A metric that is undefined for the given labels (e.g. no positives).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace stsad
