#pragma once

#include <stdexcept>
#include <string>

namespace spt {

// Base of every error the library throws. Subclasses name the contract that
// fired so callers (and the CLI) can map them to messages and exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};
class ScheduleError : public Error { using Error::Error; };
class SlicingError : public Error { using Error::Error; };
class SpecError : public Error { using Error::Error; };
class CheckpointError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace spt
