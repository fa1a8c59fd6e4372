#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zerogen {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration. Carries the dotted field path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config error at '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Errors caused by input data (files, datasets, corpora) rather than the
// configuration or a programming mistake.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class EmptyCorpus : public DataError {
 public:
  EmptyCorpus() : DataError("corpus is empty") {}
  explicit EmptyCorpus(const std::string& what) : DataError(what) {}
};

class DatasetTooSmall : public DataError {
 public:
  using DataError::DataError;
};

class TaskMismatch : public DataError {
 public:
  using DataError::DataError;
};

class CorpusTooSmall : public DataError {
 public:
  using DataError::DataError;
};

class NoEntityFound : public DataError {
 public:
  explicit NoEntityFound(const std::string& context)
      : DataError("no entity candidate in context: " + context) {}
};

// Contract violations on arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidToken : public InvalidArgument {
 public:
  InvalidToken(long long id, std::size_t vocab_size)
      : InvalidArgument("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(vocab_size)) {}
};

class EmptyLabelSet : public InvalidArgument {
 public:
  EmptyLabelSet() : InvalidArgument("label set is empty") {}
};

class MissingSlot : public InvalidArgument {
 public:
  explicit MissingSlot(std::string slot)
      : InvalidArgument("unbound slot " + slot), slot_(std::move(slot)) {}

  const std::string& slot() const noexcept { return slot_; }

 private:
  std::string slot_;
};

class InvalidTemperature : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InvalidK : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InvalidP : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DegenerateDistribution : public InvalidArgument {
 public:
  DegenerateDistribution() : InvalidArgument("distribution has no support") {}
};

class LengthMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyGolds : public InvalidArgument {
 public:
  EmptyGolds() : InvalidArgument("gold answer list is empty") {}
};

class EmptyReferences : public InvalidArgument {
 public:
  EmptyReferences() : InvalidArgument("reference list is empty") {}
};

}  // namespace zerogen
