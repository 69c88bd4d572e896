#pragma once

#include <stdexcept>
#include <string>

namespace qafuse {

/// Contract violation or invalid input detected by a library operation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed record in one of the JSONL interchange files.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// An input file produced by an earlier pipeline stage does not exist.
class MissingInputError : public Error {
 public:
  MissingInputError(const std::string& path, const std::string& stage)
      : Error("missing input " + path + " (run `" + stage + "` first)"), stage_(stage) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace qafuse
