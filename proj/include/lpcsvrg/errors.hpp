#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpcsvrg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScaleMismatch : Error {
  using Error::Error;
};

struct Overflow : Error {
  using Error::Error;
};

struct DimMismatch : Error {
  using Error::Error;
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

struct EmptyDataset : Error {
  using Error::Error;
};

struct NotReached : Error {
  using Error::Error;
};

struct ConfigInvalid : Error {
  using Error::Error;
};

struct ParseError : Error {
  std::size_t line;
  ParseError(std::size_t line_no, const std::string& msg)
      : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct WorkerPanic : Error {
  int worker_id;
  WorkerPanic(int id, const std::string& msg)
      : Error("worker " + std::to_string(id) + ": " + msg), worker_id(id) {}
};

}  // namespace lpcsvrg
