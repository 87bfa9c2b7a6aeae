#pragma once

#include <stdexcept>
#include <string>

namespace offcut {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested part-size change cannot be produced by any parameter.
class NoInfluence : public Error {
 public:
  using Error::Error;
};

/// Stiffness system without any fixed node.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// Iterative or direct displacement solve did not converge.
class SolveFailed : public Error {
 public:
  using Error::Error;
};

/// A part does not fit on any master board.
class PackingOverflow : public Error {
 public:
  using Error::Error;
};

/// Rasterizing a contour produced no pixel.
class EmptyBitmap : public Error {
 public:
  using Error::Error;
};

/// Design document validation failure; the message starts with a JSON path.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace offcut
