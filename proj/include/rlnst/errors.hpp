#pragma once

#include <stdexcept>
#include <string>

namespace rlnst {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input outside the domain of a function (log of nonpositive, division by zero).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API contract (e.g. backward() on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

class UnsupportedKernelError : public Error {
 public:
  using Error::Error;
};

class DegenerateStatisticsError : public Error {
 public:
  using Error::Error;
};

// Spatial extents the network cannot process without caller-side padding.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { io, bad_magic, bad_version, truncated, shape_mismatch, missing_entry };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Unreadable, unwritable or malformed image file.
class ImageError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration: unknown key, unparsable value, missing path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(long iteration, const std::string& what) : Error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace rlnst
