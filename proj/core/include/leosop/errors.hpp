#pragma once

#include <stdexcept>
#include <string>

namespace leosop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File access and on-disk format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or violated input precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometry (coincident positions, rank-deficient normal matrix,
/// too few measurements for the unknowns).
class GeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace leosop
