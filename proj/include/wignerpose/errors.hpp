#pragma once

#include <stdexcept>
#include <string>

namespace wignerpose {

/// A least-squares design matrix is too ill-conditioned for a meaningful fit.
class IllConditionedError : public std::runtime_error {
 public:
  explicit IllConditionedError(const std::string& what) : std::runtime_error(what) {}
};

/// Operand shapes (band limits, channel counts, lengths) do not agree.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// A request would exceed the desk-scale memory budget without explicit opt-in.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

/// A file or checkpoint has an unknown magic, layout version or incompatible config.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wignerpose
