#pragma once

#include <stdexcept>
#include <string>

namespace chaoslab {

/// Base class of every exception thrown by the library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A chaos order or Hermite degree outside the supported range.
struct order_error : error {
  using error::error;
};

/// Argument shape or normalization violates an operation's precondition.
struct precondition_error : error {
  using error::error;
};

/// Requested size exceeds an enumeration or sampling cap.
struct capacity_error : error {
  using error::error;
};

/// Chaos coefficients that cannot define a valid covariance.
struct coefficient_error : error {
  using error::error;
};

/// Loss that cannot be used for the requested operation.
struct loss_error : error {
  using error::error;
};

struct label_error : error {
  using error::error;
};

struct config_error : error {
  using error::error;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw precondition_error(what);
}
}  // namespace detail

}  // namespace chaoslab
