#pragma once

#include <stdexcept>
#include <string>

namespace rsi {

/// Raised when a k x k matrix that must be inverted (U*X averaged, or the
/// U*A Phi(X) product at an orthogonalization step) is numerically singular.
/// This is the signature of too small a compression budget.
class InsufficientSampling : public std::runtime_error {
public:
  InsufficientSampling(const std::string& what, double min_singular, double max_singular)
      : std::runtime_error(what), min_singular_(min_singular), max_singular_(max_singular) {}

  double min_singular() const noexcept { return min_singular_; }
  double max_singular() const noexcept { return max_singular_; }

private:
  double min_singular_;
  double max_singular_;
};

/// An iterate column collapsed to zero.
class DeadColumn : public std::runtime_error {
public:
  DeadColumn(const std::string& what, std::size_t column)
      : std::runtime_error(what), column_(column) {}

  std::size_t column() const noexcept { return column_; }

private:
  std::size_t column_;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace rsi
