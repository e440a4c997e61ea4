#pragma once

// Shared vocabulary for the priorkryl library: vector/matrix aliases,
// the exception hierarchy and the global rank cutoff.

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace priorkryl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Singular values at or below this fraction of the largest one count as zero.
/// The same cutoff is used by the projector, the spectrum and the GSVD.
inline constexpr double kRankTolerance = 1e-10;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes do not match.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Breakdown inside a numerical kernel (non-SPD pivot, NaN, rank loss...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: configuration values, unreadable files, invalid options.
class InputError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_size(Index actual, Index expected, const char* what) {
  if (actual != expected) {
    throw DimensionError(std::string(what) + ": expected length " +
                         std::to_string(expected) + ", got " +
                         std::to_string(actual));
  }
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace detail
}  // namespace priorkryl
