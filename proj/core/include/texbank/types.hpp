#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace texbank {

/// Row-major dense matrix; descriptor samples store one descriptor per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for data-dependent failures (bad files, degenerate inputs).
/// Parameter misuse is reported with std::invalid_argument instead.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

/// An encoder was handed zero descriptors.
class EmptyInputError : public Error {
public:
  using Error::Error;
};

/// A region mask selected none of the descriptors of a non-empty sample.
class EmptyRegionError : public Error {
public:
  using Error::Error;
};

}  // namespace texbank
