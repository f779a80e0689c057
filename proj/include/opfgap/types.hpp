#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace opfgap {

/** Scalar type used throughout the library. */
using scalar_t = double;

/** Dense dynamic vector. */
using vector_t = Eigen::Matrix<scalar_t, Eigen::Dynamic, 1>;

/** Dense dynamic matrix. */
using matrix_t = Eigen::Matrix<scalar_t, Eigen::Dynamic, Eigen::Dynamic>;

/** Sparse matrix (column major). */
using sparse_t = Eigen::SparseMatrix<scalar_t>;

using triplet_t = Eigen::Triplet<scalar_t>;

using complex_t = std::complex<scalar_t>;

using index_t = Eigen::Index;

/** Raised when input data violates a documented invariant. */
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/** Raised when a text stream cannot be parsed; message carries the line number. */
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace opfgap
