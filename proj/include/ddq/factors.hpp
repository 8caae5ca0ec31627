#pragma once

#include <cstddef>
#include <string>

#include "ddq/error.hpp"
#include "ddq/matrix.hpp"

namespace ddq {

/// A ~ p * d * q with p: n x k, d: k x k, q: k x m.
struct FactorTriple {
  DenseMatrix p;
  DenseMatrix d;
  DenseMatrix q;

  std::size_t rank() const noexcept { return d.rows(); }

  void validate() const {
    const std::size_t k = d.rows();
    if (!d.is_square() || p.cols() != k || q.rows() != k)
      throw Error(ErrorKind::ShapeMismatch, "factor shapes P " + p.shape_string() + ", D " + d.shape_string() +
                                                ", Q " + q.shape_string() + " do not share a rank");
  }

  DenseMatrix product() const {
    validate();
    return matmul(matmul(p, d), q);
  }
};

}  // namespace ddq
