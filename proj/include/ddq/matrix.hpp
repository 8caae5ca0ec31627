#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddq/error.hpp"

namespace ddq {

/// Real dense matrix, row-major, at least 1x1.
class DenseMatrix {
 public:
  DenseMatrix() : DenseMatrix(1, 1) {}

  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    check_shape(rows, cols);
    data_.assign(rows * cols, 0.0);
  }

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    check_shape(rows, cols);
    if (data_.size() != rows * cols) {
      throw Error(ErrorKind::DimensionMismatch,
                  "expected " + std::to_string(rows * cols) + " entries, got " +
                      std::to_string(data_.size()));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteEntry, "matrix entry is not finite");
    }
  }

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw Error(ErrorKind::DimensionMismatch, "ragged row list");
      values.insert(values.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(values));
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static DenseMatrix diagonal(std::initializer_list<double> d) {
    return diagonal(std::span<const double>(d.begin(), d.size()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  std::vector<double> diag() const {
    std::vector<double> d(std::min(rows_, cols_));
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(i, i);
    return d;
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  /// Rows [r0, r0+nr) and columns [c0, c0+nc).
  DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw Error(ErrorKind::ShapeMismatch, "block out of range");
    DenseMatrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      std::copy_n(data_.data() + (r0 + i) * cols_ + c0, nc, b.data_.data() + i * nc);
    return b;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  DenseMatrix& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  std::string shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  static void check_shape(std::size_t r, std::size_t c) {
    if (r == 0 || c == 0) throw Error(ErrorKind::DimensionMismatch, "matrix dimensions must be >= 1");
  }
  void require_same_shape(const DenseMatrix& o, const char* op) const {
    if (o.rows_ != rows_ || o.cols_ != cols_)
      throw Error(ErrorKind::ShapeMismatch,
                  std::string(op) + " on " + shape_string() + " and " + o.shape_string());
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

inline DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
inline DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
inline DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
inline DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

namespace detail {

// Four independent accumulators; the summation order is fixed so results are
// reproducible bit for bit.
inline double dot(const double* x, const double* y, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double a, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace detail

/// a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    throw Error(ErrorKind::ShapeMismatch, "matmul " + a.shape_string() + " * " + b.shape_string());
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  DenseMatrix c(n, m);
  const double* bd = b.values().data();
  double* cd = c.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = cd + i * m;
    for (std::size_t p = 0; p < inner; ++p) {
      const double aip = a(i, p);
      if (aip != 0.0) detail::axpy(aip, bd + p * m, ci, m);
    }
  }
  return c;
}

/// a^T * b
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    throw Error(ErrorKind::ShapeMismatch, "matmul_tn " + a.shape_string() + "^T * " + b.shape_string());
  const std::size_t inner = a.rows(), n = a.cols(), m = b.cols();
  DenseMatrix c(n, m);
  const double* bd = b.values().data();
  double* cd = c.values().data();
  for (std::size_t p = 0; p < inner; ++p) {
    const double* bp = bd + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double api = a(p, i);
      if (api != 0.0) detail::axpy(api, bp, cd + i * m, m);
    }
  }
  return c;
}

/// a * b^T
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    throw Error(ErrorKind::ShapeMismatch, "matmul_nt " + a.shape_string() + " * " + b.shape_string() + "^T");
  const std::size_t n = a.rows(), m = b.rows(), inner = a.cols();
  DenseMatrix c(n, m);
  const double* ad = a.values().data();
  const double* bd = b.values().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c(i, j) = detail::dot(ad + i * inner, bd + j * inner, inner);
  return c;
}

/// a^T a, symmetric by construction.
inline DenseMatrix gram(const DenseMatrix& a) {
  const std::size_t k = a.cols();
  DenseMatrix at = a.transposed();
  DenseMatrix g(k, k);
  const double* d = at.values().data();
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) g(i, j) = g(j, i) = detail::dot(d + i * n, d + j * n, n);
  return g;
}

/// a a^T, symmetric by construction.
inline DenseMatrix outer_gram(const DenseMatrix& a) {
  const std::size_t k = a.rows(), n = a.cols();
  DenseMatrix g(k, k);
  const double* d = a.values().data();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) g(i, j) = g(j, i) = detail::dot(d + i * n, d + j * n, n);
  return g;
}

inline double frobenius_norm_squared(const DenseMatrix& a) noexcept {
  const auto v = a.values();
  return detail::dot(v.data(), v.data(), v.size());
}

/// Overflow-safe: scales by the largest magnitude before summing.
inline double frobenius_norm(const DenseMatrix& a) noexcept {
  double scale = 0.0;
  for (double v : a.values()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  if (scale > 1e-150 && scale < 1e150) return std::sqrt(frobenius_norm_squared(a));
  double s = 0.0;
  for (double v : a.values()) {
    const double x = v / scale;
    s += x * x;
  }
  return scale * std::sqrt(s);
}

inline double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::ShapeMismatch, "inner product of " + a.shape_string() + " and " + b.shape_string());
  return detail::dot(a.values().data(), b.values().data(), a.size());
}

/// ||a - b||_F without materializing the difference.
inline double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::ShapeMismatch, "distance between " + a.shape_string() + " and " + b.shape_string());
  const auto x = a.values();
  const auto y = b.values();
  double s0 = 0.0, s1 = 0.0;
  std::size_t i = 0;
  for (; i + 2 <= x.size(); i += 2) {
    const double d0 = x[i] - y[i];
    const double d1 = x[i + 1] - y[i + 1];
    s0 += d0 * d0;
    s1 += d1 * d1;
  }
  for (; i < x.size(); ++i) s0 += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s0 + s1);
}

inline double max_abs(const DenseMatrix& a) noexcept {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

/// a * diag(d)
inline DenseMatrix scale_columns(DenseMatrix a, std::span<const double> d) {
  if (d.size() != a.cols()) throw Error(ErrorKind::ShapeMismatch, "scale_columns length");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) *= d[j];
  return a;
}

/// diag(d) * a
inline DenseMatrix scale_rows(DenseMatrix a, std::span<const double> d) {
  if (d.size() != a.rows()) throw Error(ErrorKind::ShapeMismatch, "scale_rows length");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double& v : a.row(i)) v *= d[i];
  return a;
}

}  // namespace ddq
