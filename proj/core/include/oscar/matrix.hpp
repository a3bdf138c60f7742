#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "oscar/errors.hpp"

namespace oscar {

using Vec = std::vector<double>;

// Dense row-major matrix. Small and boring on purpose: everything in this
// project is desk scale (tens of rows, single-digit columns), so we keep a
// flat vector and hand-written loops instead of pulling in a linear algebra
// package.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows*cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  void set_row(std::size_t i, std::span<const double> v) {
    for (std::size_t j = 0; j < cols; ++j) (*this)(i, j) = v[j];
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vec to_vec(std::span<const double> a) { return Vec(a.begin(), a.end()); }

inline double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data) s += v * v;
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

// FNV-1a over the raw little-endian bytes of the doubles. Used for the
// bitwise state checksums in run traces and for config hashes; two states
// compare equal under this hash iff every double is bit-identical.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t checksum(std::span<const double> a) {
  return fnv1a64(a.data(), a.size() * sizeof(double));
}

inline std::uint64_t checksum(const Matrix& m) {
  return fnv1a64(m.data.data(), m.data.size() * sizeof(double));
}

}  // namespace oscar
