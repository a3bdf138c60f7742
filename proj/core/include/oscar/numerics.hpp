#pragma once

#include <functional>

#include "oscar/matrix.hpp"

namespace oscar {

// Symmetric matrix stored dense. Only the algorithms this project actually
// needs: Cholesky log-determinant, ridged SPD inverse, a cyclic Jacobi
// eigensolver, and central finite differences as the independent oracle for
// every analytic gradient in the library.
struct SymMatrix {
  std::size_t n = 0;
  std::vector<double> a;  // n*n, row-major, kept exactly symmetric

  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : n(dim), a(dim * dim, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  static SymMatrix identity(std::size_t dim) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  // Symmetrize exactly: a_ij = a_ji = (a_ij + a_ji) / 2.
  void symmetrize() {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = v;
        (*this)(j, i) = v;
      }
  }
};

struct EigenDecomp {
  Vec eigenvalues;      // descending
  Matrix eigenvectors;  // column j pairs with eigenvalues[j]; orthonormal
};

// log det(A) via Cholesky. Throws NotPositiveDefinite when a pivot falls
// below pivot_floor (defaults to essentially "any non-positive pivot").
double cholesky_logdet(const SymMatrix& A, double pivot_floor = 1e-300);

// (A + ridge*I)^{-1}, result exactly symmetric.
SymMatrix psd_inverse(const SymMatrix& A, double ridge);

// Cyclic Jacobi with a fixed sweep order, so results are bit-reproducible
// for a given input. Throws NonConvergence after 100*n sweeps.
EigenDecomp sym_eig(const SymMatrix& A);

// Central finite differences with a relative step: h_i = h * max(1, |x_i|).
// The workhorse oracle for every analytic gradient in this project. Throws
// NonFinite if f returns a non-finite value at any probe point.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h = 1e-5);

}  // namespace oscar
