#include "oscar/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace oscar {

namespace {

// Lower-triangular Cholesky factor of A, in place into L. Returns false and
// reports the offending pivot if one drops below the floor.
bool cholesky_factor(const SymMatrix& A, Matrix& L, double pivot_floor,
                     double* bad_pivot) {
  const std::size_t n = A.n;
  L = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = A(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > pivot_floor)) {  // catches NaN too
      if (bad_pivot) *bad_pivot = d;
      return false;
    }
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

double cholesky_logdet(const SymMatrix& A, double pivot_floor) {
  Matrix L;
  double bad = 0.0;
  if (!cholesky_factor(A, L, pivot_floor, &bad))
    throw NotPositiveDefinite("cholesky_logdet: pivot " + std::to_string(bad) +
                              " below floor " + std::to_string(pivot_floor));
  double s = 0.0;
  for (std::size_t i = 0; i < A.n; ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

SymMatrix psd_inverse(const SymMatrix& A, double ridge) {
  const std::size_t n = A.n;
  SymMatrix B = A;
  for (std::size_t i = 0; i < n; ++i) B(i, i) += ridge;

  Matrix L;
  double bad = 0.0;
  if (!cholesky_factor(B, L, 1e-300, &bad))
    throw NotPositiveDefinite("psd_inverse: ridged matrix not SPD (pivot " +
                              std::to_string(bad) + ")");

  // Solve B X = I column by column: L y = e_j, then L^T x = y.
  SymMatrix X(n);
  Vec y(n), x(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = (i == j) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
      y[i] = s / L(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
      x[ii] = s / L(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) X(i, j) = x[i];
  }
  X.symmetrize();
  return X;
}

EigenDecomp sym_eig(const SymMatrix& A) {
  const std::size_t n = A.n;
  SymMatrix D = A;
  D.symmetrize();
  Matrix Q(n, n);
  for (std::size_t i = 0; i < n; ++i) Q(i, i) = 1.0;

  if (n > 1) {
    auto off_norm = [&]() {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) s += D(i, j) * D(i, j);
      return std::sqrt(2.0 * s);
    };
    double scale = 0.0;
    for (double v : D.a) scale = std::max(scale, std::abs(v));
    const double tol = (scale == 0.0) ? 0.0 : 1e-15 * scale * static_cast<double>(n);

    const std::size_t max_sweeps = 100 * n;
    std::size_t sweep = 0;
    while (off_norm() > tol) {
      if (++sweep > max_sweeps)
        throw NonConvergence("sym_eig: Jacobi did not converge in " +
                             std::to_string(max_sweeps) + " sweeps");
      // Fixed cyclic order (p < q): the rotation sequence is a pure function
      // of the input, which keeps results bit-reproducible.
      for (std::size_t p = 0; p < n - 1; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          const double apq = D(p, q);
          if (apq == 0.0) continue;
          const double app = D(p, p), aqq = D(q, q);
          const double theta = (aqq - app) / (2.0 * apq);
          const double t = (theta >= 0.0)
                               ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                               : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;
          for (std::size_t k = 0; k < n; ++k) {
            const double dkp = D(k, p), dkq = D(k, q);
            D(k, p) = c * dkp - s * dkq;
            D(k, q) = s * dkp + c * dkq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double dpk = D(p, k), dqk = D(q, k);
            D(p, k) = c * dpk - s * dqk;
            D(q, k) = s * dpk + c * dqk;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double qkp = Q(k, p), qkq = Q(k, q);
            Q(k, p) = c * qkp - s * qkq;
            Q(k, q) = s * qkp + c * qkq;
          }
        }
      }
    }
  }

  // Sort descending, carrying eigenvector columns along.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return D(i, i) > D(j, j); });

  EigenDecomp out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = D(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = Q(i, order[j]);
  }
  return out;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h) {
  Vec g(x.size());
  Vec xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    const double xi = x[i];
    xp[i] = xi + hi;
    const double fp = f(xp);
    xp[i] = xi - hi;
    const double fm = f(xp);
    xp[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NonFinite("finite_diff_grad: non-finite value at coordinate " +
                      std::to_string(i));
    g[i] = (fp - fm) / (2.0 * hi);
  }
  return g;
}

}  // namespace oscar
