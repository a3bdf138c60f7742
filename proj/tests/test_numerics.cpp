#include <doctest.h>

#include <cmath>
#include <cstddef>

#include "oscar/errors.hpp"
#include "oscar/numerics.hpp"
#include "oscar/rng.hpp"

using namespace oscar;

namespace {

// Dense random SPD matrix: A = G G^T + jitter * I with Gaussian G.
SymMatrix random_spd(std::size_t n, std::uint64_t seed, double jitter) {
  SymMatrix a(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec gi = rng::normal_vec(seed, rng::kMisc, 0, i, n + 2);
    for (std::size_t j = 0; j <= i; ++j) {
      Vec gj = rng::normal_vec(seed, rng::kMisc, 0, j, n + 2);
      double acc = 0.0;
      for (std::size_t k = 0; k < gi.size(); ++k) acc += gi[k] * gj[k];
      a(i, j) = acc + (i == j ? jitter : 0.0);
      a(j, i) = a(i, j);
    }
  }
  return a;
}

}  // namespace

TEST_CASE("cholesky logdet identity is zero") {
  CHECK(cholesky_logdet(SymMatrix::identity(2)) == 0.0);
  CHECK(cholesky_logdet(SymMatrix::identity(5)) == 0.0);
}

TEST_CASE("cholesky logdet of a diagonal matrix") {
  SymMatrix a(2);
  a(0, 0) = 2.0;
  a(1, 1) = 2.0;
  CHECK(cholesky_logdet(a) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("cholesky logdet matches eigenvalue sum on random SPD input") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    SymMatrix a = random_spd(5, seed, 0.5);
    const double via_chol = cholesky_logdet(a);
    EigenDecomp eig = sym_eig(a);
    double via_eig = 0.0;
    for (double lam : eig.eigenvalues) via_eig += std::log(lam);
    CHECK(via_chol == doctest::Approx(via_eig).epsilon(1e-10));
  }
}

TEST_CASE("cholesky rejects indefinite input") {
  SymMatrix a(2);
  a(0, 0) = 1.0;
  a(1, 1) = -1.0;
  CHECK_THROWS_AS(cholesky_logdet(a), NotPositiveDefinite);

  // Rank-deficient: second row is a copy of the first.
  SymMatrix b(2);
  b(0, 0) = 1.0;
  b(1, 0) = 1.0;
  b(0, 1) = 1.0;
  b(1, 1) = 1.0;
  CHECK_THROWS_AS(cholesky_logdet(b), NotPositiveDefinite);
}

TEST_CASE("psd_inverse closed forms") {
  // (0 + 1*I)^{-1} = I.
  SymMatrix zero(3);
  SymMatrix inv = psd_inverse(zero, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(inv(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));

  // (3*I + 1*I)^{-1} = I/4.
  SymMatrix diag(2);
  diag(0, 0) = 3.0;
  diag(1, 1) = 3.0;
  SymMatrix quarter = psd_inverse(diag, 1.0);
  CHECK(quarter(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(quarter(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(quarter(1, 0) == doctest::Approx(0.0).epsilon(1e-14));

  // 2x2 with off-diagonal, ridge 1e-3, against the adjugate formula.
  SymMatrix k(2);
  k(0, 0) = 1.0;
  k(1, 0) = 0.9;
  k(0, 1) = 0.9;
  k(1, 1) = 1.0;
  const double r = 1e-3;
  const double a = 1.0 + r, b = 0.9;
  const double det = a * a - b * b;
  SymMatrix got = psd_inverse(k, r);
  CHECK(got(0, 0) == doctest::Approx(a / det).epsilon(1e-9));
  CHECK(got(1, 1) == doctest::Approx(a / det).epsilon(1e-9));
  CHECK(got(1, 0) == doctest::Approx(-b / det).epsilon(1e-9));
}

TEST_CASE("psd_inverse returns a true inverse of the ridged matrix") {
  SymMatrix a = random_spd(6, 21, 0.1);
  const double r = 0.05;
  SymMatrix inv = psd_inverse(a, r);
  // (A + r I) * inv should be the identity.
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 6; ++k)
        acc += (a(i, k) + (i == k ? r : 0.0)) * inv(k, j);
      CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("sym_eig diagonal and exchange matrices") {
  SymMatrix d(2);
  d(0, 0) = 1.0;
  d(1, 1) = 3.0;
  EigenDecomp ed = sym_eig(d);
  CHECK(ed.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(ed.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-14));

  SymMatrix x(2);
  x(1, 0) = 1.0;
  x(0, 1) = 1.0;
  EigenDecomp ex = sym_eig(x);
  CHECK(ex.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(ex.eigenvalues[1] == doctest::Approx(-1.0).epsilon(1e-13));
}

TEST_CASE("sym_eig preserves trace and reconstructs the matrix") {
  SymMatrix a = random_spd(7, 31, 0.2);
  EigenDecomp ed = sym_eig(a);

  double tr = 0.0, lam_sum = 0.0;
  for (std::size_t i = 0; i < 7; ++i) tr += a(i, i);
  for (double lam : ed.eigenvalues) lam_sum += lam;
  CHECK(lam_sum == doctest::Approx(tr).epsilon(1e-10));

  // Eigenvalues come out sorted descending.
  for (std::size_t i = 1; i < ed.eigenvalues.size(); ++i)
    CHECK(ed.eigenvalues[i - 1] >= ed.eigenvalues[i]);

  // V^T V = I and V diag(lam) V^T = A.
  const Matrix& v = ed.eigenvectors;
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      double ortho = 0.0, recon = 0.0;
      for (std::size_t k = 0; k < 7; ++k) {
        ortho += v(k, i) * v(k, j);
        recon += v(i, k) * ed.eigenvalues[k] * v(j, k);
      }
      CHECK(ortho == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
      CHECK(recon == doctest::Approx(a(i, j)).epsilon(1e-8));
    }
  }
}

TEST_CASE("finite difference gradient on a quadratic") {
  auto f = [](std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += 0.5 * v * v;
    return acc;
  };
  Vec g = finite_diff_grad(f, Vec{1.0, 2.0});
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-8));

  auto c = [](std::span<const double>) { return 4.25; };
  Vec gz = finite_diff_grad(c, Vec{0.3, -0.7, 5.0});
  for (double v : gz) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("finite difference gradient rejects non-finite evaluations") {
  auto f = [](std::span<const double> x) { return std::sqrt(x[0]); };
  // Probing around zero steps into negative territory -> NaN.
  CHECK_THROWS_AS(finite_diff_grad(f, Vec{0.0}), NonFinite);
}
