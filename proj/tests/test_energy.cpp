#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "oscar/energy.hpp"
#include "oscar/errors.hpp"
#include "oscar/matrix.hpp"
#include "oscar/numerics.hpp"
#include "oscar/rng.hpp"

using namespace oscar;

namespace {

Matrix random_features(std::size_t m, std::size_t d, std::uint64_t seed) {
  Matrix z(m, d);
  for (std::size_t i = 0; i < m; ++i)
    z.set_row(i, rng::normal_vec(seed, rng::kMisc, 90, i, d));
  return z;
}

// Energy assembled from scratch: explicit eigendecomposition leverage,
// explicit reweighting, eigenvalue log-determinant. Shares no code path with
// set_energy beyond sym_eig itself.
double reference_energy(const Matrix& Z, const EnergyConfig& cfg) {
  const std::size_t m = Z.rows;
  SymMatrix K(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < Z.cols; ++c) acc += Z(i, c) * Z(j, c);
      K(i, j) = acc;
      K(j, i) = acc;
    }
  // s_i = 1 - r [ (K + rI)^{-1} ]_{ii} through the spectrum of K.
  EigenDecomp ek = sym_eig(K);
  Vec s(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double pii = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      pii += ek.eigenvectors(i, k) * ek.eigenvectors(i, k) /
             (ek.eigenvalues[k] + cfg.ridge);
    s[i] = 1.0 - cfg.ridge * pii;
  }
  Vec w(m, 1.0 / static_cast<double>(m));
  if (cfg.alpha > 0.0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += std::pow(s[i], cfg.alpha);
    for (std::size_t i = 0; i < m; ++i) w[i] = std::pow(s[i], cfg.alpha) / sum;
  }
  Vec b(m);
  for (std::size_t i = 0; i < m; ++i)
    b[i] = std::sqrt(static_cast<double>(m) * w[i]);
  SymMatrix kt(m);
  double tr = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      kt(i, j) = b[i] * K(i, j) * b[j];
      kt(j, i) = kt(i, j);
    }
    tr += kt(i, i);
  }
  const double eps_tr = cfg.eps * tr / static_cast<double>(m);
  SymMatrix A(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      A(i, j) = cfg.tau * kt(i, j) + (i == j ? 1.0 + eps_tr : 0.0);
      A(j, i) = A(i, j);
    }
  EigenDecomp ea = sym_eig(A);
  double logdet = 0.0;
  for (double lam : ea.eigenvalues) logdet += std::log(lam);
  return -0.5 * logdet;
}

}  // namespace

TEST_CASE("gram matrix from explicit inner products") {
  Matrix z(2, 3);
  z(0, 0) = 1.0;
  z(0, 1) = 2.0;
  z(0, 2) = -1.0;
  z(1, 0) = 0.5;
  z(1, 2) = 4.0;
  SymMatrix k = gram(z);
  CHECK(k(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(k(1, 1) == doctest::Approx(16.25).epsilon(1e-15));
  CHECK(k(1, 0) == doctest::Approx(0.5 - 4.0).epsilon(1e-15));
}

TEST_CASE("config validation") {
  EnergyConfig bad;
  bad.tau = 0.0;
  CHECK_THROWS_AS(set_energy(Matrix(2, 2), bad), SchemaError);
  bad = EnergyConfig{};
  bad.ridge = -1.0;
  CHECK_THROWS_AS(set_energy(Matrix(2, 2), bad), SchemaError);
  bad = EnergyConfig{};
  bad.alpha = -0.1;
  CHECK_THROWS_AS(set_energy(Matrix(2, 2), bad), SchemaError);
}

TEST_CASE("leverage scores on an identity gram are uniform") {
  EnergyConfig cfg;
  SymMatrix k = SymMatrix::identity(4);
  LeverageResult lev = leverage_weights(k, cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(lev.scores[i] == doctest::Approx(1.0 / (1.0 + cfg.ridge)).epsilon(1e-12));
    CHECK(lev.weights[i] == doctest::Approx(0.25).epsilon(1e-13));
  }
}

TEST_CASE("alpha zero gives uniform weights regardless of geometry") {
  EnergyConfig cfg;
  cfg.alpha = 0.0;
  Matrix z = random_features(5, 3, 8);
  EnergyReport rep = set_energy(z, cfg);
  for (double w : rep.weights) CHECK(w == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("duplicated rows shed weight onto the isolated row") {
  // K = [[1,1,0],[1,1,0],[0,0,1]]: rows 1,2 coincide, row 3 is orthogonal.
  Matrix z(3, 2);
  z(0, 0) = 1.0;
  z(1, 0) = 1.0;
  z(2, 1) = 1.0;
  EnergyConfig cfg;  // ridge 1e-3, alpha 0.5
  const double r = cfg.ridge;
  EnergyReport rep = set_energy(z, cfg);

  // Closed-form block inverse of (K + rI): the ones-block contributes
  // s = 1/(2+r) twice, the isolated row s = 1/(1+r).
  const double s_dup = 1.0 / (2.0 + r);
  const double s_iso = 1.0 / (1.0 + r);
  CHECK(rep.leverage[0] == doctest::Approx(s_dup).epsilon(1e-12));
  CHECK(rep.leverage[1] == doctest::Approx(s_dup).epsilon(1e-12));
  CHECK(rep.leverage[2] == doctest::Approx(s_iso).epsilon(1e-12));

  const double norm = 2.0 * std::sqrt(s_dup) + std::sqrt(s_iso);
  CHECK(rep.weights[0] == doctest::Approx(std::sqrt(s_dup) / norm).epsilon(1e-12));
  CHECK(rep.weights[2] == doctest::Approx(std::sqrt(s_iso) / norm).epsilon(1e-12));
  CHECK(rep.weights[2] > rep.weights[0]);
  CHECK(rep.weights[0] == doctest::Approx(rep.weights[1]).epsilon(1e-14));

  double sum = 0.0;
  for (double w : rep.weights) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  for (double sc : rep.leverage) {
    CHECK(sc >= 0.0);
    CHECK(sc < 1.0);
  }
}

TEST_CASE("closed-form energies for tiny feature sets") {
  EnergyConfig cfg;
  cfg.alpha = 0.0;
  cfg.eps = 1e-12;  // make the stabilizer negligible against 1e-9 tolerances

  Matrix one(1, 3);
  one(0, 0) = 1.0;
  CHECK(set_energy(one, cfg).energy ==
        doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-9));

  Matrix orth(2, 2);
  orth(0, 0) = 1.0;
  orth(1, 1) = 1.0;
  const double e_orth = set_energy(orth, cfg).energy;
  CHECK(e_orth == doctest::Approx(-std::log(2.0)).epsilon(1e-9));

  Matrix dup(2, 2);
  dup(0, 0) = 1.0;
  dup(1, 0) = 1.0;
  const double e_dup = set_energy(dup, cfg).energy;
  CHECK(e_dup == doctest::Approx(-0.5 * std::log(3.0)).epsilon(1e-9));

  // The spread-out set sits strictly lower.
  CHECK(e_orth < e_dup);
}

TEST_CASE("energy matches an independently assembled reference") {
  EnergyConfig cfg;
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    Matrix z = random_features(6, 4, seed);
    EnergyReport rep = set_energy(z, cfg);
    CHECK(rep.energy == doctest::Approx(reference_energy(z, cfg)).epsilon(1e-9));
  }
}

TEST_CASE("energy and log-volume are negatives of each other") {
  EnergyConfig cfg;
  for (std::uint64_t seed : {6u, 7u}) {
    Matrix z = random_features(5, 3, seed);
    EnergyReport rep = set_energy(z, cfg);
    CHECK(std::abs(rep.energy + rep.volume_log) <= 1e-12);
    // Spectrum is reported descending and strictly positive.
    for (std::size_t i = 1; i < rep.gram_spectrum.size(); ++i)
      CHECK(rep.gram_spectrum[i - 1] >= rep.gram_spectrum[i]);
    CHECK(rep.gram_spectrum.back() > 0.0);
  }
}

TEST_CASE("gradient vanishes on the zero set and has the m = 1 closed form") {
  EnergyConfig cfg;
  Matrix zero(2, 3);
  Matrix g0 = energy_grad(zero, cfg);
  for (double v : g0.data) CHECK(v == 0.0);

  cfg.eps = 1e-12;
  Matrix one(1, 2);
  one(0, 0) = 0.6;
  one(0, 1) = 0.8;  // unit row
  Matrix g1 = energy_grad(one, cfg);
  // E = -1/2 log(1 + tau |z|^2 (+ eps)): dE/dz = -tau z / (1 + tau |z|^2).
  CHECK(g1(0, 0) == doctest::Approx(-0.3).epsilon(1e-9));
  CHECK(g1(0, 1) == doctest::Approx(-0.4).epsilon(1e-9));
}

TEST_CASE("frozen gradient against finite differences of the frozen value") {
  EnergyConfig cfg;  // both freeze flags on by default
  Matrix z = random_features(4, 3, 14);
  EnergyReport rep = set_energy(z, cfg);
  Matrix g = energy_grad(z, cfg);

  auto f = [&](std::span<const double> flat) {
    Matrix zz(4, 3);
    zz.data.assign(flat.begin(), flat.end());
    return energy_value_frozen(zz, rep.weights, rep.eps_tr, cfg);
  };
  Vec fd = finite_diff_grad(f, z.data, 1e-6);
  const double scale = std::max(1.0, norm2(fd));
  for (std::size_t i = 0; i < fd.size(); ++i)
    CHECK(std::abs(g.data[i] - fd[i]) / scale < 1e-6);
}

TEST_CASE("unfrozen gradient differentiates the full energy") {
  EnergyConfig cfg;
  cfg.freeze_weights = false;
  cfg.freeze_stabilizer = false;
  Matrix z = random_features(4, 3, 15);
  Matrix g = energy_grad(z, cfg);

  auto f = [&](std::span<const double> flat) {
    Matrix zz(4, 3);
    zz.data.assign(flat.begin(), flat.end());
    return set_energy(zz, cfg).energy;
  };
  Vec fd = finite_diff_grad(f, z.data, 1e-5);
  const double scale = std::max(1.0, norm2(fd));
  for (std::size_t i = 0; i < fd.size(); ++i)
    CHECK(std::abs(g.data[i] - fd[i]) / scale < 1e-5);
}

TEST_CASE("stabilizer-only unfreezing tracks the trace term alone") {
  EnergyConfig cfg;
  cfg.freeze_stabilizer = false;  // weights stay frozen
  Matrix z = random_features(4, 3, 16);
  EnergyReport rep = set_energy(z, cfg);
  Matrix g = energy_grad(z, cfg);

  // Reference: weights pinned to their base values, eps_tr recomputed from Z.
  auto f = [&](std::span<const double> flat) {
    Matrix zz(4, 3);
    zz.data.assign(flat.begin(), flat.end());
    SymMatrix K = gram(zz);
    double tr = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      tr += 4.0 * rep.weights[i] * K(i, i);
    const double eps_tr = cfg.eps * tr / 4.0;
    return energy_value_frozen(zz, rep.weights, eps_tr, cfg);
  };
  Vec fd = finite_diff_grad(f, z.data, 1e-5);
  const double scale = std::max(1.0, norm2(fd));
  for (std::size_t i = 0; i < fd.size(); ++i)
    CHECK(std::abs(g.data[i] - fd[i]) / scale < 1e-5);
}

TEST_CASE("energy is invariant under row permutations") {
  EnergyConfig cfg;
  Matrix z = random_features(5, 4, 17);
  Matrix p(5, 4);
  const std::size_t perm[5] = {3, 0, 4, 1, 2};
  for (std::size_t i = 0; i < 5; ++i) p.set_row(i, z.row(perm[i]));
  CHECK(set_energy(p, cfg).energy ==
        doctest::Approx(set_energy(z, cfg).energy).epsilon(1e-12));
}

TEST_CASE("a small step against the gradient lowers the energy") {
  EnergyConfig cfg;
  Matrix z = random_features(6, 4, 18);
  EnergyReport rep = set_energy(z, cfg);
  Matrix g = energy_grad(z, cfg);

  Matrix stepped = z;
  for (std::size_t i = 0; i < z.data.size(); ++i)
    stepped.data[i] -= 1e-3 * g.data[i];

  // Guaranteed for the frozen objective the gradient differentiates...
  const double f0 = energy_value_frozen(z, rep.weights, rep.eps_tr, cfg);
  const double f1 = energy_value_frozen(stepped, rep.weights, rep.eps_tr, cfg);
  CHECK(f1 < f0);
  // ...and observed for the full energy at this step size.
  CHECK(set_energy(stepped, cfg).energy < rep.energy);
}
