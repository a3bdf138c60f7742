#include "oscar/energy.hpp"

#include <cmath>
#include <string>

namespace oscar {

namespace {

void check_config(const EnergyConfig& cfg) {
  if (!(cfg.tau > 0.0) || !(cfg.eps > 0.0) || !(cfg.ridge > 0.0) ||
      !(cfg.alpha >= 0.0))
    throw SchemaError("energy config: need tau, eps, ridge > 0 and alpha >= 0");
}

// Ktil = M^{1/2} K M^{1/2} with M = m diag(w).
SymMatrix reweighted(const SymMatrix& K, const Vec& w) {
  const std::size_t m = K.n;
  Vec b(m);
  for (std::size_t i = 0; i < m; ++i)
    b[i] = std::sqrt(static_cast<double>(m) * w[i]);
  SymMatrix Kt(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) Kt(i, j) = b[i] * K(i, j) * b[j];
  return Kt;
}

SymMatrix stabilized(const SymMatrix& Kt, double tau, double eps_tr) {
  SymMatrix A(Kt.n);
  for (std::size_t i = 0; i < Kt.n; ++i) {
    for (std::size_t j = 0; j < Kt.n; ++j) A(i, j) = tau * Kt(i, j);
    A(i, i) += 1.0 + eps_tr;
  }
  return A;
}

double trace(const SymMatrix& A) {
  double s = 0.0;
  for (std::size_t i = 0; i < A.n; ++i) s += A(i, i);
  return s;
}

}  // namespace

SymMatrix gram(const Matrix& Z) {
  const std::size_t m = Z.rows;
  SymMatrix K(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      const double v = dot(Z.row(i), Z.row(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  return K;
}

LeverageResult leverage_weights(const SymMatrix& K, const EnergyConfig& cfg) {
  check_config(cfg);
  const std::size_t m = K.n;
  const SymMatrix P = psd_inverse(K, cfg.ridge);

  LeverageResult out;
  out.scores.resize(m);
  // K (K + r)^{-1} = I - r (K + r)^{-1}, so the scores come straight off the
  // inverse's diagonal; clamp the tiny negative rounding at the K = 0 corner.
  for (std::size_t i = 0; i < m; ++i)
    out.scores[i] = std::max(0.0, 1.0 - cfg.ridge * P(i, i));

  out.weights.assign(m, 1.0 / static_cast<double>(m));
  if (cfg.alpha > 0.0) {
    Vec u(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      u[i] = std::pow(out.scores[i], cfg.alpha);
      sum += u[i];
    }
    if (sum > 0.0)
      for (std::size_t i = 0; i < m; ++i) out.weights[i] = u[i] / sum;
  }
  return out;
}

EnergyReport set_energy(const Matrix& Z, const EnergyConfig& cfg) {
  check_config(cfg);
  const std::size_t m = Z.rows;
  const SymMatrix K = gram(Z);
  const LeverageResult lev = leverage_weights(K, cfg);
  const SymMatrix Kt = reweighted(K, lev.weights);
  const double eps_tr = cfg.eps * trace(Kt) / static_cast<double>(m);
  const SymMatrix A = stabilized(Kt, cfg.tau, eps_tr);

  EnergyReport rep;
  rep.eps_tr = eps_tr;
  rep.leverage = lev.scores;
  rep.weights = lev.weights;
  rep.energy = -0.5 * cholesky_logdet(A);
  // Deliberately a second route: the log-volume comes from the spectrum, the
  // energy from Cholesky, and the identity energy == -volume_log is asserted
  // by the verification harness rather than trivially true by construction.
  const EigenDecomp eig = sym_eig(A);
  rep.gram_spectrum = eig.eigenvalues;
  double lv = 0.0;
  for (double lam : eig.eigenvalues) lv += std::log(lam);
  rep.volume_log = 0.5 * lv;
  return rep;
}

double energy_value_frozen(const Matrix& Z, const Vec& weights, double eps_tr,
                           const EnergyConfig& cfg) {
  const SymMatrix K = gram(Z);
  const SymMatrix A = stabilized(reweighted(K, weights), cfg.tau, eps_tr);
  return -0.5 * cholesky_logdet(A);
}

Matrix energy_grad(const Matrix& Z, const EnergyConfig& cfg) {
  check_config(cfg);
  const std::size_t m = Z.rows;
  const std::size_t D = Z.cols;
  const SymMatrix K = gram(Z);
  const LeverageResult lev = leverage_weights(K, cfg);
  const Vec& w = lev.weights;
  const SymMatrix Kt = reweighted(K, w);
  const double eps_tr = cfg.eps * trace(Kt) / static_cast<double>(m);
  const SymMatrix A = stabilized(Kt, cfg.tau, eps_tr);
  const SymMatrix Ainv = psd_inverse(A, 0.0);

  Vec b(m);
  for (std::size_t i = 0; i < m; ++i)
    b[i] = std::sqrt(static_cast<double>(m) * w[i]);

  // dE = tr(C dK): start with the frozen part C = -tau/2 B Ainv B.
  SymMatrix C(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      C(i, j) = -0.5 * cfg.tau * b[i] * Ainv(i, j) * b[j];

  const double trAinv = trace(Ainv);

  if (!cfg.freeze_stabilizer) {
    // eps_tr = eps sum_i w_i K_ii; its direct K-dependence.
    for (std::size_t i = 0; i < m; ++i)
      C(i, i) += -0.5 * cfg.eps * trAinv * w[i];
  }

  if (!cfg.freeze_weights && cfg.alpha > 0.0) {
    // Coefficients c_i of dw_i.
    Vec c(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      // d(A-term)/db_i collapses to -tau [K B Ainv]_{ii}; b_i = sqrt(m w_i)
      // so db_i/dw_i = m / (2 b_i).
      double kba = 0.0;
      for (std::size_t j = 0; j < m; ++j) kba += K(i, j) * b[j] * Ainv(j, i);
      const double bi = std::max(b[i], 1e-300);
      c[i] = -cfg.tau * kba * static_cast<double>(m) / (2.0 * bi);
      if (!cfg.freeze_stabilizer) c[i] += -0.5 * cfg.eps * trAinv * K(i, i);
    }
    // Through the softmax-like normalization w = s^alpha / sum, then through
    // the leverage scores s_i = 1 - ridge [P]_{ii}, P = (K + ridge I)^{-1}:
    //   sum_i c_i dw_i = sum_i e_i ds_i,  ds_i = ridge [P dK P]_{ii}.
    double S = 0.0, cbar = 0.0;
    Vec u(m);
    for (std::size_t i = 0; i < m; ++i) {
      u[i] = std::pow(std::max(lev.scores[i], 1e-15), cfg.alpha);
      S += u[i];
      cbar += c[i] * w[i];
    }
    Vec e(m);
    for (std::size_t i = 0; i < m; ++i)
      e[i] = (c[i] - cbar) / S * cfg.alpha *
             std::pow(std::max(lev.scores[i], 1e-15), cfg.alpha - 1.0);

    const SymMatrix P = psd_inverse(K, cfg.ridge);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += P(i, k) * e[k] * P(k, j);
        C(i, j) += cfg.ridge * acc;
      }
  }

  // dE = tr(C dK), K = Z Z^T, C symmetric  =>  grad = 2 C Z.
  Matrix grad(m, D);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += C(i, k) * Z(k, j);
      grad(i, j) = 2.0 * acc;
    }
  return grad;
}

}  // namespace oscar
