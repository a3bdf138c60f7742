#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "oscar/flow.hpp"

namespace oscar {

namespace {

constexpr double kVarFloor = 1e-12;   // floor on s_k(t)
constexpr double kTimeEdge = 1e-9;    // gmm_velocity valid for t < 1 - kTimeEdge
constexpr double kTimeClamp = 1e-8;   // GmmField evaluates at min(t, 1 - kTimeClamp)

// Posterior responsibilities r_k of the components at (x, t) plus the
// per-component quantities the velocity and its Jacobian both need.
struct Blend {
  Vec r;      // K responsibilities
  Vec s;      // K variances s_k(t)
  Vec c;      // K slopes: d(velocity_k)/dx = c_k * I
  Matrix bk;  // K x d component velocities mu-part included
  Matrix ak;  // K x d gradients of the log-responsibility: -(x - t mu_k)/s_k
};

Blend blend_at(const GmmSpec& spec, std::span<const double> x, double t) {
  const std::size_t K = spec.weights.size();
  const std::size_t d = spec.means.cols;
  Blend bl;
  bl.r.resize(K);
  bl.s.resize(K);
  bl.c.resize(K);
  bl.bk = Matrix(K, d);
  bl.ak = Matrix(K, d);

  Vec logw(K);
  double maxlog = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const double sig2 = spec.stds[k] * spec.stds[k];
    const double s = std::max((1.0 - t) * (1.0 - t) + t * t * sig2, kVarFloor);
    bl.s[k] = s;
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x[j] - t * spec.means(k, j);
      q += diff * diff;
      bl.ak(k, j) = -diff / s;
    }
    logw[k] = std::log(spec.weights[k]) -
              0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * s) -
              0.5 * q / s;
    maxlog = std::max(maxlog, logw[k]);

    // E[x1|x,k] - E[x0|x,k] = mu_k + c_k (x - t mu_k), with
    // c_k = (t sigma_k^2 - (1-t)) / s_k.
    const double ck = (t * sig2 - (1.0 - t)) / s;
    bl.c[k] = ck;
    for (std::size_t j = 0; j < d; ++j)
      bl.bk(k, j) = spec.means(k, j) + ck * (x[j] - t * spec.means(k, j));
  }

  double z = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    bl.r[k] = std::exp(logw[k] - maxlog);
    z += bl.r[k];
  }
  for (std::size_t k = 0; k < K; ++k) bl.r[k] /= z;
  return bl;
}

void check_time(double t) {
  if (t >= 1.0 - kTimeEdge)
    throw DegenerateTime("gmm_velocity: t = " + std::to_string(t) +
                         " too close to the data endpoint");
}

}  // namespace

void validate_gmm(const GmmSpec& spec) {
  const std::size_t K = spec.means.rows;
  if (K == 0) throw SchemaError("gmm: no components");
  if (spec.stds.size() != K || spec.weights.size() != K)
    throw DimensionMismatch("gmm: means/stds/weights length mismatch");
  double sum = 0.0;
  for (double w : spec.weights) {
    if (!(w > 0.0)) throw SchemaError("gmm: weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw SchemaError("gmm: weights sum to " + std::to_string(sum) + ", not 1");
  for (double s : spec.stds)
    if (!(s >= 0.0)) throw SchemaError("gmm: negative std");
}

GmmSpec select_condition(const GmmSpec& spec, ConditionId cond) {
  if (cond == kUnconditional) return spec;
  const std::size_t k = static_cast<std::size_t>(cond - 1);
  if (cond < 1 || k >= spec.means.rows)
    throw SchemaError("condition label " + std::to_string(cond) +
                      " out of range for " + std::to_string(spec.means.rows) +
                      " components");
  GmmSpec out;
  out.means = Matrix(1, spec.means.cols);
  out.means.set_row(0, spec.means.row(k));
  out.stds = {spec.stds[k]};
  out.weights = {1.0};
  return out;
}

GmmSpec ring_gmm(std::size_t k, double radius, double sigma) {
  GmmSpec spec;
  spec.means = Matrix(k, 2);
  spec.stds.assign(k, sigma);
  spec.weights.assign(k, 1.0 / static_cast<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) /
                     static_cast<double>(k);
    spec.means(i, 0) = radius * std::cos(a);
    spec.means(i, 1) = radius * std::sin(a);
  }
  return spec;
}

GmmSpec grid_gmm(std::size_t side, double spacing, double sigma,
                 double center_x, double center_y) {
  const std::size_t k = side * side;
  GmmSpec spec;
  spec.means = Matrix(k, 2);
  spec.stds.assign(k, sigma);
  spec.weights.assign(k, 1.0 / static_cast<double>(k));
  const double off = 0.5 * spacing * static_cast<double>(side - 1);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      spec.means(i * side + j, 0) = center_x + spacing * static_cast<double>(i) - off;
      spec.means(i * side + j, 1) = center_y + spacing * static_cast<double>(j) - off;
    }
  return spec;
}

Vec gmm_sample(const GmmSpec& spec, std::uint64_t seed, std::uint32_t stream,
               std::uint64_t step, std::uint64_t particle) {
  const std::size_t d = spec.means.cols;
  // Component pick lives at a reserved index so it can never collide with
  // the gaussian blocks below.
  const double u = rng::uniform(seed, stream, step, particle, 0x7fffffffu);
  std::size_t k = spec.weights.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < spec.weights.size(); ++i) {
    acc += spec.weights[i];
    if (u < acc) {
      k = i;
      break;
    }
  }
  Vec x = rng::normal_vec(seed, stream, step, particle, d);
  for (std::size_t j = 0; j < d; ++j)
    x[j] = spec.means(k, j) + spec.stds[k] * x[j];
  return x;
}

Vec gmm_velocity(const GmmSpec& spec, std::span<const double> x, double t) {
  check_time(t);
  const Blend bl = blend_at(spec, x, t);
  const std::size_t K = spec.weights.size();
  const std::size_t d = spec.means.cols;
  Vec v(d, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < d; ++j) v[j] += bl.r[k] * bl.bk(k, j);
  return v;
}

Vec gmm_velocity_vjp(const GmmSpec& spec, std::span<const double> x, double t,
                     std::span<const double> cot) {
  check_time(t);
  const Blend bl = blend_at(spec, x, t);
  const std::size_t K = spec.weights.size();
  const std::size_t d = spec.means.cols;

  // J = sum_k r_k c_k I + sum_k b_k (r_k (a_k - abar))^T, where a_k is the
  // gradient of the k-th log responsibility and abar its blend. Hence
  // J^T u = (sum_k r_k c_k) u + sum_k r_k (a_k - abar) <b_k, u>.
  Vec abar(d, 0.0);
  double cbar = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    cbar += bl.r[k] * bl.c[k];
    for (std::size_t j = 0; j < d; ++j) abar[j] += bl.r[k] * bl.ak(k, j);
  }
  Vec out(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) out[j] = cbar * cot[j];
  for (std::size_t k = 0; k < K; ++k) {
    double bu = 0.0;
    for (std::size_t j = 0; j < d; ++j) bu += bl.bk(k, j) * cot[j];
    const double w = bl.r[k] * bu;
    for (std::size_t j = 0; j < d; ++j) out[j] += w * (bl.ak(k, j) - abar[j]);
  }
  return out;
}

GmmField::GmmField(GmmSpec spec, ConditionId cond)
    : spec_(select_condition(spec, cond)) {
  validate_gmm(spec_);
}

std::size_t GmmField::dim() const { return spec_.means.cols; }

Vec GmmField::value(std::span<const double> x, double t) const {
  return gmm_velocity(spec_, x, std::min(t, 1.0 - kTimeClamp));
}

Vec GmmField::vjp(std::span<const double> x, double t,
                  std::span<const double> cot) const {
  return gmm_velocity_vjp(spec_, x, std::min(t, 1.0 - kTimeClamp), cot);
}

double grid_rmse(const VelocityField& a, const VelocityField& b, double lo,
                 double hi, std::size_t n, const Vec& times) {
  double acc = 0.0;
  std::size_t count = 0;
  for (double t : times) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double fx = lo + (hi - lo) * static_cast<double>(i) /
                                   static_cast<double>(n - 1);
        const double fy = lo + (hi - lo) * static_cast<double>(j) /
                                   static_cast<double>(n - 1);
        const Vec x{fx, fy};
        const Vec va = a.value(x, t);
        const Vec vb = b.value(x, t);
        for (std::size_t c = 0; c < va.size(); ++c) {
          const double diff = va[c] - vb[c];
          acc += diff * diff;
          ++count;
        }
      }
    }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

}  // namespace oscar
