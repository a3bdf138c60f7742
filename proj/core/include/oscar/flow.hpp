#pragma once

#include <cstdint>
#include <memory>
#include <span>

#include "oscar/matrix.hpp"
#include "oscar/rng.hpp"

namespace oscar {

// Time convention used everywhere in this project: t = 0 is the noise end
// (x0 ~ N(0, I)), t = 1 is the data end, straight-line interpolation
//   x_t = (1 - t) * x0 + t * x1,
// and the regression target for the velocity field is x1 - x0.

// Condition labels: 0 selects the full mixture (unconditional), k >= 1
// selects component k-1 only.
using ConditionId = int;
inline constexpr ConditionId kUnconditional = 0;

// Isotropic Gaussian mixture in R^d.
struct GmmSpec {
  Matrix means;  // K x d
  Vec stds;      // K, per-component sigma
  Vec weights;   // K, positive, sums to 1
};

// Throws SchemaError / DimensionMismatch on malformed specs.
void validate_gmm(const GmmSpec& spec);

// The sub-mixture selected by a condition label (renormalized weights).
GmmSpec select_condition(const GmmSpec& spec, ConditionId cond);

// A mixture with K modes equally spaced on a circle of the given radius.
GmmSpec ring_gmm(std::size_t k, double radius, double sigma);

// A side x side grid of modes with the given spacing, centered on
// (center_x, center_y). Side = 3, spacing = 4, center 0 puts means on
// {-4, 0, 4}^2. An off-origin center keeps the marginal velocity bounded
// away from zero over the whole trajectory, which the control projector
// relies on (its residual scales like delta / |v|^2).
GmmSpec grid_gmm(std::size_t side, double spacing, double sigma,
                 double center_x = 0.0, double center_y = 0.0);

// One draw from the mixture, addressed by counter (deterministic).
Vec gmm_sample(const GmmSpec& spec, std::uint64_t seed, std::uint32_t stream,
               std::uint64_t step, std::uint64_t particle);

// Closed-form marginal velocity E[x1 - x0 | x_t = x] for the straight-line
// interpolation with x0 ~ N(0,I) and x1 from the mixture. Per component,
// with s_k(t) = (1-t)^2 + t^2 sigma_k^2 (floored at 1e-12):
//   E[x1 | x, k] = mu_k + t sigma_k^2 / s_k * (x - t mu_k)
//   E[x0 | x, k] = (1-t) / s_k * (x - t mu_k)
// blended by the posterior responsibilities of the components at (x, t).
// Throws DegenerateTime for t >= 1 - 1e-9.
Vec gmm_velocity(const GmmSpec& spec, std::span<const double> x, double t);

// Exact (J_x v)^T u for the field above: the responsibility softmax is
// differentiated analytically, no autodiff involved.
Vec gmm_velocity_vjp(const GmmSpec& spec, std::span<const double> x, double t,
                     std::span<const double> cot);

// Evaluation contract every consumer (endpoint predictor, sampler, tests)
// programs against: the velocity and its state-Jacobian transpose action.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual std::size_t dim() const = 0;
  virtual Vec value(std::span<const double> x, double t) const = 0;
  virtual Vec vjp(std::span<const double> x, double t,
                  std::span<const double> cot) const = 0;
};

// Closed-form mixture field. Evaluation times are clamped to 1 - 1e-8 so
// that grids touching t = 1 (the final corrector stage and the endpoint
// probe at t_end = 1) stay inside the valid domain of the closed form; the
// clamp changes values by O(1e-8), far below every tolerance in use.
class GmmField : public VelocityField {
 public:
  GmmField(GmmSpec spec, ConditionId cond = kUnconditional);
  std::size_t dim() const override;
  Vec value(std::span<const double> x, double t) const override;
  Vec vjp(std::span<const double> x, double t,
          std::span<const double> cot) const override;
  const GmmSpec& spec() const { return spec_; }

 private:
  GmmSpec spec_;  // condition already applied
};

// v == 0. Used by the verification harness to isolate the control dynamics
// from transport.
class ZeroField : public VelocityField {
 public:
  explicit ZeroField(std::size_t d) : d_(d) {}
  std::size_t dim() const override { return d_; }
  Vec value(std::span<const double>, double) const override { return Vec(d_, 0.0); }
  Vec vjp(std::span<const double>, double, std::span<const double>) const override {
    return Vec(d_, 0.0);
  }

 private:
  std::size_t d_;
};

// Small tanh MLP velocity model. Input is [x, t, onehot(cond)] (t as a raw
// scalar; the one-hot block is absent when cond_dim == 0), hidden layers are
// tanh, the output layer is linear.
struct MlpVelocity {
  std::size_t state_dim = 0;
  std::size_t cond_dim = 0;       // number of condition labels (0 = none)
  std::vector<Matrix> weights;    // layer l: out x in
  std::vector<Vec> biases;

  std::size_t input_dim() const { return state_dim + 1 + cond_dim; }
  std::size_t layers() const { return weights.size(); }
};

// Fresh model with the given hidden widths; weights ~ N(0, 1/fan_in) drawn
// from the counter generator, biases zero.
MlpVelocity make_mlp(std::size_t state_dim, std::size_t cond_dim,
                     const std::vector<std::size_t>& hidden, std::uint64_t seed);

Vec mlp_forward(const MlpVelocity& m, std::span<const double> x, double t,
                ConditionId cond = kUnconditional);

// (J_x v)^T u by manual reverse pass; only the state block of the input
// gradient is returned.
Vec mlp_vjp(const MlpVelocity& m, std::span<const double> x, double t,
            std::span<const double> cot, ConditionId cond = kUnconditional);

class MlpField : public VelocityField {
 public:
  MlpField(MlpVelocity model, ConditionId cond = kUnconditional)
      : model_(std::move(model)), cond_(cond) {}
  std::size_t dim() const override { return model_.state_dim; }
  Vec value(std::span<const double> x, double t) const override {
    return mlp_forward(model_, x, t, cond_);
  }
  Vec vjp(std::span<const double> x, double t,
          std::span<const double> cot) const override {
    return mlp_vjp(model_, x, t, cot, cond_);
  }
  const MlpVelocity& model() const { return model_; }

 private:
  MlpVelocity model_;
  ConditionId cond_;
};

struct TrainConfig {
  std::size_t steps = 5000;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 42;
};

struct TrainResult {
  Vec loss_trace;  // one entry per optimizer step
};

// Flow-matching regression: minimize E || (x1 - x0) - v(x_t, t | c) ||^2 over
// pairs (x0 ~ N(0,I), x1 ~ mixture), t ~ U[0,1), with Adam (0.9 / 0.999 /
// 1e-8). Deterministic for a fixed seed. Throws DivergedLoss if the loss
// goes non-finite.
TrainResult train_flow(const GmmSpec& spec, MlpVelocity& model,
                       const TrainConfig& cfg, ConditionId cond = kUnconditional);

// RMS difference between two fields over an n x n grid on [lo, hi]^2 at the
// given times, aggregated over all points and components. Used by the
// trained-field fidelity checks.
double grid_rmse(const VelocityField& a, const VelocityField& b, double lo,
                 double hi, std::size_t n, const Vec& times);

}  // namespace oscar
