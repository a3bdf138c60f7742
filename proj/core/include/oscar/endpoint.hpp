#pragma once

#include <cstdint>

#include "oscar/flow.hpp"
#include "oscar/matrix.hpp"

namespace oscar {

// Frozen feature map phi applied to predicted endpoints. Three kinds:
//   identity:     z = x                       (D = d)
//   fixed_linear: z = W x                     (seeded W, rows unit norm)
//   tanh_lift:    z = tanh(W x + b)           (seeded W, b; the default)
// W and b are drawn once from the counter generator; the same (kind, dims,
// seed) always gives the same map.
struct EncoderSpec {
  enum class Kind { identity, fixed_linear, tanh_lift };
  Kind kind = Kind::tanh_lift;
  std::size_t in_dim = 2;
  std::size_t out_dim = 8;
  std::uint64_t seed = 2024;
  // Scale of the random W entries relative to 1/sqrt(in_dim); chosen so the
  // tanh stays out of its saturated tails for desk-scale states.
  double weight_scale = 0.3;
  double bias_scale = 0.1;

  std::size_t d() const { return in_dim; }
  std::size_t D() const { return kind == Kind::identity ? in_dim : out_dim; }
};

// Materialized encoder (W, b realized from the spec).
struct Encoder {
  EncoderSpec spec;
  Matrix W;  // out_dim x in_dim (empty for identity)
  Vec b;     // out_dim (zero for fixed_linear)
};

Encoder make_encoder(const EncoderSpec& spec);

Vec encode(const Encoder& enc, std::span<const double> x);

// (J_x phi)^T u, exact.
Vec encode_vjp(const Encoder& enc, std::span<const double> x,
               std::span<const double> u);

// One Heun (explicit trapezoid) step across [t, t_end]:
//   x_e    = x + (t_end - t) * v(x, t)
//   result = x + (t_end - t)/2 * (v(x, t) + v(x_e, t_end))
// t == t_end is allowed and returns x unchanged (used at the final grid
// node, where the remaining interval is empty).
struct EndpointEstimate {
  Vec endpoint;   // psi-hat(x, t)
  Vec x_euler;    // the predictor stage point x_e
  Vec v_start;    // v(x, t)
  Vec v_end;      // v(x_e, t_end)
};

EndpointEstimate heun_endpoint(const VelocityField& field,
                               std::span<const double> x, double t,
                               double t_end = 1.0);

// Which dependencies the endpoint VJP tracks. `exact` differentiates the
// full two-stage composition (the corrector velocity's dependence on x
// through the predictor stage included); `frozen_corrector` treats the
// predictor-stage point as a constant, an ablation of the cheap variant.
enum class EndpointVjpMode { exact, frozen_corrector };

// (J_x psi-hat)^T u via two field VJP calls:
//   J^T u = u + dt/2 * J2^T u + J1^T (dt/2 * u + dt^2/2 * J2^T u)
// where J1 = dv/dx at (x, t) and J2 = dv/dx at (x_e, t_end).
Vec heun_endpoint_vjp(const VelocityField& field, std::span<const double> x,
                      double t, std::span<const double> u, double t_end = 1.0,
                      EndpointVjpMode mode = EndpointVjpMode::exact);

// Pull a feature-space gradient back to state space, one row per particle:
//   g_i = (J_x psi-hat)^T (J_u phi)^T featureGrad_i
// evaluated at u = psi-hat(x_i, t). Rows are independent.
Matrix pullback_control(const VelocityField& field, const Encoder& enc,
                        const Matrix& states, double t,
                        const Matrix& feature_grad, double t_end = 1.0,
                        EndpointVjpMode mode = EndpointVjpMode::exact);

}  // namespace oscar
