#include "oscar/endpoint.hpp"

#include <cmath>
#include <string>

namespace oscar {

Encoder make_encoder(const EncoderSpec& spec) {
  Encoder enc;
  enc.spec = spec;
  if (spec.kind == EncoderSpec::Kind::identity) return enc;

  enc.W = Matrix(spec.out_dim, spec.in_dim);
  const double scale = spec.weight_scale / std::sqrt(static_cast<double>(spec.in_dim));
  for (std::size_t i = 0; i < spec.out_dim; ++i) {
    const Vec z = rng::normal_vec(spec.seed, rng::kWeights, 0, i, spec.in_dim);
    for (std::size_t j = 0; j < spec.in_dim; ++j) enc.W(i, j) = scale * z[j];
  }
  if (spec.kind == EncoderSpec::Kind::fixed_linear) {
    // Unit-norm rows.
    for (std::size_t i = 0; i < spec.out_dim; ++i) {
      const double n = norm2(enc.W.row(i));
      if (n > 0.0)
        for (std::size_t j = 0; j < spec.in_dim; ++j) enc.W(i, j) /= n;
    }
    enc.b.assign(spec.out_dim, 0.0);
  } else {  // tanh_lift
    enc.b.resize(spec.out_dim);
    const Vec z = rng::normal_vec(spec.seed, rng::kWeights, 1, 0, spec.out_dim);
    for (std::size_t i = 0; i < spec.out_dim; ++i) enc.b[i] = spec.bias_scale * z[i];
  }
  return enc;
}

Vec encode(const Encoder& enc, std::span<const double> x) {
  if (x.size() != enc.spec.in_dim)
    throw DimensionMismatch("encode: state dim mismatch");
  switch (enc.spec.kind) {
    case EncoderSpec::Kind::identity:
      return to_vec(x);
    case EncoderSpec::Kind::fixed_linear:
    case EncoderSpec::Kind::tanh_lift: {
      Vec z(enc.spec.out_dim);
      for (std::size_t i = 0; i < enc.spec.out_dim; ++i) {
        double s = enc.b[i];
        for (std::size_t j = 0; j < enc.spec.in_dim; ++j) s += enc.W(i, j) * x[j];
        z[i] = (enc.spec.kind == EncoderSpec::Kind::tanh_lift) ? std::tanh(s) : s;
      }
      return z;
    }
  }
  return {};
}

Vec encode_vjp(const Encoder& enc, std::span<const double> x,
               std::span<const double> u) {
  if (u.size() != enc.spec.D())
    throw DimensionMismatch("encode_vjp: cotangent dim mismatch");
  switch (enc.spec.kind) {
    case EncoderSpec::Kind::identity:
      return to_vec(u);
    case EncoderSpec::Kind::fixed_linear: {
      Vec g(enc.spec.in_dim, 0.0);
      for (std::size_t i = 0; i < enc.spec.out_dim; ++i)
        for (std::size_t j = 0; j < enc.spec.in_dim; ++j)
          g[j] += enc.W(i, j) * u[i];
      return g;
    }
    case EncoderSpec::Kind::tanh_lift: {
      // d tanh(Wx+b)/dx = diag(1 - z^2) W with z the encoded value.
      Vec g(enc.spec.in_dim, 0.0);
      for (std::size_t i = 0; i < enc.spec.out_dim; ++i) {
        double s = enc.b[i];
        for (std::size_t j = 0; j < enc.spec.in_dim; ++j) s += enc.W(i, j) * x[j];
        const double z = std::tanh(s);
        const double w = (1.0 - z * z) * u[i];
        for (std::size_t j = 0; j < enc.spec.in_dim; ++j) g[j] += w * enc.W(i, j);
      }
      return g;
    }
  }
  return {};
}

EndpointEstimate heun_endpoint(const VelocityField& field,
                               std::span<const double> x, double t,
                               double t_end) {
  if (t < 0.0 || t > t_end || t_end > 1.0)
    throw Error("heun_endpoint: need 0 <= t <= t_end <= 1, got t=" +
                std::to_string(t) + " t_end=" + std::to_string(t_end));
  EndpointEstimate est;
  const double dt = t_end - t;
  if (dt == 0.0) {
    est.endpoint = to_vec(x);
    est.x_euler = to_vec(x);
    est.v_start.assign(x.size(), 0.0);
    est.v_end.assign(x.size(), 0.0);
    return est;
  }
  est.v_start = field.value(x, t);
  est.x_euler.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    est.x_euler[j] = x[j] + dt * est.v_start[j];
  est.v_end = field.value(est.x_euler, t_end);
  est.endpoint.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    est.endpoint[j] = x[j] + 0.5 * dt * (est.v_start[j] + est.v_end[j]);
  return est;
}

Vec heun_endpoint_vjp(const VelocityField& field, std::span<const double> x,
                      double t, std::span<const double> u, double t_end,
                      EndpointVjpMode mode) {
  const double dt = t_end - t;
  if (dt == 0.0) return to_vec(u);

  // Recompute the predictor stage (cheap at desk scale, keeps the signature
  // stateless), then reverse through the composition.
  Vec v1 = field.value(x, t);
  Vec xe(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) xe[j] = x[j] + dt * v1[j];

  const Vec w2 = field.vjp(xe, t_end, u);  // J2^T u

  Vec cot1(x.size());
  if (mode == EndpointVjpMode::exact) {
    // J^T u = u + dt/2 w2 + J1^T (dt/2 u + dt^2/2 w2)
    for (std::size_t j = 0; j < x.size(); ++j)
      cot1[j] = 0.5 * dt * u[j] + 0.5 * dt * dt * w2[j];
  } else {
    // Predictor point frozen: the corrector velocity contributes only its
    // direct dt/2 * J2^T... nothing through x_e, so J^T u = u + dt/2 w2
    // + dt/2 J1^T u.
    for (std::size_t j = 0; j < x.size(); ++j) cot1[j] = 0.5 * dt * u[j];
  }
  const Vec w1 = field.vjp(x, t, cot1);

  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = u[j] + 0.5 * dt * w2[j] + w1[j];
  return out;
}

Matrix pullback_control(const VelocityField& field, const Encoder& enc,
                        const Matrix& states, double t,
                        const Matrix& feature_grad, double t_end,
                        EndpointVjpMode mode) {
  const std::size_t m = states.rows;
  const std::size_t d = states.cols;
  if (feature_grad.rows != m || feature_grad.cols != enc.spec.D())
    throw DimensionMismatch("pullback_control: feature gradient shape mismatch");
  Matrix g(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    const auto est = heun_endpoint(field, states.row(i), t, t_end);
    const Vec c = encode_vjp(enc, est.endpoint, feature_grad.row(i));
    const Vec gi = heun_endpoint_vjp(field, states.row(i), t, c, t_end, mode);
    g.set_row(i, gi);
  }
  return g;
}

}  // namespace oscar
