#include <cmath>
#include <string>

#include "oscar/flow.hpp"

namespace oscar {

namespace {

// Input vector [x, t, onehot(cond)]. Label 0 is the unconditional case and
// maps to an all-zero one-hot block; label k >= 1 sets position k-1.
Vec assemble_input(const MlpVelocity& m, std::span<const double> x, double t,
                   ConditionId cond) {
  if (x.size() != m.state_dim)
    throw DimensionMismatch("mlp: state size " + std::to_string(x.size()) +
                            " != " + std::to_string(m.state_dim));
  if (cond < 0 || static_cast<std::size_t>(cond) > m.cond_dim)
    throw SchemaError("mlp: condition label " + std::to_string(cond) +
                      " out of range");
  Vec u(m.input_dim(), 0.0);
  for (std::size_t i = 0; i < m.state_dim; ++i) u[i] = x[i];
  u[m.state_dim] = t;
  if (cond != kUnconditional) u[m.state_dim + 1 + (cond - 1)] = 1.0;
  return u;
}

// Forward pass keeping post-activation values per layer (index 0 is the
// input itself); hidden layers are tanh, the last layer is linear.
std::vector<Vec> forward_cache(const MlpVelocity& m, const Vec& input) {
  std::vector<Vec> h;
  h.reserve(m.layers() + 1);
  h.push_back(input);
  for (std::size_t l = 0; l < m.layers(); ++l) {
    const Matrix& W = m.weights[l];
    Vec z(W.rows);
    for (std::size_t i = 0; i < W.rows; ++i) {
      double s = m.biases[l][i];
      for (std::size_t j = 0; j < W.cols; ++j) s += W(i, j) * h.back()[j];
      z[i] = s;
    }
    if (l + 1 < m.layers())
      for (double& v : z) v = std::tanh(v);
    h.push_back(std::move(z));
  }
  return h;
}

// Reverse pass from an output cotangent. Fills parameter gradients when
// grad_W / grad_b are non-null (accumulating), and returns the input-side
// cotangent.
Vec backward(const MlpVelocity& m, const std::vector<Vec>& h, Vec delta,
             std::vector<Matrix>* grad_W, std::vector<Vec>* grad_b) {
  for (std::size_t l = m.layers(); l-- > 0;) {
    const Matrix& W = m.weights[l];
    const Vec& hin = h[l];
    if (grad_W) {
      Matrix& gW = (*grad_W)[l];
      Vec& gb = (*grad_b)[l];
      for (std::size_t i = 0; i < W.rows; ++i) {
        gb[i] += delta[i];
        for (std::size_t j = 0; j < W.cols; ++j) gW(i, j) += delta[i] * hin[j];
      }
    }
    Vec prev(W.cols, 0.0);
    for (std::size_t i = 0; i < W.rows; ++i)
      for (std::size_t j = 0; j < W.cols; ++j) prev[j] += W(i, j) * delta[i];
    if (l > 0) {
      // h[l] holds tanh(z) for hidden layers; tanh' = 1 - tanh^2.
      for (std::size_t j = 0; j < prev.size(); ++j)
        prev[j] *= 1.0 - h[l][j] * h[l][j];
    }
    delta = std::move(prev);
  }
  return delta;
}

}  // namespace

MlpVelocity make_mlp(std::size_t state_dim, std::size_t cond_dim,
                     const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  MlpVelocity m;
  m.state_dim = state_dim;
  m.cond_dim = cond_dim;
  std::vector<std::size_t> widths;
  widths.push_back(state_dim + 1 + cond_dim);
  for (std::size_t w : hidden) widths.push_back(w);
  widths.push_back(state_dim);

  std::uint64_t unit = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Matrix W(widths[l + 1], widths[l]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    for (std::size_t i = 0; i < W.rows; ++i) {
      const Vec z = rng::normal_vec(seed, rng::kWeights, l, unit++, W.cols);
      for (std::size_t j = 0; j < W.cols; ++j) W(i, j) = scale * z[j];
    }
    m.weights.push_back(std::move(W));
    m.biases.emplace_back(widths[l + 1], 0.0);
  }
  return m;
}

Vec mlp_forward(const MlpVelocity& m, std::span<const double> x, double t,
                ConditionId cond) {
  const auto h = forward_cache(m, assemble_input(m, x, t, cond));
  return h.back();
}

Vec mlp_vjp(const MlpVelocity& m, std::span<const double> x, double t,
            std::span<const double> cot, ConditionId cond) {
  const auto h = forward_cache(m, assemble_input(m, x, t, cond));
  Vec delta(cot.begin(), cot.end());
  const Vec gin = backward(m, h, std::move(delta), nullptr, nullptr);
  return Vec(gin.begin(), gin.begin() + m.state_dim);
}

TrainResult train_flow(const GmmSpec& spec, MlpVelocity& model,
                       const TrainConfig& cfg, ConditionId cond) {
  validate_gmm(spec);
  const GmmSpec target = select_condition(spec, cond);
  const std::size_t d = model.state_dim;
  if (target.means.cols != d)
    throw DimensionMismatch("train_flow: model state_dim != gmm dimension");

  std::vector<Matrix> gW, mW, vW;
  std::vector<Vec> gb, mb, vb;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    gW.emplace_back(model.weights[l].rows, model.weights[l].cols);
    mW.emplace_back(model.weights[l].rows, model.weights[l].cols);
    vW.emplace_back(model.weights[l].rows, model.weights[l].cols);
    gb.emplace_back(model.biases[l].size(), 0.0);
    mb.emplace_back(model.biases[l].size(), 0.0);
    vb.emplace_back(model.biases[l].size(), 0.0);
  }

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  TrainResult result;
  result.loss_trace.reserve(cfg.steps);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t l = 0; l < model.layers(); ++l) {
      std::fill(gW[l].data.begin(), gW[l].data.end(), 0.0);
      std::fill(gb[l].begin(), gb[l].end(), 0.0);
    }

    double loss = 0.0;
    for (std::size_t item = 0; item < cfg.batch; ++item) {
      // Three disjoint counter addresses per item: x0, x1, t.
      const Vec x0 = rng::normal_vec(cfg.seed, rng::kTrain, step, 3 * item, d);
      const Vec x1 = gmm_sample(target, cfg.seed, rng::kTrain, step, 3 * item + 1);
      const double t = rng::uniform(cfg.seed, rng::kTrain, step, 3 * item + 2, 0);

      Vec xt(d);
      for (std::size_t j = 0; j < d; ++j)
        xt[j] = (1.0 - t) * x0[j] + t * x1[j];

      const auto h = forward_cache(model, assemble_input(model, xt, t, cond));
      const Vec& v = h.back();
      Vec delta(d);
      for (std::size_t j = 0; j < d; ++j) {
        const double r = v[j] - (x1[j] - x0[j]);
        loss += r * r;
        delta[j] = 2.0 * r / static_cast<double>(cfg.batch);
      }
      backward(model, h, std::move(delta), &gW, &gb);
    }
    loss /= static_cast<double>(cfg.batch);
    if (!std::isfinite(loss))
      throw DivergedLoss("train_flow: loss non-finite at step " +
                         std::to_string(step));
    result.loss_trace.push_back(loss);

    // Adam with bias correction.
    const double t1 = 1.0 - std::pow(b1, static_cast<double>(step + 1));
    const double t2 = 1.0 - std::pow(b2, static_cast<double>(step + 1));
    for (std::size_t l = 0; l < model.layers(); ++l) {
      for (std::size_t i = 0; i < gW[l].data.size(); ++i) {
        const double g = gW[l].data[i];
        mW[l].data[i] = b1 * mW[l].data[i] + (1.0 - b1) * g;
        vW[l].data[i] = b2 * vW[l].data[i] + (1.0 - b2) * g * g;
        model.weights[l].data[i] -=
            cfg.lr * (mW[l].data[i] / t1) / (std::sqrt(vW[l].data[i] / t2) + eps);
      }
      for (std::size_t i = 0; i < gb[l].size(); ++i) {
        const double g = gb[l][i];
        mb[l][i] = b1 * mb[l][i] + (1.0 - b1) * g;
        vb[l][i] = b2 * vb[l][i] + (1.0 - b2) * g * g;
        model.biases[l][i] -=
            cfg.lr * (mb[l][i] / t1) / (std::sqrt(vb[l][i] / t2) + eps);
      }
    }
  }
  return result;
}

}  // namespace oscar
