#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "oscar/endpoint.hpp"
#include "oscar/energy.hpp"
#include "oscar/flow.hpp"
#include "oscar/schedules.hpp"

namespace oscar {

// A population of particles advanced jointly along the flow.
struct ParticleSet {
  Matrix states;  // m x d
  double t = 0.0;
  std::uint64_t seed = 0;
};

struct SamplerConfig {
  std::size_t particles = 64;
  std::size_t steps = 100;  // uniform grid 0 = t_0 < ... < t_T = 1
  std::uint64_t seed = 1;

  double lambda = 0.95;           // control partial-orthogonality
  double noise_lambda = 0.95;     // noise partial-orthogonality
  double delta = 1e-8;            // regularizer in both projection denominators
  double trust_ratio = 0.3;       // control norm cap as a fraction of |v|
  double vnorm_threshold = 1e-4;  // below this |v|, skip projection and cap

  GammaSchedule gamma;
  BetaSchedule beta;
  EnergyConfig energy;
  EncoderSpec encoder;
  EndpointVjpMode vjp_mode = EndpointVjpMode::exact;

  // Initial particle distribution.
  enum class Init { gauss, disk };
  Init init = Init::gauss;
  double disk_radius = 1.0;

  std::size_t snapshot_stride = 0;  // 0 = no intermediate state snapshots

  // Test hook: "parallel-control" adds a deliberate velocity-parallel
  // component to the projected control so the verification harness can be
  // seen to catch it. Empty in normal use.
  std::string debug_fault;
};

// One record per grid node. Observables refer to the state at that node;
// the residual fields describe the control/noise applied on the step leaving
// the node (zero at the final node and on steps with no control or noise).
struct StepRecord {
  std::size_t step = 0;
  double t = 0.0;
  double energy = 0.0;
  double log_volume = 0.0;
  double eps_tr = 0.0;
  double max_orth_residual = 0.0;   // max_i |<g_i,v_i>| / (|g_i||v_i|), projected particles
  double max_noise_residual = 0.0;  // same for the injected noise
  double max_control_frac = 0.0;    // max_i |control displacement| / (|v_i| dt)
  double mean_alignment = 0.0;      // mean_i <x_i, v_i/(|v_i|+delta)>
  std::size_t skipped = 0;          // particles below the velocity-norm threshold
  std::uint64_t state_checksum = 0;
  Vec alignment;       // per particle
  Vec orth_residual;   // per particle (0 when no control applied)
  Vec noise_residual;  // per particle (0 when no noise applied)
};

struct RunTrace {
  std::string method;  // "oscar" or "baseline"
  std::uint64_t seed = 0;
  std::size_t particles = 0;
  std::size_t dim = 0;
  std::vector<StepRecord> records;  // T+1 entries (initial node included)
  Matrix final_states;
  std::vector<std::size_t> snapshot_steps;
  std::vector<Matrix> snapshots;
};

// g - lambda <g,v>/(|v|^2 + delta) v
Vec project_partial(std::span<const double> g, std::span<const double> v,
                    double lambda, double delta);

// g * min(1, ratio |v| / (|g| + eps))
Vec cap_trust(std::span<const double> g, std::span<const double> v, double ratio,
              double eps);

// sqrt(beta_step) * (xi projected against v by noise_lambda), with xi a
// standard normal draw addressed by (seed, step, particle). `project`
// is cleared by the caller when |v| is below the velocity-norm threshold.
Vec orth_noise(std::uint64_t seed, std::uint64_t step, std::uint64_t particle,
               std::span<const double> v, double noise_lambda, double beta_step,
               double delta, bool project);

Vec uniform_time_grid(std::size_t steps);

// Initial particles from the configured distribution (standard normal, or
// uniform on a disk of the configured radius for 2-d problems).
Matrix draw_init(const SamplerConfig& cfg, std::size_t dim);

// One controlled step from the node at ps.t to t_next: base velocities,
// endpoint features, set-energy gradient, pullback, projection, trust cap,
// orthogonal noise, and a Heun update whose predictor and corrector stages
// both subtract the same per-step control gamma(t) g_i. Returns the record
// for the node being left. Throws NonFinite if any state goes non-finite.
StepRecord oscar_step(ParticleSet& ps, const VelocityField& field,
                      const Encoder& enc, const SamplerConfig& cfg,
                      std::size_t step_index, double t_next);

// Plain Heun step (no control, no noise) with the same diagnostics.
StepRecord baseline_step(ParticleSet& ps, const VelocityField& field,
                         const Encoder& enc, const SamplerConfig& cfg,
                         std::size_t step_index, double t_next);

enum class Method { oscar, baseline };

// Full run over the uniform grid. With Method::baseline (or a config whose
// gamma, noise budget and fault hook are all zero) the state sequence is
// bit-identical to the plain Heun integration of the base flow.
RunTrace run(const SamplerConfig& cfg, const VelocityField& field, Method method,
             const std::optional<Matrix>& init = std::nullopt);

}  // namespace oscar
