#pragma once

#include <string>

#include "oscar/sampler.hpp"

namespace oscar {

// Empirical checks of the identities and qualitative predictions behind the
// sampler: exact identities are checked at tight tolerances; scaling laws
// get seed-averaged estimates with uncertainty attached. Every tolerance is
// pinned here, next to the check it guards.
namespace tol {
inline constexpr double kVolumeIdentity = 1e-12;   // |E + log V|
inline constexpr double kPullbackRel = 1e-4;       // VJP vs central differences
inline constexpr double kOrthRel = 1e-6;           // |<g,v>| / (|g||v|)
inline constexpr double kDescentSlack = 1e-12;     // per-step strict descent
}  // namespace tol

struct CheckResult {
  std::string name;
  bool pass = false;
  double stat = 0.0;  // the quantity compared against the tolerance
  double tolerance = 0.0;
  std::string detail;
};

// |energy + log_volume| over n random feature sets of mixed shapes, plus the
// one-row closed form -1/2 log(1 + tau |z|^2 + eps_tr) recomputed by hand.
CheckResult check_volume_identity(std::size_t n_sets, std::uint64_t seed);

// Control pullback vs a central finite-difference probe of the frozen
// energy-through-dynamics composition, over n random small configurations
// (GMM field, tanh-lift encoder, a handful of particles).
CheckResult check_pullback(std::size_t n_configs, std::uint64_t seed);

// Full-strictness projections: run the sampler with lambda = noise_lambda = 1
// and take the worst recorded control/noise residual over all steps and
// particles above the velocity-norm threshold.
CheckResult check_orthogonality(const SamplerConfig& cfg,
                                const VelocityField& field);

// gamma0 = 0 plus zero noise budget must reproduce the plain integrator bit
// for bit, per-node state checksums compared across n seeds.
CheckResult check_reduction(const SamplerConfig& cfg, const VelocityField& field,
                            std::size_t n_seeds);

enum class DescentMode {
  strict_in_gate,        // single run, beta == 0: every in-gate step descends
  averaged_final_third,  // n seeds: mean energy nonincreasing within 1 SE/step
};
CheckResult check_descent(const SamplerConfig& cfg, const VelocityField& field,
                          std::size_t n_seeds, DescentMode mode);

// Terminal alignment deviation |y(1) - y_base(1)| as a function of the noise
// budget and the step size, with gamma0 = 0 (noise is the only difference
// from the baseline). Slopes are least-squares in log-log with a bootstrap
// half-width over seeds.
struct DeviationReport {
  CheckResult result;
  Vec budgets;
  Vec mean_dev;       // per budget, at the base step count
  Vec stderr_dev;     // per budget
  double slope_budget = 0.0;       // d log dev / d log B
  double slope_halfwidth = 0.0;    // bootstrap 95% half-width
  double ratio_double_budget = 0.0;
  double ratio_half_dt = 0.0;
  double ratio_half_dt_stderr = 0.0;
};
DeviationReport check_deviation_scaling(const SamplerConfig& cfg,
                                        const VelocityField& field,
                                        const Vec& budgets, std::size_t n_seeds);

// Hutchinson/finite-difference estimate of the trace of the energy Hessian
// on random feature sets: a scale diagnostic for the curvature constant in
// the deviation bound, explicitly an estimate and not a certified value.
double estimate_curvature_trace(std::size_t m, std::size_t D,
                                const EnergyConfig& cfg, std::size_t n_probes,
                                std::uint64_t seed);

struct TheoryReport {
  CheckResult volume_identity;
  CheckResult pullback;
  CheckResult orthogonality;
  CheckResult reduction;
  CheckResult descent_strict;
  CheckResult descent_late;
  DeviationReport deviation;
  double curvature_trace_estimate = 0.0;
  bool all_pass() const;
};

// The full harness over a given sampler configuration and field: the
// configured run for orthogonality/reduction, a static field for the strict
// descent check (isolating the control descent from transport), the same
// problem with a full-horizon gamma gate and a decaying normalized beta for
// the late-stage check, and the noise-only deviation sweep. `only` filters
// by check name ("" = everything).
TheoryReport run_verification(const SamplerConfig& cfg,
                              const VelocityField& field,
                              const std::string& only = "",
                              std::size_t seeds_late = 16,
                              std::size_t seeds_dev = 32);

// Same harness on the built-in 3x3 grid toy with stock settings.
TheoryReport run_verification(const std::string& only = "",
                              std::size_t seeds_late = 16,
                              std::size_t seeds_dev = 32);

// Shared toy instances (also used by the command line tool and tests).
GmmSpec verify_toy_gmm();
SamplerConfig verify_toy_config();

}  // namespace oscar
