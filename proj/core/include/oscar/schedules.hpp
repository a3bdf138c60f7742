#pragma once

#include <string>

#include "oscar/errors.hpp"

namespace oscar {

// Guidance strength schedule gamma(t). Zero outside the gate [t0, t1];
// inside, a bump shape in the normalized gate coordinate u = (t-t0)/(t1-t0):
//   cos2:  gamma0 * sin^2(pi*u)   (bell peaking mid-gate)
//   t1mt:  gamma0 * 4u(1-u)       (parabolic bump, peak gamma0 mid-gate)
struct GammaSchedule {
  enum class Shape { cos2, t1mt };
  Shape shape = Shape::cos2;
  double gamma0 = 0.12;
  double t0 = 0.05;
  double t1 = 0.35;
};

double gamma_at(const GammaSchedule& s, double t);

// Diffusion strength schedule beta(t) = scale * family(t), zeroed outside the
// gate. Families (unscaled):
//   linfrac:  (1-t) / (1-t+eps_beta)
//   cos2:     cos^2(pi*t/2)
//   poly:     (1-t)^p
//   expnorm:  (exp(-kappa*t) - exp(-kappa)) / (1 - exp(-kappa))
//   power:    t^p                  (increasing; the late-ramp option)
struct BetaSchedule {
  enum class Family { linfrac, cos2, poly, expnorm, power };
  Family family = Family::power;
  double scale = 1.0;
  double p = 1.0;         // poly / power exponent
  double eps_beta = 0.1;  // linfrac knee
  double kappa = 2.0;     // expnorm rate
  double t0 = 0.0;
  double t1 = 1.0;
};

double beta_at(const BetaSchedule& s, double t);

// Rescale so that the integral of beta over [0,1] (equivalently over the
// gate) equals budget B. The unscaled mass is computed with composite
// Simpson (10^4 panels) on the smooth part of the gate. Throws ZeroSupport
// when the unscaled mass is not positive.
BetaSchedule normalize_budget(const BetaSchedule& s, double budget);

// Simpson integral of the (scaled) schedule over [0,1]; used by tests and by
// normalize_budget itself.
double beta_integral(const BetaSchedule& s);

std::string to_string(GammaSchedule::Shape s);
std::string to_string(BetaSchedule::Family f);
GammaSchedule::Shape gamma_shape_from_string(const std::string& s);
BetaSchedule::Family beta_family_from_string(const std::string& s);

}  // namespace oscar
