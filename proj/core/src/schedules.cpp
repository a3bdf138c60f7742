#include "oscar/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oscar {

double gamma_at(const GammaSchedule& s, double t) {
  if (t < s.t0 || t > s.t1 || s.t1 <= s.t0) return 0.0;
  const double u = std::clamp((t - s.t0) / (s.t1 - s.t0), 0.0, 1.0);
  switch (s.shape) {
    case GammaSchedule::Shape::cos2: {
      const double sn = std::sin(std::numbers::pi * u);
      return s.gamma0 * sn * sn;
    }
    case GammaSchedule::Shape::t1mt:
      return s.gamma0 * 4.0 * u * (1.0 - u);
  }
  return 0.0;
}

namespace {

double family_at(const BetaSchedule& s, double t) {
  switch (s.family) {
    case BetaSchedule::Family::linfrac:
      return (1.0 - t) / (1.0 - t + s.eps_beta);
    case BetaSchedule::Family::cos2: {
      const double c = std::cos(0.5 * std::numbers::pi * t);
      return c * c;
    }
    case BetaSchedule::Family::poly:
      return std::pow(1.0 - t, s.p);
    case BetaSchedule::Family::expnorm:
      return (std::exp(-s.kappa * t) - std::exp(-s.kappa)) /
             (1.0 - std::exp(-s.kappa));
    case BetaSchedule::Family::power:
      return std::pow(t, s.p);
  }
  return 0.0;
}

// Composite Simpson on [a,b] with n panels (n even).
double simpson(const BetaSchedule& s, double a, double b, int n) {
  if (b <= a) return 0.0;
  const double h = (b - a) / n;
  double acc = family_at(s, a) + family_at(s, b);
  for (int i = 1; i < n; ++i)
    acc += family_at(s, a + i * h) * ((i % 2) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

double beta_at(const BetaSchedule& s, double t) {
  if (t < s.t0 || t > s.t1 || s.t1 <= s.t0) return 0.0;
  return s.scale * family_at(s, t);
}

BetaSchedule normalize_budget(const BetaSchedule& s, double budget) {
  // Integrate only over the gate clipped to [0,1]; the families are smooth
  // there, so Simpson at this resolution is accurate far past 1e-6 relative.
  const double a = std::max(0.0, s.t0);
  const double b = std::min(1.0, s.t1);
  const double mass = simpson(s, a, b, 10000);
  if (!(mass > 0.0))
    throw ZeroSupport("normalize_budget: schedule has no mass on its gate");
  BetaSchedule out = s;
  out.scale = budget / mass;
  return out;
}

double beta_integral(const BetaSchedule& s) {
  const double a = std::max(0.0, s.t0);
  const double b = std::min(1.0, s.t1);
  return s.scale * simpson(s, a, b, 10000);
}

std::string to_string(GammaSchedule::Shape s) {
  return s == GammaSchedule::Shape::cos2 ? "cos2" : "t1mt";
}

std::string to_string(BetaSchedule::Family f) {
  switch (f) {
    case BetaSchedule::Family::linfrac: return "linfrac";
    case BetaSchedule::Family::cos2: return "cos2";
    case BetaSchedule::Family::poly: return "poly";
    case BetaSchedule::Family::expnorm: return "expnorm";
    case BetaSchedule::Family::power: return "power";
  }
  return "?";
}

GammaSchedule::Shape gamma_shape_from_string(const std::string& s) {
  if (s == "cos2") return GammaSchedule::Shape::cos2;
  if (s == "t1mt") return GammaSchedule::Shape::t1mt;
  throw SchemaError("unknown gamma shape: " + s);
}

BetaSchedule::Family beta_family_from_string(const std::string& s) {
  if (s == "linfrac") return BetaSchedule::Family::linfrac;
  if (s == "cos2") return BetaSchedule::Family::cos2;
  if (s == "poly") return BetaSchedule::Family::poly;
  if (s == "expnorm") return BetaSchedule::Family::expnorm;
  if (s == "power") return BetaSchedule::Family::power;
  throw SchemaError("unknown beta family: " + s);
}

}  // namespace oscar
