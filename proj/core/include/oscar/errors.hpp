#pragma once

#include <stdexcept>
#include <string>

namespace oscar {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Cholesky pivot fell below the floor: input is not numerically SPD.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(const std::string& msg) : Error(msg) {}
};

// Iterative routine hit its sweep/iteration cap before reaching tolerance.
class NonConvergence : public Error {
 public:
  explicit NonConvergence(const std::string& msg) : Error(msg) {}
};

// A NaN or infinity appeared where a finite value is required.
class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& msg) : Error(msg) {}
};

// Closed-form interpolant evaluated too close to the data endpoint.
class DegenerateTime : public Error {
 public:
  explicit DegenerateTime(const std::string& msg) : Error(msg) {}
};

// Schedule has zero mass on its gate; budget normalization impossible.
class ZeroSupport : public Error {
 public:
  explicit ZeroSupport(const std::string& msg) : Error(msg) {}
};

// Not enough points for the requested neighbourhood size.
class TooFewPoints : public Error {
 public:
  explicit TooFewPoints(const std::string& msg) : Error(msg) {}
};

// Training loss went non-finite.
class DivergedLoss : public Error {
 public:
  explicit DivergedLoss(const std::string& msg) : Error(msg) {}
};

// Config / checkpoint / data file failed structural validation.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& msg) : Error(msg) {}
};

// Dimension mismatch between containers that must agree.
class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

}  // namespace oscar
