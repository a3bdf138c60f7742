#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "oscar/matrix.hpp"

namespace oscar {

// Counter-based random numbers (Philox4x32-10). Every draw is a pure
// function of (seed, stream, step, particle, index), so the sampler can skip
// draws, reorder particle loops, or run them in parallel without changing a
// single bit of any stream. No mutable generator state is threaded through
// the code; callers name the draw they want.
namespace rng {

// Fixed stream tags so independent uses of the same (seed, step, particle)
// triple never collide.
enum Stream : std::uint32_t {
  kInit = 1,       // initial particle positions
  kStepNoise = 2,  // per-step diffusion noise
  kTrain = 3,      // training data (x0, component pick, t)
  kWeights = 4,    // frozen encoder / model parameter init
  kMisc = 5,       // tests, probes, bootstrap
};

struct Counter {
  std::uint32_t c0 = 0, c1 = 0, c2 = 0, c3 = 0;
};

namespace detail {

inline void philox_round(Counter& ctr, std::uint32_t k0, std::uint32_t k1) {
  constexpr std::uint64_t kMul0 = 0xD2511F53ull;
  constexpr std::uint64_t kMul1 = 0xCD9E8D57ull;
  const std::uint64_t p0 = kMul0 * ctr.c0;
  const std::uint64_t p1 = kMul1 * ctr.c2;
  const Counter out{
      static_cast<std::uint32_t>(p1 >> 32) ^ ctr.c1 ^ k0,
      static_cast<std::uint32_t>(p1),
      static_cast<std::uint32_t>(p0 >> 32) ^ ctr.c3 ^ k1,
      static_cast<std::uint32_t>(p0)};
  ctr = out;
}

}  // namespace detail

// Philox4x32 with the standard 10 rounds and Weyl key schedule.
inline Counter philox4x32(Counter ctr, std::uint64_t key) {
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int r = 0; r < 10; ++r) {
    detail::philox_round(ctr, k0, k1);
    k0 += 0x9E3779B9u;  // golden ratio
    k1 += 0xBB67AE85u;  // sqrt(3)-1
  }
  return ctr;
}

// One 4x32 block addressed by (seed; stream, step, particle, index).
inline Counter block(std::uint64_t seed, std::uint32_t stream, std::uint64_t step,
                     std::uint64_t particle, std::uint32_t index) {
  Counter ctr{static_cast<std::uint32_t>(step),
              static_cast<std::uint32_t>(step >> 32) ^ stream,
              static_cast<std::uint32_t>(particle),
              static_cast<std::uint32_t>(particle >> 32) ^ index};
  return philox4x32(ctr, seed);
}

inline double u64_to_unit(std::uint64_t u) {
  // 53 significant bits -> [0, 1)
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

// Two uniforms in (0,1] x [0,1) from one block (open at zero on the first so
// log() below is safe).
inline void uniforms(const Counter& c, double& u1, double& u2) {
  const std::uint64_t a = (static_cast<std::uint64_t>(c.c0) << 32) | c.c1;
  const std::uint64_t b = (static_cast<std::uint64_t>(c.c2) << 32) | c.c3;
  u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  u2 = u64_to_unit(b);                                  // [0, 1)
}

// Box-Muller pair.
inline void normal_pair(const Counter& c, double& z0, double& z1) {
  double u1, u2;
  uniforms(c, u1, u2);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  z0 = r * std::cos(a);
  z1 = r * std::sin(a);
}

// d independent standard normals for a named draw.
inline Vec normal_vec(std::uint64_t seed, std::uint32_t stream, std::uint64_t step,
                      std::uint64_t particle, std::size_t d) {
  Vec out(d);
  for (std::size_t i = 0; i < d; i += 2) {
    double z0, z1;
    normal_pair(block(seed, stream, step, particle, static_cast<std::uint32_t>(i / 2)),
                z0, z1);
    out[i] = z0;
    if (i + 1 < d) out[i + 1] = z1;
  }
  return out;
}

// One uniform in [0,1) for a named draw.
inline double uniform(std::uint64_t seed, std::uint32_t stream, std::uint64_t step,
                      std::uint64_t particle, std::uint32_t index) {
  double u1, u2;
  uniforms(block(seed, stream, step, particle, index), u1, u2);
  return u2;
}

}  // namespace rng
}  // namespace oscar
