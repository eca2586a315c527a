#include "mew/rng.hpp"

#include <cmath>
#include <numbers>

namespace mew {

// Box-Muller on our own uniforms so the stream is the same on every
// standard library (std::normal_distribution is implementation-defined).
double standard_normal(Rng& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double exponential(Rng& rng, double rate) {
  double u;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  return -std::log(u) / rate;
}

}  // namespace mew
