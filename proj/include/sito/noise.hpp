#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace sito {

namespace rng {

/// Counter-based generator (Philox4x32-10). Every draw is a pure function of
/// (seed; stream, process, purpose, level, index), so parallel generation is
/// order-independent and bit-reproducible under any thread count.
struct DrawKey {
  uint64_t stream = 0;   // trajectory index
  uint32_t process = 0;  // 0 = W1, 1 = W2 (spare values free for other uses)
  uint32_t purpose = 0;  // 0 = base increment, 1 = bridge midpoint, 2+ = misc
  uint32_t level = 0;    // refinement level within the dyadic tree
  uint32_t index = 0;    // node index within level
};

/// One standard normal variate for the addressed draw.
double gaussian(uint64_t seed, const DrawKey& key);
/// Two independent uniforms in (0,1) for the addressed draw.
void uniform_pair(uint64_t seed, const DrawKey& key, double* u1, double* u2);

}  // namespace rng

/// Two independent discretized Wiener paths over [0, t] with n steps.
/// Increments are Normal(0, t/n). Refinement inserts Brownian-bridge
/// midpoints whose draws are keyed by their dyadic address, so refining is
/// deterministic and independent of the order of operations.
struct WienerPath {
  double horizon = 0.0;  // t
  int steps = 0;         // n at the current level
  uint64_t seed = 0;
  uint64_t stream = 0;   // trajectory index within an ensemble
  int level = 0;         // refinement level (0 = as sampled)
  int base_steps = 0;    // n at level 0
  Eigen::VectorXd dw1;
  Eigen::VectorXd dw2;

  double step_size() const { return horizon / steps; }
  double w1_total() const { return dw1.sum(); }
  double w2_total() const { return dw2.sum(); }
};

WienerPath sample_path(double t, int n, uint64_t seed, uint64_t stream = 0);

/// Brownian-bridge midpoint refinement to 2n steps: each increment dW over a
/// step of size v splits into dWa ~ Normal(dW/2, v/4) and dWb = dW - dWa.
WienerPath refine(const WienerPath& path);

/// Pairwise sums of adjacent increments; inverse of refine.
WienerPath coarsen(const WienerPath& path);

/// max over single-step windows and both processes of |dW| / sqrt(-2 v ln v)
/// with v = t/n. Requires v < 1 and n >= 64.
double levy_modulus(const WienerPath& path);

/// Binary sidecar: header (t: f64, n: u64, seed: u64, all little-endian)
/// followed by 2n little-endian doubles (dw1[0..n) then dw2[0..n)).
void write_sidecar(const WienerPath& path, const std::string& filename);
WienerPath read_sidecar(const std::string& filename);

}  // namespace sito
