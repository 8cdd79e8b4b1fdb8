#pragma once

#include <Eigen/Dense>
#include <string>

#include "sito/errors.hpp"
#include "sito/grid.hpp"
#include "sito/noise.hpp"
#include "sito/symbols.hpp"

namespace sito {

/// Strong integration schemes for the semi-discretized dynamics
///   d phi = [-i Hhat - mu1 k^2(qhat)/2 - mu2 h^2(phat)/2] phi dt
///           - sqrt(mu1) k(qhat) phi dW1 - sqrt(mu2) h(phat) phi dW2.
///
/// euler_maruyama    - literal explicit update; only stable when the
///                     spectral symbol h0(p) is bounded (v * h0_max^2 small).
/// exponential_em    - noise and damping by Euler-Maruyama, the unitary part
///                     by an exact split-spectral (Strang) substep; stable
///                     for kinetic h0 at any resolution. Default oracle.
/// milstein_diagonal - euler_maruyama plus the diagonal corrections
///                     mu_i G_i^2 phi ((dW_i)^2 - v)/2; restricted to
///                     single-noise runs (two-noise Milstein needs Levy areas).
enum class Scheme { euler_maruyama, exponential_em, milstein_diagonal };

Scheme scheme_from_name(const std::string& name);
std::string scheme_name(Scheme s);

struct ReferenceConfig {
  Scheme scheme = Scheme::exponential_em;
  int substeps = 16;  // per finest product-formula step
};

/// One integration step per path increment. Throws BlowupError when the norm
/// exceeds 1e3 times the initial norm.
Wavefunction integrate(const Wavefunction& psi0, const SymbolModel& s,
                       const WienerPath& path, Scheme scheme);

/// Dense matrix exponential e^{-i t Hhat} (scaling-and-squaring Pade under
/// the hood), N <= 128. The deterministic resolvent oracle.
Eigen::MatrixXcd dense_expm(const SymbolModel& s, double t, GridPtr grid);

}  // namespace sito
