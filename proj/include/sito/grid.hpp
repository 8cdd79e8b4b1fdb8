#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>

namespace sito {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

/// Uniform position grid on [-L/2, L/2) with N = 2^k points, together with
/// the conjugate momentum grid p_k = 2*pi*k/L for k = -N/2 .. N/2-1 (stored
/// in centered order). dq*dp*N == 2*pi by construction.
struct Grid {
  double length = 0.0;  // L
  int n = 0;            // N, power of two, >= 8
  double dq = 0.0;
  double dp = 0.0;
  RVec q;  // q_m = -L/2 + m*dq
  RVec p;  // p[s] = (s - N/2)*dp
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(double length, int n);

enum class Rep { position, momentum };

/// A complex-valued state vector on a grid. The quadrature weight of the
/// inner product follows the representation (dq in position, dp in momentum)
/// so the spectral transform below is exactly norm-preserving.
struct Wavefunction {
  GridPtr grid;
  Rep rep = Rep::position;
  CVec values;

  int size() const { return static_cast<int>(values.size()); }
  double weight() const { return rep == Rep::position ? grid->dq : grid->dp; }
};

/// Unitary transform (F psi)(p) = (2*pi)^{-1/2} \int psi(q) e^{-ipq} dq,
/// discretized with the dq weight on the centered grid.
Wavefunction to_momentum(const Wavefunction& psi);
/// Exact inverse of to_momentum.
Wavefunction to_position(const Wavefunction& psi);

cplx inner(const Wavefunction& a, const Wavefunction& b);
double norm(const Wavefunction& psi);
double norm2(const Wavefunction& psi);

/// L2 mass within `fraction` * L of either domain edge; used to check that
/// states decay enough for the periodic truncation to be harmless.
double boundary_mass(const Wavefunction& psi, double fraction = 0.05);

/// Normalized Gaussian packet (pi w^2)^{-1/4} exp(-(q-c)^2/(2w^2) + i p0 q).
Wavefunction gaussian_packet(GridPtr grid, double center = 0.0,
                             double width = 1.0, double momentum = 0.0);
Wavefunction zero_state(GridPtr grid, Rep rep = Rep::position);

/// Deterministic pseudo-random smooth decaying state: a normalized complex
/// combination of a few Gaussian packets, keyed by (seed, stream).
Wavefunction random_smooth_state(GridPtr grid, uint64_t seed, uint64_t stream);

// Raw buffer transforms used by the hot loops. `out` is resized as needed;
// in/out must not alias.
void spectral_forward(const Grid& g, const CVec& pos, CVec& mom);
void spectral_inverse(const Grid& g, const CVec& mom, CVec& pos);

}  // namespace sito
