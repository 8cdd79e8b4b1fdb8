#include "sito/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "sito/noise.hpp"

namespace sito {

namespace {

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// FFTW plans are cached per size. Plan creation is not thread-safe, so it is
// guarded; fftw_execute_dft on fresh arrays is safe from any thread. Plans
// are created UNALIGNED so they accept whatever buffers Eigen hands us.
struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

PlanPair plans_for(int n) {
  static std::mutex mtx;
  static std::map<int, PlanPair> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  CVec a(n), b(n);
  a.setZero();
  PlanPair pp;
  pp.fwd = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                            reinterpret_cast<fftw_complex*>(b.data()),
                            FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  pp.inv = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                            reinterpret_cast<fftw_complex*>(b.data()),
                            FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache[n] = pp;
  return pp;
}

void require_same_grid(const Wavefunction& a, const Wavefunction& b) {
  if (a.grid != b.grid &&
      (a.grid->n != b.grid->n || a.grid->length != b.grid->length))
    throw std::invalid_argument("wavefunctions live on different grids");
  if (a.rep != b.rep)
    throw std::invalid_argument("wavefunctions in different representations");
}

}  // namespace

GridPtr make_grid(double length, int n) {
  if (!(length > 0.0)) throw std::invalid_argument("grid length must be positive");
  if (n < 8 || !power_of_two(n))
    throw std::invalid_argument("grid size must be a power of two, at least 8");
  auto g = std::make_shared<Grid>();
  g->length = length;
  g->n = n;
  g->dq = length / n;
  g->dp = 2.0 * M_PI / length;
  g->q.resize(n);
  g->p.resize(n);
  for (int m = 0; m < n; ++m) {
    g->q[m] = -0.5 * length + m * g->dq;
    g->p[m] = (m - n / 2) * g->dp;
  }
  return g;
}

// With q_m = -L/2 + m dq and p stored at index s = k + N/2, the continuum
// kernel e^{-i p q} factors into (-1)^m, (-1)^s and a plain DFT:
//   psit[s] = dq/sqrt(2pi) * (-1)^s * DFT[(-1)^m psi_m][s].
// (Valid for N divisible by 4, which make_grid guarantees.)
void spectral_forward(const Grid& g, const CVec& pos, CVec& mom) {
  const int n = g.n;
  CVec scratch(n);
  for (int m = 0; m < n; ++m)
    scratch[m] = (m & 1) ? -pos[m] : pos[m];
  mom.resize(n);
  PlanPair pp = plans_for(n);
  fftw_execute_dft(pp.fwd,
                   reinterpret_cast<fftw_complex*>(scratch.data()),
                   reinterpret_cast<fftw_complex*>(mom.data()));
  const double scale = g.dq / std::sqrt(2.0 * M_PI);
  for (int s = 0; s < n; ++s)
    mom[s] *= (s & 1) ? -scale : scale;
}

void spectral_inverse(const Grid& g, const CVec& mom, CVec& pos) {
  const int n = g.n;
  CVec scratch(n);
  for (int s = 0; s < n; ++s)
    scratch[s] = (s & 1) ? -mom[s] : mom[s];
  pos.resize(n);
  PlanPair pp = plans_for(n);
  fftw_execute_dft(pp.inv,
                   reinterpret_cast<fftw_complex*>(scratch.data()),
                   reinterpret_cast<fftw_complex*>(pos.data()));
  const double scale = g.dp / std::sqrt(2.0 * M_PI);
  for (int m = 0; m < n; ++m)
    pos[m] *= (m & 1) ? -scale : scale;
}

Wavefunction to_momentum(const Wavefunction& psi) {
  if (psi.rep != Rep::position)
    throw std::invalid_argument("to_momentum expects a position-representation state");
  Wavefunction out;
  out.grid = psi.grid;
  out.rep = Rep::momentum;
  spectral_forward(*psi.grid, psi.values, out.values);
  return out;
}

Wavefunction to_position(const Wavefunction& psi) {
  if (psi.rep != Rep::momentum)
    throw std::invalid_argument("to_position expects a momentum-representation state");
  Wavefunction out;
  out.grid = psi.grid;
  out.rep = Rep::position;
  spectral_inverse(*psi.grid, psi.values, out.values);
  return out;
}

cplx inner(const Wavefunction& a, const Wavefunction& b) {
  require_same_grid(a, b);
  return a.values.dot(b.values) * a.weight();
}

double norm2(const Wavefunction& psi) {
  return psi.values.squaredNorm() * psi.weight();
}

double norm(const Wavefunction& psi) { return std::sqrt(norm2(psi)); }

double boundary_mass(const Wavefunction& psi, double fraction) {
  const int n = psi.size();
  int edge = std::max(1, static_cast<int>(fraction * n));
  double acc = 0.0;
  for (int m = 0; m < edge; ++m)
    acc += std::norm(psi.values[m]) + std::norm(psi.values[n - 1 - m]);
  return acc * psi.weight();
}

Wavefunction gaussian_packet(GridPtr grid, double center, double width,
                             double momentum) {
  if (!(width > 0.0)) throw std::invalid_argument("packet width must be positive");
  Wavefunction psi;
  psi.grid = grid;
  psi.rep = Rep::position;
  psi.values.resize(grid->n);
  const double amp = std::pow(M_PI * width * width, -0.25);
  for (int m = 0; m < grid->n; ++m) {
    double q = grid->q[m];
    double u = (q - center) / width;
    psi.values[m] = amp * std::exp(-0.5 * u * u) *
                    std::exp(cplx(0.0, momentum * q));
  }
  return psi;
}

Wavefunction zero_state(GridPtr grid, Rep rep) {
  Wavefunction psi;
  psi.grid = grid;
  psi.rep = rep;
  psi.values = CVec::Zero(grid->n);
  return psi;
}

Wavefunction random_smooth_state(GridPtr grid, uint64_t seed, uint64_t stream) {
  Wavefunction psi = zero_state(grid);
  const double reach = 0.15 * grid->length;
  const double p_reach = 0.25 * 0.5 * grid->dp * grid->n;
  for (uint32_t c = 0; c < 4; ++c) {
    double u[6];
    rng::uniform_pair(seed, {stream, 2, 5, c, 0}, &u[0], &u[1]);
    rng::uniform_pair(seed, {stream, 2, 5, c, 1}, &u[2], &u[3]);
    rng::uniform_pair(seed, {stream, 2, 5, c, 2}, &u[4], &u[5]);
    double center = reach * (2.0 * u[0] - 1.0);
    double width = 0.6 + 1.4 * u[1];
    double momentum = p_reach * (2.0 * u[2] - 1.0);
    cplx amp = std::polar(0.2 + u[3], 2.0 * M_PI * u[4]);
    Wavefunction g = gaussian_packet(grid, center, width, momentum);
    psi.values += amp * g.values;
  }
  double n = norm(psi);
  psi.values /= n;
  return psi;
}

}  // namespace sito
