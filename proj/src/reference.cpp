#include "sito/reference.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

#include "sito/quantize.hpp"

namespace sito {

Scheme scheme_from_name(const std::string& name) {
  if (name == "euler-maruyama") return Scheme::euler_maruyama;
  if (name == "exponential-em") return Scheme::exponential_em;
  if (name == "milstein-diagonal") return Scheme::milstein_diagonal;
  throw std::invalid_argument(
      "unknown scheme '" + name +
      "' (known: euler-maruyama, exponential-em, milstein-diagonal)");
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::euler_maruyama: return "euler-maruyama";
    case Scheme::exponential_em: return "exponential-em";
    case Scheme::milstein_diagonal: return "milstein-diagonal";
  }
  return "?";
}

Wavefunction integrate(const Wavefunction& psi0, const SymbolModel& s,
                       const WienerPath& path, Scheme scheme) {
  if (psi0.rep != Rep::position)
    throw std::invalid_argument("integrate expects a position-representation state");
  if (scheme == Scheme::milstein_diagonal && s.mu1 > 0.0 && s.mu2 > 0.0)
    throw std::invalid_argument(
        "milstein-diagonal is restricted to single-noise dynamics");

  const Grid& g = *psi0.grid;
  const double v = path.step_size();
  const double r1 = std::sqrt(s.mu1), r2 = std::sqrt(s.mu2);
  const bool strang = (scheme == Scheme::exponential_em);
  const bool milstein = (scheme == Scheme::milstein_diagonal);

  RVec kq(g.n), kq2(g.n), k0q(g.n), hp(g.n), hp2(g.n), h0p(g.n);
  for (int m = 0; m < g.n; ++m) {
    kq[m] = s.k(g.q[m]);
    kq2[m] = kq[m] * kq[m];
    k0q[m] = s.k0 ? s.k0(g.q[m]) : 0.0;
  }
  for (int k = 0; k < g.n; ++k) {
    hp[k] = s.h(g.p[k]);
    hp2[k] = hp[k] * hp[k];
    h0p[k] = s.h0 ? s.h0(g.p[k]) : 0.0;
  }
  CVec half_k(g.n), full_h(g.n);
  if (strang) {
    for (int m = 0; m < g.n; ++m) half_k[m] = std::exp(cplx(0.0, -0.5 * v * k0q[m]));
    for (int k = 0; k < g.n; ++k) full_h[k] = std::exp(cplx(0.0, -v * h0p[k]));
  }
  // Non-separable coupling goes through the cached qp kernel of l.
  std::optional<Eigen::MatrixXcd> lj;
  if (s.l) {
    if (g.n > 512)
      throw std::invalid_argument("non-separable reference integration needs N <= 512");
    Eigen::MatrixXcd jm(g.n, g.n);
    const double scale = g.dp / std::sqrt(2.0 * M_PI);
    for (int m = 0; m < g.n; ++m)
      for (int k = 0; k < g.n; ++k)
        jm(m, k) = scale * s.l(g.q[m], g.p[k]) *
                   std::exp(cplx(0.0, g.q[m] * g.p[k]));
    lj = std::move(jm);
  }

  Wavefunction phi = psi0;
  const double guard = 1e3 * norm(psi0);
  CVec mom(g.n), mom_scaled(g.n), mom_back(g.n), scratch(g.n);
  for (int j = 0; j < path.steps; ++j) {
    const double dw1 = path.dw1[j], dw2 = path.dw2[j];
    spectral_forward(g, phi.values, mom);
    // momentum-side update terms, one inverse transform for all of them
    for (int k = 0; k < g.n; ++k) {
      cplx c(-0.5 * s.mu2 * v * hp2[k] - r2 * hp[k] * dw2,
             strang ? 0.0 : -v * h0p[k]);
      if (milstein && s.mu2 > 0.0)
        c += 0.5 * s.mu2 * hp2[k] * (dw2 * dw2 - v);
      mom_scaled[k] = c * mom[k];
    }
    spectral_inverse(g, mom_scaled, mom_back);
    for (int m = 0; m < g.n; ++m) {
      cplx c(-0.5 * s.mu1 * v * kq2[m] - r1 * kq[m] * dw1,
             strang ? 0.0 : -v * k0q[m]);
      if (milstein && s.mu1 > 0.0)
        c += 0.5 * s.mu1 * kq2[m] * (dw1 * dw1 - v);
      phi.values[m] += c * phi.values[m] + mom_back[m];
    }
    if (lj) phi.values += cplx(0.0, -v) * ((*lj) * mom);
    if (strang) {
      // exact flow of the separable unitary part: k0 half, h0 full, k0 half
      phi.values.array() *= half_k.array();
      spectral_forward(g, phi.values, scratch);
      scratch.array() *= full_h.array();
      spectral_inverse(g, scratch, phi.values);
      phi.values.array() *= half_k.array();
    }
    double cur = norm(phi);
    if (!(cur <= guard) || !std::isfinite(cur))
      throw BlowupError("reference integration blew up at step " + std::to_string(j) +
                            " (norm " + std::to_string(cur) + ")",
                        j);
  }
  return phi;
}

Eigen::MatrixXcd dense_expm(const SymbolModel& s, double t, GridPtr grid) {
  if (grid->n > 128)
    throw std::invalid_argument("dense_expm is restricted to N <= 128");
  auto sym = PhaseSpaceFn::general(
      [&s](double q, double p) { return cplx(eval_H(s, q, p), 0.0); });
  Eigen::MatrixXcd h = quantize_dense(sym, 0.0, grid).kernel();
  Eigen::MatrixXcd a = cplx(0.0, -t) * h;
  return a.exp();
}

}  // namespace sito
