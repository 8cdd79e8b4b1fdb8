#pragma once

#include <vector>

#include "sito/grid.hpp"
#include "sito/noise.hpp"
#include "sito/quantize.hpp"
#include "sito/symbols.hpp"

namespace sito {

/// One randomized product run: n factors over [0, t], factor j consuming
/// increments dw1[j], dw2[j] of the attached path. Factor order inside a
/// step is fixed: P acts first, then the symbol exponential, then Q.
struct StepPlan {
  SymbolModel symbol;
  GridPtr grid;
  double horizon = 0.0;
  int steps = 0;
  double tau = 0.0;
  WienerPath path;
};

/// Pointwise multiplication exp{-sqrt(mu1) k(q) dW1 - mu1 v k(q)^2}; the
/// exact pathwise solution of the position-measurement sub-dynamics.
Wavefunction apply_Q(const Wavefunction& psi, const SymbolModel& s, double dw1, double v);
/// Momentum-side analogue, conjugated by the spectral transform.
Wavefunction apply_P(const Wavefunction& psi, const SymbolModel& s, double dw2, double v);
/// Quantization of the symbol e^{-i v H}.
Wavefunction apply_Y(const Wavefunction& psi, const SymbolModel& s, double v, double tau = 0.0);
/// One product-formula factor U = Q . Y . P (rightmost acts first).
Wavefunction apply_U(const Wavefunction& psi, const SymbolModel& s, double dw1,
                     double dw2, double v, double tau = 0.0);
/// The combined-symbol route: a single qp-quantized application of
/// exp{-(iH + mu1 k^2 + mu2 h^2) v - sqrt(mu1) k dW1 - sqrt(mu2) h dW2}.
/// Coincides with apply_U up to roundoff.
Wavefunction apply_B(const Wavefunction& psi, const SymbolModel& s, double dw1,
                     double dw2, double v);

struct PropagateResult {
  Wavefunction state;
  double max_step_norm_ratio = 0.0;  // max_j ||phi_{j+1}|| / ||phi_j||
  bool blew_up = false;
  int blowup_step = -1;
};

PropagateResult propagate_detailed(const Wavefunction& psi0, const StepPlan& plan);
Wavefunction propagate(const Wavefunction& psi0, const StepPlan& plan);

/// Monte-Carlo estimate of E||Op(v) - truncated expansion(v)|| over `draws`
/// noise draws, one entry per v, with the log-log fitted order. Operator
/// norms are exact: diagonal sup for Q and P, dense power-method norm for U
/// at small N.
struct ExpansionResult {
  std::vector<double> v;
  std::vector<double> mean_residual;
  std::vector<double> stderr_;
  double slope = 0.0;
};
ExpansionResult expansion_residual(char which /* 'Q' | 'P' | 'U' */,
                                   const SymbolModel& s,
                                   const std::vector<double>& vs, int draws,
                                   uint64_t seed, GridPtr grid);

/// E||U(v) - T-expansion(v)|| (the truncated expansion of the exact
/// dynamics, which has no cross term) next to the isolated cross term
/// sqrt(mu1 mu2) k(qhat) h(phat) dW1 dW2. The gap should be dominated by
/// the cross term, whose mean norm is proportional to v.
struct CrossTermResult {
  std::vector<double> v;
  std::vector<double> gap_mean, gap_stderr;
  std::vector<double> cross_mean;
  double gap_slope = 0.0;
  double cross_slope = 0.0;
  double dominance_ratio = 0.0;  // gap / cross at the smallest v
  double mean_abs_dw_product_ratio = 0.0;  // measured E|dW1 dW2| / (2v/pi), smallest v
};
CrossTermResult cross_term_gap(const SymbolModel& s, const std::vector<double>& vs,
                               int draws, uint64_t seed, GridPtr grid);

/// Scalar Ito-Taylor check: integrates d phi = A phi dt + B phi dW by fine
/// Euler-Maruyama on a common path, subtracts
/// phi0 (1 + B W + A t + B^2 (W^2 - t)/2), and fits the residual order in t.
/// ts must be successive halvings. Also reports the oracle's own error
/// against the closed-form solution so its contamination can be bounded.
struct ItoExpansionResult {
  std::vector<double> t;
  std::vector<double> mean_residual;
  std::vector<double> oracle_error;  // E|EM - exact| per t
  double slope = 0.0;
};
ItoExpansionResult ito_expansion_check(double a, double b,
                                       const std::vector<double>& ts, int paths,
                                       uint64_t seed, int substeps_at_tmin = 1024);

/// Monte-Carlo operator-norm statistics for the per-step factors at one v:
/// ||Q|| and ||P|| as the sup of their multipliers over the grid, ||U||
/// estimated by their product times the deterministic factor norm.
struct NormBoundEstimate {
  double v = 0.0;
  double q_mean = 0.0, q_stderr = 0.0;
  double p_mean = 0.0, p_stderr = 0.0;
  double u_mean = 0.0, u_stderr = 0.0;
  double y_norm = 1.0;
  double q_bound = 0.0;  // e^{K1^2 mu1 v / 2}
  double u_bound = 0.0;  // e^{(K1^2 mu1 + K2^2 mu2) v}
};
NormBoundEstimate norm_bound_estimate(const SymbolModel& s, double v, int draws,
                                      uint64_t seed, GridPtr grid);

}  // namespace sito
