#pragma once

#include <functional>
#include <map>
#include <string>

namespace sito {

using RealFn1 = std::function<double(double)>;
using RealFn2 = std::function<double(double, double)>;

/// Classical phase-space data of one model: internal Hamiltonian
/// H(q,p) = k0(q) + h0(p) + l(q,p) plus the measured symbols k(q), h(p)
/// with coupling strengths mu1, mu2. Symbols are closed-form callables so
/// they can be evaluated at arbitrary (shifted) phase-space points.
struct SymbolModel {
  std::string name;
  RealFn1 k0;  // may be null (== 0)
  RealFn1 h0;  // may be null (== 0)
  RealFn2 l;   // may be null (== 0); separable <=> null
  RealFn1 k;   // bounded, real
  RealFn1 h;   // bounded, real
  double k_bound = 0.0;  // K1 = sup|k|
  double h_bound = 0.0;  // K2 = sup|h|
  double mu1 = 0.0;
  double mu2 = 0.0;
  bool separable = true;
  // k0/h0 outside the bounded, square-integrable class the norm estimates
  // assume (free, harmonic); fine for deterministic runs, warned otherwise.
  bool out_of_hypotheses = false;
};

double eval_H(const SymbolModel& s, double q, double p);

/// Test-symbol library. Known names: free, gaussian_well, cosine_potential,
/// harmonic, bounded_coupled. All accept mu1/mu2; shape parameters are
/// per-builtin (depth, amp, freq, omega, coupling). Unknown names or
/// parameters are rejected.
SymbolModel builtin(const std::string& name,
                    const std::map<std::string, double>& params = {});

}  // namespace sito
