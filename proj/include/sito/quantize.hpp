#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "sito/grid.hpp"
#include "sito/symbols.hpp"

namespace sito {

using CplxFn1 = std::function<cplx(double)>;
using CplxFn2 = std::function<cplx(double, double)>;

/// A phase-space symbol with enough structure to pick a fast application
/// path: either a general callable g(q,p) or a product f(q)*g(p) (either
/// factor may be absent, i.e. identically 1).
class PhaseSpaceFn {
 public:
  static PhaseSpaceFn general(CplxFn2 fn);
  static PhaseSpaceFn of_q(CplxFn1 fn);
  static PhaseSpaceFn of_p(CplxFn1 fn);
  static PhaseSpaceFn product(CplxFn1 fq, CplxFn1 fp);

  bool is_product() const { return product_; }
  const CplxFn1& q_factor() const { return fq_; }
  const CplxFn1& p_factor() const { return fp_; }
  cplx operator()(double q, double p) const;

 private:
  CplxFn2 general_;
  CplxFn1 fq_, fp_;
  bool product_ = false;
};

enum class ApplyStrategy { separable_fast, qp_spectral, dense_kernel };

/// A tau-quantized symbol, ready to apply to gridded states. Construction
/// builds whatever caches the strategy needs and is not thread-safe; a
/// constructed operator is immutable and application is pure.
class QuantizedOperator {
 public:
  GridPtr grid;
  double tau = 0.0;
  ApplyStrategy strategy = ApplyStrategy::qp_spectral;

  Wavefunction apply(const Wavefunction& psi) const;
  const Eigen::MatrixXcd& kernel() const;  // dense_kernel only

  // internal state, exposed for the oracle paths
  CVec diag_q;               // separable_fast: position multiplier
  CVec diag_p;               // separable_fast: momentum multiplier
  PhaseSpaceFn symbol = PhaseSpaceFn::of_q(nullptr);
  std::optional<Eigen::MatrixXcd> j_cache;  // qp_spectral: sym(q_m,p_k) e^{i q_m p_k} dp/sqrt(2pi)
  std::optional<Eigen::MatrixXcd> dense;    // dense_kernel: full position-space matrix
};

/// tau-quantization of a symbol. tau == 0 uses the spectral path (product
/// symbols get the O(N log N) route); tau != 0 falls back to the dense
/// kernel, which is restricted to N <= 256.
QuantizedOperator quantize(const PhaseSpaceFn& fn, double tau, GridPtr grid);

/// Dense-kernel construction for any tau (N <= 256). Oracle path.
QuantizedOperator quantize_dense(const PhaseSpaceFn& fn, double tau, GridPtr grid);

/// One-shot qp-quantized application:
///   out(q_m) = (2 pi)^{-1/2} sum_k fn(q_m, p_k) e^{i q_m p_k} psit(p_k) dp.
Wavefunction apply_qp(const PhaseSpaceFn& fn, const Wavefunction& psi);

/// Quantization of the symbol e^{-i v H(q,p)} (not the exponential of the
/// quantized H). Separable models factor into diagonal multipliers and the
/// returned operator is the same for every tau; non-separable models go
/// through the spectral path (tau = 0) or the dense kernel (tau != 0).
QuantizedOperator quantize_exp_symbol(const SymbolModel& s, double v,
                                      double tau, GridPtr grid);

/// || hat(f1*f2*f3) psi - f1(qhat) f2hat f3(phat) psi || for f1 a function
/// of q alone and f3 of p alone. Zero in exact arithmetic.
double factorization_check(const CplxFn1& f1, const PhaseSpaceFn& f2,
                           const CplxFn1& f3, const Wavefunction& psi);

/// Direct double-quadrature evaluation of the quantization integral over the
/// box [-z, z]^2, compared against the spectral path; returns one error per z.
std::vector<double> verify_box_limit(const PhaseSpaceFn& fn,
                                     const Wavefunction& psi,
                                     const std::vector<double>& zs,
                                     double tau = 0.0);

// Dense unitary transform matrices (oracle building blocks).
Eigen::MatrixXcd dense_forward_matrix(const Grid& g);   // position -> momentum
Eigen::MatrixXcd dense_inverse_matrix(const Grid& g);   // momentum -> position

/// Materialize any quantized operator as a position-space matrix (N <= 256).
Eigen::MatrixXcd to_dense(const QuantizedOperator& op);

}  // namespace sito
