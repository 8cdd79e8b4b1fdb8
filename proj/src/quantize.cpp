#include "sito/quantize.hpp"

#include <cmath>
#include <stdexcept>

namespace sito {

namespace {

constexpr int kDenseMaxN = 256;
constexpr int kJCacheMaxN = 512;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);

void check_finite(const cplx& v, double q, double p) {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    throw std::invalid_argument("symbol is not finite at (q=" +
                                std::to_string(q) + ", p=" + std::to_string(p) + ")");
}

}  // namespace

PhaseSpaceFn PhaseSpaceFn::general(CplxFn2 fn) {
  PhaseSpaceFn f;
  f.general_ = std::move(fn);
  return f;
}

PhaseSpaceFn PhaseSpaceFn::of_q(CplxFn1 fn) {
  PhaseSpaceFn f;
  f.product_ = true;
  f.fq_ = std::move(fn);
  return f;
}

PhaseSpaceFn PhaseSpaceFn::of_p(CplxFn1 fn) {
  PhaseSpaceFn f;
  f.product_ = true;
  f.fp_ = std::move(fn);
  return f;
}

PhaseSpaceFn PhaseSpaceFn::product(CplxFn1 fq, CplxFn1 fp) {
  PhaseSpaceFn f;
  f.product_ = true;
  f.fq_ = std::move(fq);
  f.fp_ = std::move(fp);
  return f;
}

cplx PhaseSpaceFn::operator()(double q, double p) const {
  if (!product_) return general_(q, p);
  cplx v = 1.0;
  if (fq_) v *= fq_(q);
  if (fp_) v *= fp_(p);
  return v;
}

Eigen::MatrixXcd dense_forward_matrix(const Grid& g) {
  Eigen::MatrixXcd f(g.n, g.n);
  const double scale = g.dq * kInvSqrt2Pi;
  for (int s = 0; s < g.n; ++s)
    for (int m = 0; m < g.n; ++m)
      f(s, m) = scale * std::exp(cplx(0.0, -g.p[s] * g.q[m]));
  return f;
}

Eigen::MatrixXcd dense_inverse_matrix(const Grid& g) {
  Eigen::MatrixXcd f(g.n, g.n);
  const double scale = g.dp * kInvSqrt2Pi;
  for (int m = 0; m < g.n; ++m)
    for (int s = 0; s < g.n; ++s)
      f(m, s) = scale * std::exp(cplx(0.0, g.q[m] * g.p[s]));
  return f;
}

namespace {

// J(g)[m,k] = g(q_m, p_k) e^{i q_m p_k} dp / sqrt(2 pi); hat(g) = J(g) F.
Eigen::MatrixXcd build_j_matrix(const PhaseSpaceFn& fn, const Grid& g) {
  Eigen::MatrixXcd j(g.n, g.n);
  const double scale = g.dp * kInvSqrt2Pi;
  for (int m = 0; m < g.n; ++m) {
    for (int k = 0; k < g.n; ++k) {
      cplx v = fn(g.q[m], g.p[k]);
      check_finite(v, g.q[m], g.p[k]);
      j(m, k) = scale * v * std::exp(cplx(0.0, g.q[m] * g.p[k]));
    }
  }
  return j;
}

// Direct Eq.-style kernel for general tau:
//   K[m,j] = (1/2pi) sum_k fn((1-tau) q_m + tau q_j, p_k) e^{i p_k (q_m - q_j)} dq dp
Eigen::MatrixXcd build_tau_kernel(const PhaseSpaceFn& fn, double tau,
                                  const Grid& g) {
  const int n = g.n;
  // e^{i p_k d q} depends only on k and the index difference m - j.
  Eigen::MatrixXcd phase(n, 2 * n - 1);
  for (int k = 0; k < n; ++k)
    for (int d = -(n - 1); d <= n - 1; ++d)
      phase(k, d + n - 1) = std::exp(cplx(0.0, g.p[k] * g.dq * d));
  Eigen::MatrixXcd kmat(n, n);
  const double scale = g.dq * g.dp / (2.0 * M_PI);
  for (int m = 0; m < n; ++m) {
    for (int j = 0; j < n; ++j) {
      double qq = (1.0 - tau) * g.q[m] + tau * g.q[j];
      cplx acc = 0.0;
      for (int k = 0; k < n; ++k) {
        cplx v = fn(qq, g.p[k]);
        acc += v * phase(k, m - j + n - 1);
      }
      check_finite(acc, qq, 0.0);
      kmat(m, j) = scale * acc;
    }
  }
  return kmat;
}

Wavefunction apply_fast_product(const PhaseSpaceFn& fn, const Wavefunction& psi) {
  const Grid& g = *psi.grid;
  Wavefunction out;
  out.grid = psi.grid;
  out.rep = Rep::position;
  CVec mom;
  spectral_forward(g, psi.values, mom);
  if (fn.p_factor())
    for (int k = 0; k < g.n; ++k) mom[k] *= fn.p_factor()(g.p[k]);
  spectral_inverse(g, mom, out.values);
  if (fn.q_factor())
    for (int m = 0; m < g.n; ++m) out.values[m] *= fn.q_factor()(g.q[m]);
  return out;
}

Wavefunction apply_j_general(const PhaseSpaceFn& fn, const Wavefunction& psi,
                             const Eigen::MatrixXcd* j_cache) {
  const Grid& g = *psi.grid;
  CVec mom;
  spectral_forward(g, psi.values, mom);
  Wavefunction out;
  out.grid = psi.grid;
  out.rep = Rep::position;
  if (j_cache) {
    out.values = (*j_cache) * mom;
    return out;
  }
  out.values.resize(g.n);
  const double scale = g.dp * kInvSqrt2Pi;
  for (int m = 0; m < g.n; ++m) {
    cplx acc = 0.0;
    for (int k = 0; k < g.n; ++k) {
      cplx v = fn(g.q[m], g.p[k]);
      acc += v * std::exp(cplx(0.0, g.q[m] * g.p[k])) * mom[k];
    }
    out.values[m] = scale * acc;
  }
  return out;
}

}  // namespace

Wavefunction QuantizedOperator::apply(const Wavefunction& psi) const {
  if (psi.rep != Rep::position)
    throw std::invalid_argument("quantized operators act on position-representation states");
  if (psi.grid->n != grid->n || psi.grid->length != grid->length)
    throw std::invalid_argument("state grid does not match operator grid");
  switch (strategy) {
    case ApplyStrategy::separable_fast: {
      const Grid& g = *grid;
      Wavefunction out;
      out.grid = psi.grid;
      out.rep = Rep::position;
      CVec mom;
      spectral_forward(g, psi.values, mom);
      mom.array() *= diag_p.array();
      spectral_inverse(g, mom, out.values);
      out.values.array() *= diag_q.array();
      return out;
    }
    case ApplyStrategy::qp_spectral:
      if (symbol.is_product()) return apply_fast_product(symbol, psi);
      return apply_j_general(symbol, psi, j_cache ? &*j_cache : nullptr);
    case ApplyStrategy::dense_kernel: {
      Wavefunction out;
      out.grid = psi.grid;
      out.rep = Rep::position;
      out.values = (*dense) * psi.values;
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

const Eigen::MatrixXcd& QuantizedOperator::kernel() const {
  if (!dense)
    throw std::logic_error("kernel() is only available for dense_kernel operators");
  return *dense;
}

QuantizedOperator quantize(const PhaseSpaceFn& fn, double tau, GridPtr grid) {
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("tau must lie in [0, 1]");
  if (tau != 0.0) return quantize_dense(fn, tau, grid);
  QuantizedOperator op;
  op.grid = grid;
  op.tau = 0.0;
  op.strategy = ApplyStrategy::qp_spectral;
  op.symbol = fn;
  if (!fn.is_product() && grid->n <= kJCacheMaxN)
    op.j_cache = build_j_matrix(fn, *grid);
  else if (fn.is_product()) {
    // probe finiteness on the grid nodes
    for (int m = 0; m < grid->n; ++m)
      if (fn.q_factor()) check_finite(fn.q_factor()(grid->q[m]), grid->q[m], 0.0);
    for (int k = 0; k < grid->n; ++k)
      if (fn.p_factor()) check_finite(fn.p_factor()(grid->p[k]), 0.0, grid->p[k]);
  }
  return op;
}

QuantizedOperator quantize_dense(const PhaseSpaceFn& fn, double tau, GridPtr grid) {
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("tau must lie in [0, 1]");
  if (grid->n > kDenseMaxN)
    throw std::invalid_argument("dense kernels are restricted to N <= 256");
  QuantizedOperator op;
  op.grid = grid;
  op.tau = tau;
  op.strategy = ApplyStrategy::dense_kernel;
  op.symbol = fn;
  if (tau == 0.0 && !fn.is_product()) {
    op.dense = build_j_matrix(fn, *grid) * dense_forward_matrix(*grid);
  } else {
    op.dense = build_tau_kernel(fn, tau, *grid);
  }
  return op;
}

Eigen::MatrixXcd to_dense(const QuantizedOperator& op) {
  const Grid& g = *op.grid;
  if (g.n > kDenseMaxN)
    throw std::invalid_argument("to_dense is restricted to N <= 256");
  switch (op.strategy) {
    case ApplyStrategy::separable_fast:
      return op.diag_q.asDiagonal() * dense_inverse_matrix(g) *
             op.diag_p.asDiagonal() * dense_forward_matrix(g);
    case ApplyStrategy::qp_spectral: {
      if (op.symbol.is_product()) {
        CVec dq = CVec::Ones(g.n), dp = CVec::Ones(g.n);
        if (op.symbol.q_factor())
          for (int m = 0; m < g.n; ++m) dq[m] = op.symbol.q_factor()(g.q[m]);
        if (op.symbol.p_factor())
          for (int k = 0; k < g.n; ++k) dp[k] = op.symbol.p_factor()(g.p[k]);
        return dq.asDiagonal() * dense_inverse_matrix(g) * dp.asDiagonal() *
               dense_forward_matrix(g);
      }
      Eigen::MatrixXcd j =
          op.j_cache ? *op.j_cache : build_j_matrix(op.symbol, g);
      return j * dense_forward_matrix(g);
    }
    case ApplyStrategy::dense_kernel:
      return *op.dense;
  }
  throw std::logic_error("unreachable");
}

Wavefunction apply_qp(const PhaseSpaceFn& fn, const Wavefunction& psi) {
  if (psi.rep != Rep::position)
    throw std::invalid_argument("apply_qp expects a position-representation state");
  if (fn.is_product()) return apply_fast_product(fn, psi);
  return apply_j_general(fn, psi, nullptr);
}

QuantizedOperator quantize_exp_symbol(const SymbolModel& s, double v,
                                      double tau, GridPtr grid) {
  if (v < 0.0) throw std::invalid_argument("quantize_exp_symbol needs v >= 0");
  if (s.separable) {
    // hat(e^{-i v (k0 + h0)}) = e^{-i v k0(qhat)} F^{-1} e^{-i v h0(p)} F;
    // returned unchanged for every tau.
    QuantizedOperator op;
    op.grid = grid;
    op.tau = tau;
    op.strategy = ApplyStrategy::separable_fast;
    op.diag_q.resize(grid->n);
    op.diag_p.resize(grid->n);
    for (int m = 0; m < grid->n; ++m) {
      double k0 = s.k0 ? s.k0(grid->q[m]) : 0.0;
      op.diag_q[m] = std::exp(cplx(0.0, -v * k0));
    }
    for (int k = 0; k < grid->n; ++k) {
      double h0 = s.h0 ? s.h0(grid->p[k]) : 0.0;
      op.diag_p[k] = std::exp(cplx(0.0, -v * h0));
    }
    return op;
  }
  auto sym = PhaseSpaceFn::general([s, v](double q, double p) {
    return std::exp(cplx(0.0, -v * eval_H(s, q, p)));
  });
  if (tau == 0.0) return quantize(sym, 0.0, grid);
  return quantize_dense(sym, tau, grid);
}

double factorization_check(const CplxFn1& f1, const PhaseSpaceFn& f2,
                           const CplxFn1& f3, const Wavefunction& psi) {
  auto combined = PhaseSpaceFn::general([&](double q, double p) {
    cplx v = f2(q, p);
    if (f1) v *= f1(q);
    if (f3) v *= f3(p);
    return v;
  });
  Wavefunction lhs = apply_qp(combined, psi);

  Wavefunction rhs = f3 ? apply_qp(PhaseSpaceFn::of_p(f3), psi) : psi;
  rhs = apply_qp(f2, rhs);
  if (f1) {
    const Grid& g = *psi.grid;
    for (int m = 0; m < g.n; ++m) rhs.values[m] *= f1(g.q[m]);
  }
  lhs.values -= rhs.values;
  return norm(lhs);
}

std::vector<double> verify_box_limit(const PhaseSpaceFn& fn,
                                     const Wavefunction& psi,
                                     const std::vector<double>& zs,
                                     double tau) {
  const Grid& g = *psi.grid;
  const double q_extent = 0.5 * g.length;
  const double p_extent = 0.5 * g.dp * g.n;
  const double full = std::min(q_extent, p_extent);
  for (double z : zs)
    if (z > full * (1.0 + 1e-12))
      throw std::invalid_argument("box half-width z exceeds the grid extent");

  Wavefunction spectral = apply_qp(fn, psi);

  std::vector<double> errs;
  errs.reserve(zs.size());
  const double scale = g.dq * g.dp / (2.0 * M_PI);
  for (double z : zs) {
    Wavefunction boxed;
    boxed.grid = psi.grid;
    boxed.rep = Rep::position;
    boxed.values.resize(g.n);
    // Restricted transform G(k) = sum_{|q_j|<=z} e^{-i p_k q_j} psi_j dq; for
    // tau = 0 the quadrature then collapses to one restricted p-sum per node.
    if (tau == 0.0) {
      CVec gvec = CVec::Zero(g.n);
      for (int k = 0; k < g.n; ++k) {
        if (std::abs(g.p[k]) > z) continue;
        cplx acc = 0.0;
        for (int j = 0; j < g.n; ++j) {
          if (std::abs(g.q[j]) > z) continue;
          acc += std::exp(cplx(0.0, -g.p[k] * g.q[j])) * psi.values[j];
        }
        gvec[k] = acc;
      }
      for (int m = 0; m < g.n; ++m) {
        cplx acc = 0.0;
        for (int k = 0; k < g.n; ++k) {
          if (std::abs(g.p[k]) > z) continue;
          acc += fn(g.q[m], g.p[k]) * std::exp(cplx(0.0, g.q[m] * g.p[k])) * gvec[k];
        }
        boxed.values[m] = scale * acc;
      }
    } else {
      for (int m = 0; m < g.n; ++m) {
        cplx acc = 0.0;
        for (int j = 0; j < g.n; ++j) {
          if (std::abs(g.q[j]) > z) continue;
          double qq = (1.0 - tau) * g.q[m] + tau * g.q[j];
          for (int k = 0; k < g.n; ++k) {
            if (std::abs(g.p[k]) > z) continue;
            acc += fn(qq, g.p[k]) *
                   std::exp(cplx(0.0, g.p[k] * (g.q[m] - g.q[j]))) * psi.values[j];
          }
        }
        boxed.values[m] = scale * acc;
      }
    }
    boxed.values -= spectral.values;
    errs.push_back(norm(boxed));
  }
  return errs;
}

}  // namespace sito
