#include "sito/propagator.hpp"

#include <cmath>
#include <stdexcept>

#include "sito/linalg.hpp"

namespace sito {

namespace {

void require_position(const Wavefunction& psi, const char* who) {
  if (psi.rep != Rep::position)
    throw std::invalid_argument(std::string(who) + " expects a position-representation state");
}

RVec sample_on(const RealFn1& f, const RVec& x) {
  RVec out(x.size());
  for (int i = 0; i < x.size(); ++i) out[i] = f ? f(x[i]) : 0.0;
  return out;
}

}  // namespace

Wavefunction apply_Q(const Wavefunction& psi, const SymbolModel& s, double dw1, double v) {
  require_position(psi, "apply_Q");
  Wavefunction out = psi;
  if (s.mu1 == 0.0) return out;
  const Grid& g = *psi.grid;
  const double root = std::sqrt(s.mu1);
  for (int m = 0; m < g.n; ++m) {
    double k = s.k(g.q[m]);
    out.values[m] *= std::exp(-root * k * dw1 - s.mu1 * v * k * k);
  }
  return out;
}

Wavefunction apply_P(const Wavefunction& psi, const SymbolModel& s, double dw2, double v) {
  require_position(psi, "apply_P");
  if (s.mu2 == 0.0) {
    // Keep the spectral round trip so the mu2 = 0 case exercises the same
    // path (it is the identity to roundoff).
    Wavefunction out = psi;
    return out;
  }
  const Grid& g = *psi.grid;
  CVec mom;
  spectral_forward(g, psi.values, mom);
  const double root = std::sqrt(s.mu2);
  for (int k = 0; k < g.n; ++k) {
    double h = s.h(g.p[k]);
    mom[k] *= std::exp(-root * h * dw2 - s.mu2 * v * h * h);
  }
  Wavefunction out;
  out.grid = psi.grid;
  out.rep = Rep::position;
  spectral_inverse(g, mom, out.values);
  return out;
}

Wavefunction apply_Y(const Wavefunction& psi, const SymbolModel& s, double v, double tau) {
  require_position(psi, "apply_Y");
  return quantize_exp_symbol(s, v, tau, psi.grid).apply(psi);
}

Wavefunction apply_U(const Wavefunction& psi, const SymbolModel& s, double dw1,
                     double dw2, double v, double tau) {
  return apply_Q(apply_Y(apply_P(psi, s, dw2, v), s, v, tau), s, dw1, v);
}

Wavefunction apply_B(const Wavefunction& psi, const SymbolModel& s, double dw1,
                     double dw2, double v) {
  require_position(psi, "apply_B");
  const double r1 = std::sqrt(s.mu1), r2 = std::sqrt(s.mu2);
  if (s.separable) {
    auto fq = [&s, v, dw1, r1](double q) {
      double k0 = s.k0 ? s.k0(q) : 0.0;
      double k = s.k(q);
      return std::exp(cplx(-s.mu1 * k * k * v - r1 * k * dw1, -v * k0));
    };
    auto fp = [&s, v, dw2, r2](double p) {
      double h0 = s.h0 ? s.h0(p) : 0.0;
      double h = s.h(p);
      return std::exp(cplx(-s.mu2 * h * h * v - r2 * h * dw2, -v * h0));
    };
    return apply_qp(PhaseSpaceFn::product(fq, fp), psi);
  }
  auto fn = PhaseSpaceFn::general([&s, v, dw1, dw2, r1, r2](double q, double p) {
    double k = s.k(q), h = s.h(p);
    double re = -(s.mu1 * k * k + s.mu2 * h * h) * v - r1 * k * dw1 - r2 * h * dw2;
    return std::exp(cplx(re, -v * eval_H(s, q, p)));
  });
  return apply_qp(fn, psi);
}

PropagateResult propagate_detailed(const Wavefunction& psi0, const StepPlan& plan) {
  require_position(psi0, "propagate");
  if (plan.path.steps != plan.steps)
    throw std::invalid_argument("plan step count does not match the attached path");
  if (plan.path.horizon != plan.horizon)
    throw std::invalid_argument("plan horizon does not match the attached path");
  if (plan.tau != 0.0 && !(plan.symbol.mu1 == 0.0 && plan.symbol.mu2 == 0.0))
    throw std::invalid_argument("stochastic propagation is qp-quantized (tau = 0)");

  const Grid& g = *plan.grid;
  const SymbolModel& s = plan.symbol;
  const double v = plan.horizon / plan.steps;
  const double r1 = std::sqrt(s.mu1), r2 = std::sqrt(s.mu2);

  PropagateResult res;
  res.state = psi0;
  const double guard = 1e3 * norm(psi0);

  if (s.separable) {
    // Fused per-step kernel: one spectral round trip covering P and the
    // momentum half of Y, then the position half of Y and Q.
    RVec kq = sample_on(s.k, g.q), hp = sample_on(s.h, g.p);
    RVec k0q = sample_on(s.k0, g.q), h0p = sample_on(s.h0, g.p);
    CVec mom(g.n);
    double prev_norm = norm(res.state);
    for (int j = 0; j < plan.steps; ++j) {
      const double dw1 = plan.path.dw1[j], dw2 = plan.path.dw2[j];
      spectral_forward(g, res.state.values, mom);
      for (int k = 0; k < g.n; ++k) {
        double h = hp[k];
        mom[k] *= std::exp(cplx(-r2 * h * dw2 - s.mu2 * v * h * h, -v * h0p[k]));
      }
      spectral_inverse(g, mom, res.state.values);
      for (int m = 0; m < g.n; ++m) {
        double k = kq[m];
        res.state.values[m] *=
            std::exp(cplx(-r1 * k * dw1 - s.mu1 * v * k * k, -v * k0q[m]));
      }
      double cur = norm(res.state);
      if (prev_norm > 0.0)
        res.max_step_norm_ratio = std::max(res.max_step_norm_ratio, cur / prev_norm);
      prev_norm = cur;
      if (!(cur <= guard) || !std::isfinite(cur)) {
        res.blew_up = true;
        res.blowup_step = j;
        return res;
      }
    }
    return res;
  }

  QuantizedOperator yop = quantize_exp_symbol(s, v, plan.tau, plan.grid);
  double prev_norm = norm(res.state);
  for (int j = 0; j < plan.steps; ++j) {
    res.state = apply_P(res.state, s, plan.path.dw2[j], v);
    res.state = yop.apply(res.state);
    res.state = apply_Q(res.state, s, plan.path.dw1[j], v);
    double cur = norm(res.state);
    if (prev_norm > 0.0)
      res.max_step_norm_ratio = std::max(res.max_step_norm_ratio, cur / prev_norm);
    prev_norm = cur;
    if (!(cur <= guard) || !std::isfinite(cur)) {
      res.blew_up = true;
      res.blowup_step = j;
      return res;
    }
  }
  return res;
}

Wavefunction propagate(const Wavefunction& psi0, const StepPlan& plan) {
  PropagateResult r = propagate_detailed(psi0, plan);
  if (r.blew_up)
    throw BlowupError("product propagation blew up", r.blowup_step);
  return r.state;
}

namespace {

struct DenseExpansionContext {
  Eigen::MatrixXcd f, fi;          // transform matrices
  Eigen::MatrixXcd hd, h2d, h0d;   // h(phat), h^2(phat), h0(phat)
  Eigen::MatrixXcd ld;             // qp-quantized l
  Eigen::MatrixXcd kh;             // k(qhat) h(phat)
  RVec kq, kq2, k0q, hp;
};

DenseExpansionContext make_dense_context(const SymbolModel& s, const Grid& g, GridPtr gp) {
  DenseExpansionContext c;
  c.f = dense_forward_matrix(g);
  c.fi = dense_inverse_matrix(g);
  c.kq = RVec(g.n);
  c.kq2 = RVec(g.n);
  c.k0q = RVec(g.n);
  c.hp = RVec(g.n);
  for (int m = 0; m < g.n; ++m) {
    c.kq[m] = s.k(g.q[m]);
    c.kq2[m] = c.kq[m] * c.kq[m];
    c.k0q[m] = s.k0 ? s.k0(g.q[m]) : 0.0;
  }
  RVec h0p(g.n), hp2(g.n);
  for (int k = 0; k < g.n; ++k) {
    c.hp[k] = s.h(g.p[k]);
    hp2[k] = c.hp[k] * c.hp[k];
    h0p[k] = s.h0 ? s.h0(g.p[k]) : 0.0;
  }
  c.hd = c.fi * c.hp.cast<cplx>().asDiagonal() * c.f;
  c.h2d = c.fi * hp2.cast<cplx>().asDiagonal() * c.f;
  c.h0d = c.fi * h0p.cast<cplx>().asDiagonal() * c.f;
  if (s.l) {
    auto lfn = PhaseSpaceFn::general(
        [&s](double q, double p) { return cplx(s.l(q, p), 0.0); });
    c.ld = quantize_dense(lfn, 0.0, gp).kernel();
  } else {
    c.ld = Eigen::MatrixXcd::Zero(g.n, g.n);
  }
  c.kh = c.kq.cast<cplx>().asDiagonal() * c.hd;
  return c;
}

Eigen::MatrixXcd dense_y(const SymbolModel& s, double v, GridPtr gp) {
  return to_dense(quantize_exp_symbol(s, v, 0.0, gp));
}

}  // namespace

ExpansionResult expansion_residual(char which, const SymbolModel& s,
                                   const std::vector<double>& vs, int draws,
                                   uint64_t seed, GridPtr grid) {
  if (s.out_of_hypotheses)
    throw std::invalid_argument("expansion_residual needs bounded symbols");
  if (draws < 2) throw std::invalid_argument("need at least 2 draws");
  const Grid& g = *grid;
  ExpansionResult out;
  out.v = vs;

  const bool dense_mode = (which == 'U');
  DenseExpansionContext ctx;
  if (dense_mode) ctx = make_dense_context(s, g, grid);

  const double r1 = std::sqrt(s.mu1), r2 = std::sqrt(s.mu2);
  for (size_t iv = 0; iv < vs.size(); ++iv) {
    const double v = vs[iv];
    Eigen::MatrixXcd yd;
    if (dense_mode) yd = dense_y(s, v, grid);
    std::vector<double> samples(draws);
    for (int d = 0; d < draws; ++d) {
      double dw1 = std::sqrt(v) * rng::gaussian(seed, {static_cast<uint64_t>(d), 0, 2,
                                                       static_cast<uint32_t>(iv), 0});
      double dw2 = std::sqrt(v) * rng::gaussian(seed, {static_cast<uint64_t>(d), 1, 2,
                                                       static_cast<uint32_t>(iv), 0});
      double z1 = (dw1 * dw1 - v) / v, z2 = (dw2 * dw2 - v) / v;
      if (which == 'Q') {
        double worst = 0.0;
        for (int m = 0; m < g.n; ++m) {
          double k = s.k(g.q[m]), k2 = k * k;
          double op = std::exp(-r1 * k * dw1 - s.mu1 * v * k2);
          double tr = 1.0 - r1 * k * dw1 - 0.5 * s.mu1 * v * k2 + 0.5 * s.mu1 * v * k2 * z1;
          worst = std::max(worst, std::abs(op - tr));
        }
        samples[d] = worst;
      } else if (which == 'P') {
        // P is diagonal in the momentum representation and the transform is
        // unitary, so the operator norm is the sup over momentum nodes.
        double worst = 0.0;
        for (int kk = 0; kk < g.n; ++kk) {
          double h = s.h(g.p[kk]), h2 = h * h;
          double op = std::exp(-r2 * h * dw2 - s.mu2 * v * h2);
          double tr = 1.0 - r2 * h * dw2 - 0.5 * s.mu2 * v * h2 + 0.5 * s.mu2 * v * h2 * z2;
          worst = std::max(worst, std::abs(op - tr));
        }
        samples[d] = worst;
      } else if (which == 'U') {
        Eigen::VectorXcd qm(g.n), pm(g.n);
        for (int m = 0; m < g.n; ++m)
          qm[m] = std::exp(-r1 * ctx.kq[m] * dw1 - s.mu1 * v * ctx.kq2[m]);
        for (int kk = 0; kk < g.n; ++kk) {
          double h = ctx.hp[kk];
          pm[kk] = std::exp(-r2 * h * dw2 - s.mu2 * v * h * h);
        }
        Eigen::MatrixXcd u = qm.asDiagonal() * yd * (ctx.fi * pm.asDiagonal() * ctx.f);
        Eigen::MatrixXcd t = Eigen::MatrixXcd::Identity(g.n, g.n);
        for (int m = 0; m < g.n; ++m)
          t(m, m) += cplx(-r1 * ctx.kq[m] * dw1 - 0.5 * s.mu1 * v * ctx.kq2[m] +
                              0.5 * s.mu1 * v * ctx.kq2[m] * z1,
                          -v * ctx.k0q[m]);
        t.noalias() += (-r2 * dw2) * ctx.hd;
        t.noalias() += (0.5 * s.mu2 * v * (z2 - 1.0)) * ctx.h2d;
        t.noalias() += cplx(0.0, -v) * (ctx.h0d + ctx.ld);
        t.noalias() += (r1 * r2 * dw1 * dw2) * ctx.kh;
        samples[d] = operator_norm(u - t);
      } else {
        throw std::invalid_argument("expansion_residual: which must be 'Q', 'P' or 'U'");
      }
    }
    MeanStderr ms = mean_stderr(samples);
    out.mean_residual.push_back(ms.mean);
    out.stderr_.push_back(ms.stderr_);
  }

  bool all_positive = true;
  for (double m : out.mean_residual)
    if (!(m > 0.0)) all_positive = false;
  if (all_positive && vs.size() >= 3)
    out.slope = fit_loglog(out.v, out.mean_residual).fit.slope;
  else
    out.slope = std::numeric_limits<double>::quiet_NaN();
  return out;
}

CrossTermResult cross_term_gap(const SymbolModel& s, const std::vector<double>& vs,
                               int draws, uint64_t seed, GridPtr grid) {
  if (s.out_of_hypotheses)
    throw std::invalid_argument("cross_term_gap needs bounded symbols");
  const Grid& g = *grid;
  DenseExpansionContext ctx = make_dense_context(s, g, grid);
  const double kh_norm = operator_norm(ctx.kh);
  const double r1 = std::sqrt(s.mu1), r2 = std::sqrt(s.mu2);

  CrossTermResult out;
  out.v = vs;
  double abs_prod_mean_smallest = 0.0;
  for (size_t iv = 0; iv < vs.size(); ++iv) {
    const double v = vs[iv];
    Eigen::MatrixXcd yd = dense_y(s, v, grid);
    std::vector<double> gap(draws), cross(draws), absprod(draws);
    for (int d = 0; d < draws; ++d) {
      double dw1 = std::sqrt(v) * rng::gaussian(seed, {static_cast<uint64_t>(d), 0, 3,
                                                       static_cast<uint32_t>(iv), 0});
      double dw2 = std::sqrt(v) * rng::gaussian(seed, {static_cast<uint64_t>(d), 1, 3,
                                                       static_cast<uint32_t>(iv), 0});
      double z1 = (dw1 * dw1 - v) / v, z2 = (dw2 * dw2 - v) / v;
      Eigen::VectorXcd qm(g.n), pm(g.n);
      for (int m = 0; m < g.n; ++m)
        qm[m] = std::exp(-r1 * ctx.kq[m] * dw1 - s.mu1 * v * ctx.kq2[m]);
      for (int kk = 0; kk < g.n; ++kk) {
        double h = ctx.hp[kk];
        pm[kk] = std::exp(-r2 * h * dw2 - s.mu2 * v * h * h);
      }
      Eigen::MatrixXcd u = qm.asDiagonal() * yd * (ctx.fi * pm.asDiagonal() * ctx.f);
      Eigen::MatrixXcd t = Eigen::MatrixXcd::Identity(g.n, g.n);
      for (int m = 0; m < g.n; ++m)
        t(m, m) += cplx(-r1 * ctx.kq[m] * dw1 - 0.5 * s.mu1 * v * ctx.kq2[m] +
                            0.5 * s.mu1 * v * ctx.kq2[m] * z1,
                        -v * ctx.k0q[m]);
      t.noalias() += (-r2 * dw2) * ctx.hd;
      t.noalias() += (0.5 * s.mu2 * v * (z2 - 1.0)) * ctx.h2d;
      t.noalias() += cplx(0.0, -v) * (ctx.h0d + ctx.ld);
      gap[d] = operator_norm(u - t);
      cross[d] = r1 * r2 * std::abs(dw1 * dw2) * kh_norm;
      absprod[d] = std::abs(dw1 * dw2);
    }
    MeanStderr gms = mean_stderr(gap), cms = mean_stderr(cross);
    out.gap_mean.push_back(gms.mean);
    out.gap_stderr.push_back(gms.stderr_);
    out.cross_mean.push_back(cms.mean);
    if (iv + 1 == vs.size())
      abs_prod_mean_smallest = mean_stderr(absprod).mean;
  }
  out.gap_slope = fit_loglog(out.v, out.gap_mean).fit.slope;
  out.cross_slope = fit_loglog(out.v, out.cross_mean).fit.slope;
  out.dominance_ratio = out.gap_mean.back() / out.cross_mean.back();
  out.mean_abs_dw_product_ratio =
      abs_prod_mean_smallest / (2.0 * vs.back() / M_PI);
  return out;
}

ItoExpansionResult ito_expansion_check(double a, double b,
                                       const std::vector<double>& ts, int paths,
                                       uint64_t seed, int substeps_at_tmin) {
  if (ts.size() < 3) throw std::invalid_argument("need >= 3 horizons");
  for (size_t i = 1; i < ts.size(); ++i)
    if (std::abs(ts[i] - 0.5 * ts[i - 1]) > 1e-12 * ts[0])
      throw std::invalid_argument("horizons must be successive halvings");
  const double tmax = ts.front(), tmin = ts.back();
  const int nf = substeps_at_tmin * (1 << (static_cast<int>(ts.size()) - 1));
  const double vf = tmax / nf;
  (void)tmin;

  ItoExpansionResult out;
  out.t = ts;
  std::vector<std::vector<double>> res(ts.size(), std::vector<double>(paths));
  std::vector<std::vector<double>> oerr(ts.size(), std::vector<double>(paths));
  const double sd = std::sqrt(vf);
  std::vector<double> dw(nf);
  for (int pth = 0; pth < paths; ++pth) {
    for (int j = 0; j < nf; ++j)
      dw[j] = sd * rng::gaussian(seed, {static_cast<uint64_t>(pth), 0, 2, 1,
                                        static_cast<uint32_t>(j)});
    double phi = 1.0, w = 0.0;
    int consumed = 0;
    // integrate once across [0, tmax], snapshotting at each horizon
    for (int it = static_cast<int>(ts.size()) - 1; it >= 0; --it) {
      int until = static_cast<int>(std::lround(ts[it] / vf));
      for (; consumed < until; ++consumed) {
        phi += a * phi * vf + b * phi * dw[consumed];
        w += dw[consumed];
      }
      double t = ts[it];
      double expansion = 1.0 + b * w + a * t + 0.5 * b * b * (w * w - t);
      double exact = std::exp((a - 0.5 * b * b) * t + b * w);
      res[it][pth] = std::abs(phi - expansion);
      oerr[it][pth] = std::abs(phi - exact);
    }
  }
  for (size_t it = 0; it < ts.size(); ++it) {
    out.mean_residual.push_back(mean_stderr(res[it]).mean);
    out.oracle_error.push_back(mean_stderr(oerr[it]).mean);
  }
  out.slope = fit_loglog(out.t, out.mean_residual).fit.slope;
  return out;
}

NormBoundEstimate norm_bound_estimate(const SymbolModel& s, double v, int draws,
                                      uint64_t seed, GridPtr grid) {
  const Grid& g = *grid;
  NormBoundEstimate out;
  out.v = v;
  out.q_bound = std::exp(0.5 * s.k_bound * s.k_bound * s.mu1 * v);
  out.u_bound = std::exp((s.k_bound * s.k_bound * s.mu1 +
                          s.h_bound * s.h_bound * s.mu2) * v);
  out.y_norm = 1.0;
  if (!s.separable) out.y_norm = operator_norm(dense_y(s, v, grid));

  RVec kq(g.n), hp(g.n);
  for (int m = 0; m < g.n; ++m) kq[m] = s.k(g.q[m]);
  for (int k = 0; k < g.n; ++k) hp[k] = s.h(g.p[k]);
  const double r1 = std::sqrt(s.mu1), r2 = std::sqrt(s.mu2);

  std::vector<double> qn(draws), pn(draws), un(draws);
  for (int d = 0; d < draws; ++d) {
    double dw1 = std::sqrt(v) * rng::gaussian(seed, {static_cast<uint64_t>(d), 0, 4, 0, 0});
    double dw2 = std::sqrt(v) * rng::gaussian(seed, {static_cast<uint64_t>(d), 1, 4, 0, 0});
    double qmax = 0.0, pmax = 0.0;
    for (int m = 0; m < g.n; ++m)
      qmax = std::max(qmax, std::exp(-r1 * kq[m] * dw1 - s.mu1 * v * kq[m] * kq[m]));
    for (int k = 0; k < g.n; ++k)
      pmax = std::max(pmax, std::exp(-r2 * hp[k] * dw2 - s.mu2 * v * hp[k] * hp[k]));
    qn[d] = qmax;
    pn[d] = pmax;
    un[d] = qmax * pmax * out.y_norm;
  }
  MeanStderr q = mean_stderr(qn), p = mean_stderr(pn), u = mean_stderr(un);
  out.q_mean = q.mean;
  out.q_stderr = q.stderr_;
  out.p_mean = p.mean;
  out.p_stderr = p.stderr_;
  out.u_mean = u.mean;
  out.u_stderr = u.stderr_;
  return out;
}

}  // namespace sito
