#include "sito/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace sito {

double pairwise_sum(std::span<const double> x) {
  if (x.size() == 0) return 0.0;
  if (x.size() == 1) return x[0];
  if (x.size() == 2) return x[0] + x[1];
  size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

MeanStderr mean_stderr(std::span<const double> x) {
  MeanStderr out;
  const size_t n = x.size();
  if (n == 0) return out;
  out.mean = pairwise_sum(x) / static_cast<double>(n);
  if (n < 2) return out;
  std::vector<double> dev2(n);
  for (size_t i = 0; i < n; ++i) {
    double d = x[i] - out.mean;
    dev2[i] = d * d;
  }
  double var = pairwise_sum(dev2) / static_cast<double>(n - 1);
  out.stderr_ = std::sqrt(var / static_cast<double>(n));
  return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line needs >= 2 matched points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / n);
  if (x.size() > 2) {
    double sigma2 = ss / (n - 2.0);
    f.slope_stderr = std::sqrt(sigma2 * n / denom);
  }
  return f;
}

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y,
                     bool drop_coarsest_outlier) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("fit_loglog needs >= 3 matched points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log2(x[i]);
    ly[i] = std::log2(y[i]);
  }
  LogLogFit out;
  out.fit = fit_line(lx, ly);
  if (drop_coarsest_outlier && x.size() > 3) {
    double r0 = std::abs(ly[0] - (out.fit.slope * lx[0] + out.fit.intercept));
    if (r0 > 3.0 * out.fit.rms_residual) {
      out.dropped_first = true;
      out.fit = fit_line(std::span<const double>(lx).subspan(1),
                         std::span<const double>(ly).subspan(1));
    }
  }
  return out;
}

double operator_norm(const Eigen::MatrixXcd& a) {
  const int n = static_cast<int>(a.cols());
  if (n == 0) return 0.0;
  // Deterministic start vector with all-mode content.
  Eigen::VectorXcd x(n);
  for (int i = 0; i < n; ++i)
    x[i] = std::complex<double>(1.0, 0.3 + 0.1 * std::sin(0.7 * i + 0.4));
  x.normalize();
  double sigma2 = 0.0;
  Eigen::MatrixXcd ah = a.adjoint();
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXcd y = ah * (a * x);
    double lam = y.norm();
    if (lam == 0.0) return 0.0;
    x = y / lam;
    if (it > 4 && std::abs(lam - sigma2) <= 1e-12 * lam) {
      sigma2 = lam;
      break;
    }
    sigma2 = lam;
  }
  return std::sqrt(sigma2);
}

}  // namespace sito
