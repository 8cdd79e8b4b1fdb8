#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace sito {

/// Deterministic pairwise-tree sum: result depends only on element order,
/// never on thread scheduling, and is better conditioned than a running sum.
double pairwise_sum(std::span<const double> x);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample standard error of the mean
};
MeanStderr mean_stderr(std::span<const double> x);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rms_residual = 0.0;
};
/// Ordinary least squares of y against x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// OLS of log2(y) against log2(x); `drop_coarsest_outlier` removes the first
/// point when its residual exceeds 3x the fit RMS (pre-asymptotic pollution).
struct LogLogFit {
  LineFit fit;
  bool dropped_first = false;
};
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y,
                     bool drop_coarsest_outlier = false);

/// Largest singular value by power iteration on A^H A (deterministic start,
/// fixed tolerance). Matches the operator norm on l2.
double operator_norm(const Eigen::MatrixXcd& a);

}  // namespace sito
