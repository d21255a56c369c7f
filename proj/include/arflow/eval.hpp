#pragma once

// Permutation- and sign-invariant scoring of recovered sources, and
// posterior interval coverage in the Z-scored frame.

#include <span>
#include <vector>

#include "arflow/matrix.hpp"

namespace arflow {

/// Pearson correlation. Throws if either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation between v[0..R-lag) and v[lag..R).
double lag_autocorrelation(std::span<const double> v, std::size_t lag);

/// Standard normal quantile function.
double normal_quantile(double p);

struct MatchReport {
  std::vector<std::size_t> permutation;  // recovered column j -> truth column (0-based)
  std::vector<int> signs;                // sign of corr(recovered j, matched truth)
  std::vector<double> per_source_abs_corr;
  double mean_abs_corr = 0.0;
  double overall_max_corr = 0.0;  // max |corr| over every (recovered, truth) pair
};

/// Exhaustive search over all n! assignments (n <= 8) maximizing mean |corr|.
/// Ties resolve to the lexicographically smallest permutation.
MatchReport match_sources(const Matrix& recovered, const Matrix& truth);

struct CiReport {
  MatchReport match;
  double level = 0.95;
  double z = 0.0;
  std::vector<double> coverage;  // per recovered source
  // All R x n, columns in recovered-source order, in the Z-scored frame.
  Matrix truth;
  Matrix mean;
  Matrix lower;
  Matrix upper;
};

/// Intervals mu +- z * sqrt(q_j), mapped by the affine Z-score transform of
/// the matched mean column (including its sign), against the Z-scored truth.
CiReport ci_report(const Matrix& means, std::span<const double> log_q, const Matrix& truth,
                   double level);

}  // namespace arflow
