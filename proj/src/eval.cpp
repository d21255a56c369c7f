#include "arflow/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "arflow/datagen.hpp"

namespace arflow {

double pearson(std::span<const double> x, std::span<const double> y) {
  require_shape(x.size() == y.size(), "pearson: lengths differ");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0) || std::sqrt(sxx / n) <= 1e-12 || std::sqrt(syy / n) <= 1e-12) {
    throw std::invalid_argument("pearson: correlation undefined for a constant column");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double lag_autocorrelation(std::span<const double> v, std::size_t lag) {
  if (lag >= v.size() - 1) throw std::invalid_argument("lag_autocorrelation: lag too large");
  return pearson(v.first(v.size() - lag), v.subspan(lag));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

MatchReport match_sources(const Matrix& recovered, const Matrix& truth) {
  require_shape(recovered.rows() == truth.rows(), "match_sources: row counts differ");
  require_shape(recovered.cols() == truth.cols(), "match_sources: column counts differ");
  const std::size_t n = recovered.cols();
  if (n == 0 || n > 8) throw std::invalid_argument("match_sources: need 1 <= n <= 8");

  std::vector<std::vector<double>> rec_cols(n), truth_cols(n);
  for (std::size_t j = 0; j < n; ++j) {
    rec_cols[j] = recovered.col(j);
    truth_cols[j] = truth.col(j);
  }
  Matrix C(n, n);
  MatchReport rep;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      C(i, k) = pearson(rec_cols[i], truth_cols[k]);
      rep.overall_max_corr = std::max(rep.overall_max_corr, std::abs(C(i, k)));
    }
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::abs(C(i, perm[i]));
    if (total > best) {
      best = total;
      rep.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  rep.signs.resize(n);
  rep.per_source_abs_corr.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = C(i, rep.permutation[i]);
    rep.signs[i] = c < 0.0 ? -1 : 1;
    rep.per_source_abs_corr[i] = std::abs(c);
  }
  rep.mean_abs_corr = best / static_cast<double>(n);
  return rep;
}

CiReport ci_report(const Matrix& means, std::span<const double> log_q, const Matrix& truth,
                   double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("ci_report: level must lie in (0,1)");
  require_shape(log_q.size() == means.cols(), "ci_report: log_q length vs source count");
  CiReport rep;
  rep.match = match_sources(means, truth);
  rep.level = level;
  rep.z = normal_quantile(0.5 * (1.0 + level));

  const std::size_t R = means.rows();
  const std::size_t n = means.cols();
  rep.truth = Matrix(R, n);
  rep.mean = Matrix(R, n);
  rep.lower = Matrix(R, n);
  rep.upper = Matrix(R, n);
  rep.coverage.resize(n);

  for (std::size_t j = 0; j < n; ++j) {
    const auto mu = means.col(j);
    const double Rd = static_cast<double>(R);
    const double centre = std::accumulate(mu.begin(), mu.end(), 0.0) / Rd;
    double var = 0.0;
    for (double v : mu) var += (v - centre) * (v - centre);
    const double sd = std::sqrt(var / Rd);
    if (!(sd > 1e-12)) throw std::invalid_argument("ci_report: constant posterior mean column");
    const double sign = static_cast<double>(rep.match.signs[j]);
    auto to_frame = [&](double v) { return sign * (v - centre) / sd; };

    const auto truth_z = zscore(truth.col(rep.match.permutation[j]));
    const double half = rep.z * std::sqrt(std::exp(log_q[j]));
    std::size_t inside = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const double a = to_frame(mu[r] - half);
      const double b = to_frame(mu[r] + half);
      const double lo = std::min(a, b);
      const double hi = std::max(a, b);
      rep.truth(r, j) = truth_z[r];
      rep.mean(r, j) = to_frame(mu[r]);
      rep.lower(r, j) = lo;
      rep.upper(r, j) = hi;
      if (truth_z[r] >= lo && truth_z[r] <= hi) ++inside;
    }
    rep.coverage[j] = static_cast<double>(inside) / static_cast<double>(R);
  }
  return rep;
}

}  // namespace arflow
