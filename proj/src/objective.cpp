#include "arflow/objective.hpp"

namespace arflow {

double diagnostic_loglik(const Matrix& X, const Matrix& Xhat, double v_y) {
  if (!(v_y > 0.0)) throw std::invalid_argument("diagnostic_loglik: noise variance must be positive");
  require_shape(X.rows() == Xhat.rows() && X.cols() == Xhat.cols(), "log-likelihood shape");
  double ss = 0.0;
  const auto x = X.data();
  const auto xh = Xhat.data();
  for (std::size_t i = 0; i < x.size(); ++i) ss += (x[i] - xh[i]) * (x[i] - xh[i]);
  const double n = static_cast<double>(x.size());
  return -ss / (2.0 * v_y) - 0.5 * n * std::log(2.0 * std::numbers::pi * v_y);
}

}  // namespace arflow
