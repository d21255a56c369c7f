#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "arflow/matrix.hpp"
#include "arflow/model.hpp"
#include "arflow/params.hpp"
#include "arflow/prior.hpp"
#include "arflow/scalar.hpp"

namespace arflow {

/// How the KL gap is weighted against the mean-squared reconstruction.
enum class KlScaling {
  per_entry,  // beta / (m R)
  raw,        // beta
};

template <class T>
struct LossBreakdown {
  T rec{};
  T log_q{};
  T log_p{};
  T kl_gap{};
  T total{};
  double beta = 0.0;
  double normalizer = 1.0;
};

/// Mean over all entries of (x - x_hat)^2.
template <class T>
T reconstruction(const Matrix& X, const Mat<T>& Xhat) {
  require_shape(X.rows() == Xhat.rows() && X.cols() == Xhat.cols(), "reconstruction shape");
  std::vector<T> sq;
  sq.reserve(X.rows() * X.cols());
  const auto x = X.data();
  const auto xh = Xhat.data();
  for (std::size_t i = 0; i < x.size(); ++i) sq.push_back(num::square(x[i] - xh[i]));
  return num::sum(std::span<const T>(sq)) * (1.0 / static_cast<double>(x.size()));
}

/// Full Gaussian log-likelihood log p(X|S) with fixed noise variance v_y.
double diagnostic_loglik(const Matrix& X, const Matrix& Xhat, double v_y);

/// Single-sample negative-ELBO objective:
///   total = rec + (beta / normalizer) * (log q(S|X) - log p(S)).
template <class T>
LossBreakdown<T> loss(const Matrix& X, const ModelView<T>& model, double beta, const Matrix& noise,
                      KlScaling scaling = KlScaling::per_entry) {
  const Mat<T> M = encode(X, model.encoder);
  const SourceTrajectories<T> traj = sample_posterior(M, model.log_q, noise);
  const Mat<T> Xhat = decode(traj.S, model.decoder);

  LossBreakdown<T> out;
  out.beta = beta;
  out.normalizer =
      scaling == KlScaling::per_entry ? static_cast<double>(X.rows() * X.cols()) : 1.0;
  out.rec = reconstruction(X, Xhat);
  out.log_q = log_posterior(traj.S, M, model.log_q);
  out.log_p = log_prior(traj.S, std::span<const PriorView<T>>(model.priors));
  out.kl_gap = out.log_q - out.log_p;
  out.total = out.rec + (beta / out.normalizer) * out.kl_gap;
  return out;
}

}  // namespace arflow
