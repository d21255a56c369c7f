#pragma once

// Per-source autoregressive flow prior.
//
// Each source follows s_1 ~ N(0, sigma0^2) and, for r >= 2,
//   u_r   = (s_r - a s_{r-1}) / sigma          (AR backbone)
//   u_r   = b_r + exp(alpha_r) eps_r           (affine flow, eps_r ~ N(0,1))
//   b_r   = w_b . h_{r-1} + c_b
//   alpha = kappa tanh(w_alpha . h_{r-1} + c_alpha)
//   h_r   = tanh(W_h h_{r-1} + W_eps eps_r + c_eps),  h_1 = 0.
// Both maps s -> u and u -> eps are causal with diagonal Jacobian entries
// 1/sigma and exp(-alpha_r), which gives the exact log-density below.

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "arflow/matrix.hpp"
#include "arflow/model.hpp"
#include "arflow/params.hpp"
#include "arflow/scalar.hpp"

namespace arflow {

/// Owning per-source prior parameters (the flat model vector stores the same
/// fields; see ParamLayout).
struct PriorParams {
  double a = 0.0;
  double log_sigma = 0.0;
  double log_sigma0 = 0.0;
  std::vector<double> W_h;
  std::vector<double> W_eps;
  std::vector<double> c_eps;
  std::vector<double> w_b;
  double c_b = 0.0;
  std::vector<double> w_alpha;
  double c_alpha = 0.0;
  std::size_t H = 0;

  /// Zero flow weights: the prior reduces to a Gaussian AR(1) chain.
  static PriorParams identity(std::size_t H);

  PriorView<double> view() const;
};

template <class T>
struct FlowHeads {
  T b;
  T alpha;
};

template <class T>
struct FlowTrace {
  std::vector<T> u;      // r = 2..R
  std::vector<T> eps;    // r = 2..R
  std::vector<T> alpha;  // r = 2..R
  std::vector<T> b;      // r = 2..R
  std::vector<std::vector<T>> h;  // h_1..h_R, h_1 = 0
};

namespace detail {

inline double zero_like(double) { return 0.0; }
inline ad::Var zero_like(const ad::Var& ref) { return ref * 0.0; }

}  // namespace detail

template <class T>
FlowHeads<T> flow_heads(std::span<const T> h_prev, const PriorView<T>& p) {
  require_shape(h_prev.size() == p.H, "hidden state width");
  T b = num::affine(p.w_b, h_prev, p.c_b);
  T alpha = p.kappa * num::tanh(num::affine(p.w_alpha, h_prev, p.c_alpha));
  return {b, alpha};
}

template <class T>
std::vector<T> hidden_update(std::span<const T> h_prev, const T& eps, const PriorView<T>& p) {
  require_shape(h_prev.size() == p.H, "hidden state width");
  std::vector<T> w(p.H + 1);
  std::vector<T> x(p.H + 1);
  std::copy(h_prev.begin(), h_prev.end(), x.begin());
  x[p.H] = eps;
  std::vector<T> h(p.H);
  for (std::size_t i = 0; i < p.H; ++i) {
    const auto row = p.W_h_row(i);
    std::copy(row.begin(), row.end(), w.begin());
    w[p.H] = p.W_eps[i];
    h[i] = num::tanh(num::affine(std::span<const T>(w), std::span<const T>(x), p.c_eps[i]));
  }
  return h;
}

/// Maps a source trajectory to its base noise, sequentially in r.
template <class T>
FlowTrace<T> inverse_flow(std::span<const T> s, const PriorView<T>& p) {
  if (s.size() < 2) throw std::invalid_argument("inverse_flow: trajectory needs at least 2 entries");
  const std::size_t R = s.size();
  const T zero = detail::zero_like(p.a);
  const T inv_sigma = num::exp_clamped(-1.0 * p.log_sigma);
  const T lag_coef = -1.0 * (p.a * inv_sigma);

  FlowTrace<T> tr;
  tr.u.reserve(R - 1);
  tr.eps.reserve(R - 1);
  tr.alpha.reserve(R - 1);
  tr.b.reserve(R - 1);
  tr.h.reserve(R);
  tr.h.emplace_back(p.H, zero);

  const T coef[2] = {inv_sigma, lag_coef};
  for (std::size_t r = 1; r < R; ++r) {
    const T xs[2] = {s[r], s[r - 1]};
    const T u = num::affine(std::span<const T>(coef), std::span<const T>(xs), zero);
    const auto [b, alpha] = flow_heads(std::span<const T>(tr.h.back()), p);
    const T eps = (u - b) * num::exp(-1.0 * alpha);
    tr.h.push_back(hidden_update(std::span<const T>(tr.h.back()), eps, p));
    tr.u.push_back(u);
    tr.b.push_back(b);
    tr.alpha.push_back(alpha);
    tr.eps.push_back(eps);
  }
  return tr;
}

/// Ancestral sampling driven by caller-supplied standard-normal variates.
/// Can diverge numerically for |a| well above 1; density evaluation does not.
std::vector<double> sample_prior(const PriorView<double>& p, std::size_t R,
                                 std::span<const double> eps_draws, double s1_draw);

/// Exact log-density of one source trajectory.
template <class T>
T log_prior_source(std::span<const T> s, const PriorView<T>& p) {
  if (s.size() < 2) throw std::invalid_argument("log_prior_source: trajectory needs at least 2 entries");
  const FlowTrace<T> tr = inverse_flow(s, p);
  const double steps = static_cast<double>(s.size() - 1);

  const T inv_var0 = num::exp_clamped(-2.0 * p.log_sigma0);
  const T initial = -0.5 * (num::square(s[0]) * inv_var0 + 2.0 * p.log_sigma0) - 0.5 * kLog2Pi;

  std::vector<T> sq;
  sq.reserve(tr.eps.size());
  for (const T& e : tr.eps) sq.push_back(num::square(e));
  const T base = -0.5 * num::sum(std::span<const T>(sq)) - 0.5 * steps * kLog2Pi;

  const T flow_logdet = -1.0 * num::sum(std::span<const T>(tr.alpha));
  const T ar_logdet = -steps * p.log_sigma;

  const T terms[4] = {initial, base, flow_logdet, ar_logdet};
  return num::sum(std::span<const T>(terms));
}

/// Sum of per-source log-densities over the columns of S.
template <class T>
T log_prior(const Mat<T>& S, std::span<const PriorView<T>> priors) {
  if (S.cols() != priors.size()) {
    throw std::invalid_argument("log_prior: " + std::to_string(S.cols()) + " columns but " +
                                std::to_string(priors.size()) + " prior records");
  }
  std::vector<T> per_source;
  per_source.reserve(priors.size());
  for (std::size_t j = 0; j < priors.size(); ++j) {
    const std::vector<T> col = S.col(j);
    per_source.push_back(log_prior_source(std::span<const T>(col), priors[j]));
  }
  return num::sum(std::span<const T>(per_source));
}

}  // namespace arflow
