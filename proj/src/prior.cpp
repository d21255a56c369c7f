#include "arflow/prior.hpp"

#include <cmath>

namespace arflow {

PriorParams PriorParams::identity(std::size_t H) {
  PriorParams p;
  p.H = H;
  p.W_h.assign(H * H, 0.0);
  p.W_eps.assign(H, 0.0);
  p.c_eps.assign(H, 0.0);
  p.w_b.assign(H, 0.0);
  p.w_alpha.assign(H, 0.0);
  return p;
}

PriorView<double> PriorParams::view() const {
  if (W_h.size() != H * H || W_eps.size() != H || c_eps.size() != H || w_b.size() != H ||
      w_alpha.size() != H) {
    throw std::invalid_argument("prior parameters do not match hidden width");
  }
  PriorView<double> v;
  v.a = a;
  v.log_sigma = log_sigma;
  v.log_sigma0 = log_sigma0;
  v.W_h = W_h;
  v.W_eps = W_eps;
  v.c_eps = c_eps;
  v.w_b = w_b;
  v.c_b = c_b;
  v.w_alpha = w_alpha;
  v.c_alpha = c_alpha;
  v.H = H;
  return v;
}

std::vector<double> sample_prior(const PriorView<double>& p, std::size_t R,
                                 std::span<const double> eps_draws, double s1_draw) {
  if (R < 2) throw std::invalid_argument("sample_prior: length must be at least 2");
  if (eps_draws.size() != R - 1) throw std::invalid_argument("sample_prior: need R-1 noise draws");
  const double sigma = std::exp(p.log_sigma);
  std::vector<double> s(R);
  s[0] = std::exp(p.log_sigma0) * s1_draw;
  std::vector<double> h(p.H, 0.0);
  for (std::size_t r = 1; r < R; ++r) {
    const auto [b, alpha] = flow_heads(std::span<const double>(h), p);
    const double eps = eps_draws[r - 1];
    const double u = b + std::exp(alpha) * eps;
    s[r] = p.a * s[r - 1] + sigma * u;
    h = hidden_update(std::span<const double>(h), eps, p);
  }
  return s;
}

}  // namespace arflow
