#pragma once

// Encoder (demixing) and decoder (remixing) maps, plus the factorized
// Gaussian posterior q(S|X) = prod_{r,j} N(s_rj; mu_rj, q_j).

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "arflow/matrix.hpp"
#include "arflow/params.hpp"
#include "arflow/scalar.hpp"

namespace arflow {

inline constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

/// Observed mixtures, one row per ordered index r.
class MixtureSeries {
 public:
  explicit MixtureSeries(Matrix X) : X_(std::move(X)) {
    if (X_.rows() < 2) throw std::invalid_argument("mixture series needs at least 2 rows");
    if (X_.cols() < 1) throw std::invalid_argument("mixture series needs at least 1 channel");
    for (double v : X_.data()) {
      if (!std::isfinite(v)) throw std::invalid_argument("mixture series contains non-finite values");
    }
  }

  const Matrix& values() const { return X_; }
  std::size_t R() const { return X_.rows(); }
  std::size_t m() const { return X_.cols(); }

 private:
  Matrix X_;
};

template <class T>
struct SourceTrajectories {
  Mat<T> S;
  Matrix noise;  // the standard-normal draws used to form S
};

namespace detail {

template <class T, class In>
void apply_affine(const AffineView<T>& map, std::span<const In> x, std::span<T> out) {
  for (std::size_t i = 0; i < map.out; ++i) out[i] = num::affine(map.row(i), x, map.b[i]);
}

}  // namespace detail

/// Evaluates one row through the encoder or decoder map.
template <class T, class In>
void apply_map(const MapView<T>& map, std::span<const In> x, std::span<T> out) {
  require_shape(x.size() == map.in(), "map input width");
  require_shape(out.size() == map.out(), "map output width");
  if (!map.hidden_layer) {
    detail::apply_affine(map.first, x, out);
    return;
  }
  std::vector<T> h(map.first.out);
  detail::apply_affine(map.first, x, std::span<T>(h));
  for (auto& v : h) v = num::tanh(v);
  detail::apply_affine(map.second, std::span<const T>(h), out);
}

/// Posterior means M (R x n), row r = f(x_r).
template <class T>
Mat<T> encode(const Matrix& X, const MapView<T>& enc) {
  require_shape(X.cols() == enc.in(), "encoder expects " + std::to_string(enc.in()) +
                                          " channels, got " + std::to_string(X.cols()));
  Mat<T> M(X.rows(), enc.out());
  for (std::size_t r = 0; r < X.rows(); ++r) apply_map(enc, X.row(r), M.row(r));
  return M;
}

/// Reconstructions X-hat (R x m), row r = g(s_r).
template <class T>
Mat<T> decode(const Mat<T>& S, const MapView<T>& dec) {
  require_shape(S.cols() == dec.in(), "decoder expects " + std::to_string(dec.in()) +
                                          " sources, got " + std::to_string(S.cols()));
  Mat<T> Xhat(S.rows(), dec.out());
  for (std::size_t r = 0; r < S.rows(); ++r) apply_map(dec, S.row(r), Xhat.row(r));
  return Xhat;
}

/// Reparameterized draw S = M + noise * sqrt(q), q_j = exp(log_q_j).
template <class T>
SourceTrajectories<T> sample_posterior(const Mat<T>& M, std::span<const T> log_q, Matrix noise) {
  require_shape(log_q.size() == M.cols(), "log_q length vs source count");
  require_shape(noise.rows() == M.rows() && noise.cols() == M.cols(), "noise shape vs means");
  std::vector<T> sd;
  sd.reserve(M.cols());
  for (const T& lq : log_q) sd.push_back(num::exp_clamped(0.5 * lq));

  SourceTrajectories<T> out{Mat<T>(M.rows(), M.cols()), std::move(noise)};
  for (std::size_t r = 0; r < M.rows(); ++r) {
    for (std::size_t j = 0; j < M.cols(); ++j) {
      const double xi = out.noise(r, j);
      out.S(r, j) = num::affine(std::span<const T>(&sd[j], 1), std::span<const double>(&xi, 1), M(r, j));
    }
  }
  return out;
}

/// log q(S|X) = sum_j sum_r [ -(s-mu)^2 / (2 q_j) - log(2 pi)/2 - log(q_j)/2 ].
template <class T>
T log_posterior(const Mat<T>& S, const Mat<T>& M, std::span<const T> log_q) {
  require_shape(S.rows() == M.rows() && S.cols() == M.cols(), "samples vs means");
  require_shape(log_q.size() == M.cols(), "log_q length vs source count");
  const std::size_t R = S.rows();
  const double Rd = static_cast<double>(R);
  std::vector<T> per_source;
  std::vector<T> sq(R);
  for (std::size_t j = 0; j < S.cols(); ++j) {
    for (std::size_t r = 0; r < R; ++r) sq[r] = num::square(S(r, j) - M(r, j));
    const T ss = num::sum(std::span<const T>(sq));
    const T inv_q = num::exp_clamped(-1.0 * log_q[j]);
    per_source.push_back(-0.5 * (ss * inv_q) - 0.5 * Rd * log_q[j] - 0.5 * Rd * kLog2Pi);
  }
  return num::sum(std::span<const T>(per_source));
}

}  // namespace arflow
