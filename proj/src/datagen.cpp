#include "arflow/datagen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace arflow {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag, std::uint32_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag,
                    index};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kSourceTag = 0x50C5u;
constexpr std::uint32_t kMixingTag = 0x313Au;
constexpr std::uint32_t kNoiseTag = 0x4E01u;

// Laplace(0, b) with unit variance (b = 1/sqrt 2), by inverse CDF.
double laplace_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  double u = uni(rng);
  while (u == -0.5) u = uni(rng);
  const double b = 1.0 / std::numbers::sqrt2;
  return -b * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
}

std::vector<double> ar_process(std::size_t R, double coef, bool laplace, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto innovation = [&] { return laplace ? laplace_unit(rng) : normal(rng); };
  std::vector<double> x(R);
  const double stationary_sd = std::abs(coef) < 1.0 ? 1.0 / std::sqrt(1.0 - coef * coef) : 1.0;
  x[0] = stationary_sd * innovation();
  for (std::size_t r = 1; r < R; ++r) x[r] = coef * x[r - 1] + innovation();
  return x;
}

Eigen::MatrixXd to_eigen(const Matrix& A) {
  Eigen::MatrixXd E(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) E(i, j) = A(i, j);
  return E;
}

}  // namespace

SourceSpec parse_source_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("source spec '" + text + "' must look like kind:param");
  }
  const std::string kind = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  SourceSpec s;
  if (kind == "sinusoid") {
    s.kind = SourceKind::sinusoid;
  } else if (kind == "gaussian_ar") {
    s.kind = SourceKind::gaussian_ar;
  } else if (kind == "laplace_ar") {
    s.kind = SourceKind::laplace_ar;
  } else if (kind == "square") {
    s.kind = SourceKind::square;
  } else {
    throw std::invalid_argument("unknown source kind '" + kind + "'");
  }
  const char* first = arg.data();
  const char* last = arg.data() + arg.size();
  auto [ptr, ec] = std::from_chars(first, last, s.param);
  if (ec != std::errc{} || ptr != last || !std::isfinite(s.param)) {
    throw std::invalid_argument("bad parameter in source spec '" + text + "'");
  }
  return s;
}

std::string to_string(const SourceSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case SourceKind::sinusoid: os << "sinusoid"; break;
    case SourceKind::gaussian_ar: os << "gaussian_ar"; break;
    case SourceKind::laplace_ar: os << "laplace_ar"; break;
    case SourceKind::square: os << "square"; break;
  }
  os << ':' << spec.param;
  return os.str();
}

std::vector<SourceSpec> parse_source_list(const std::string& text) {
  std::vector<SourceSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_source_spec(item));
  }
  if (out.empty()) throw std::invalid_argument("empty source list");
  return out;
}

Matrix gen_sources(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.R < 2) throw std::invalid_argument("gen_sources: R must be at least 2");
  if (spec.sources.empty()) throw std::invalid_argument("gen_sources: no sources");
  const std::size_t R = spec.R;
  Matrix S(R, spec.n());
  for (std::size_t j = 0; j < spec.n(); ++j) {
    const SourceSpec& src = spec.sources[j];
    auto rng = stream(seed, kSourceTag, static_cast<std::uint32_t>(j));
    std::vector<double> col(R);
    switch (src.kind) {
      case SourceKind::sinusoid:
        for (std::size_t r = 0; r < R; ++r) {
          col[r] = std::sin(2.0 * std::numbers::pi * src.param * static_cast<double>(r) /
                            static_cast<double>(R));
        }
        break;
      case SourceKind::square:
        for (std::size_t r = 0; r < R; ++r) {
          const double phase = src.param * (static_cast<double>(r) + 0.5) / static_cast<double>(R);
          col[r] = (phase - std::floor(phase)) < 0.5 ? 1.0 : -1.0;
        }
        break;
      case SourceKind::gaussian_ar:
        col = ar_process(R, src.param, false, rng);
        break;
      case SourceKind::laplace_ar:
        col = ar_process(R, src.param, true, rng);
        break;
    }
    S.set_col(j, zscore(col));
  }
  return S;
}

double condition_number(const Matrix& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(A));
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? sv(0) / smin : INFINITY;
}

Matrix random_mixing(std::size_t m, std::size_t n, double condition_cap, std::uint64_t seed) {
  if (m < n) throw std::invalid_argument("random_mixing: fewer observations than sources");
  if (!(condition_cap >= 1.0)) throw std::invalid_argument("random_mixing: condition cap must be >= 1");
  constexpr std::uint32_t kMaxAttempts = 10000;
  for (std::uint32_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    auto rng = stream(seed, kMixingTag, attempt);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix A(m, n);
    for (double& v : A.data()) v = normal(rng);
    if (condition_number(A) <= condition_cap) return A;
  }
  throw std::runtime_error("random_mixing: no draw met the condition cap");
}

MixtureSeries mix(const Matrix& sources, const Matrix& A, double noise_std, std::uint64_t seed) {
  require_shape(A.cols() == sources.cols(), "mixing matrix columns vs source count");
  if (noise_std < 0.0) throw std::invalid_argument("mix: noise_std must be non-negative");
  const std::size_t R = sources.rows();
  const std::size_t m = A.rows();
  Matrix X(R, m);
  auto rng = stream(seed, kNoiseTag);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < m; ++i) {
      X(r, i) = num::affine(A.row(i), sources.row(r), 0.0);
      if (noise_std > 0.0) X(r, i) += noise_std * normal(rng);
    }
  }
  return MixtureSeries(std::move(X));
}

std::vector<double> zscore(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("zscore: empty input");
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-12)) throw std::invalid_argument("zscore: input is constant");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

Matrix zscore_columns(const Matrix& X) {
  Matrix Z(X.rows(), X.cols());
  for (std::size_t j = 0; j < X.cols(); ++j) {
    const auto col = X.col(j);
    Z.set_col(j, zscore(col));
  }
  return Z;
}

Matrix whiten_columns(const Matrix& X) {
  const std::size_t R = X.rows(), m = X.cols();
  if (R < 2 || m < 1) throw std::invalid_argument("whiten: need at least two rows and one column");
  Eigen::MatrixXd E(R, m);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < m; ++i) E(r, i) = X(r, i);
  }
  E.rowwise() -= E.colwise().mean();
  const Eigen::MatrixXd C = E.transpose() * E / static_cast<double>(R);
  if (!C.allFinite()) throw std::invalid_argument("whiten: covariance is not finite");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  const double tol = 1e-12 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  Eigen::VectorXd scale(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double ev = es.eigenvalues()(static_cast<Eigen::Index>(i));
    scale(static_cast<Eigen::Index>(i)) = ev > tol ? 1.0 / std::sqrt(ev) : 0.0;
  }
  const Eigen::MatrixXd W = es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::MatrixXd Z = E * W;
  Matrix out(R, m);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < m; ++i) out(r, i) = Z(r, i);
  }
  return out;
}

SyntheticData generate(const SyntheticSpec& spec, std::uint64_t seed) {
  SyntheticData d;
  d.sources = gen_sources(spec, seed);
  d.mixing = spec.mixing.rows() == 0 ? random_mixing(spec.m, spec.n(), spec.condition_cap, seed)
                                     : spec.mixing;
  require_shape(d.mixing.rows() == spec.m && d.mixing.cols() == spec.n(), "mixing matrix shape");
  d.mixtures = mix(d.sources, d.mixing, spec.noise_std, seed).values();
  return d;
}

}  // namespace arflow
