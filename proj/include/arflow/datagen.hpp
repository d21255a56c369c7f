#pragma once

// Synthetic ground-truth sources with distinct ordered structure, linear
// mixing, and Z-score normalization.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "arflow/matrix.hpp"
#include "arflow/model.hpp"

namespace arflow {

enum class SourceKind { sinusoid, gaussian_ar, laplace_ar, square };

/// One source process. `param` is a frequency (cycles over R) for the
/// periodic kinds and an AR coefficient for the AR kinds.
struct SourceSpec {
  SourceKind kind = SourceKind::sinusoid;
  double param = 0.0;
};

/// Parses "sinusoid:4", "gaussian_ar:0.9", "laplace_ar:0.3", "square:2".
SourceSpec parse_source_spec(const std::string& text);
std::string to_string(const SourceSpec& spec);
/// Comma-separated list of source specs.
std::vector<SourceSpec> parse_source_list(const std::string& text);

struct SyntheticSpec {
  std::size_t R = 512;
  std::vector<SourceSpec> sources = {{SourceKind::sinusoid, 4.0},
                                     {SourceKind::gaussian_ar, 0.9},
                                     {SourceKind::laplace_ar, 0.3}};
  std::size_t m = 3;            // observation channels
  Matrix mixing;                // m x n; empty means draw at random
  double condition_cap = 10.0;  // for random draws
  double noise_std = 0.0;

  std::size_t n() const { return sources.size(); }
};

struct SyntheticData {
  Matrix sources;  // R x n, Z-scored columns
  Matrix mixing;   // m x n
  Matrix mixtures; // R x m
};

/// Column j follows spec.sources[j]; every column is Z-scored.
Matrix gen_sources(const SyntheticSpec& spec, std::uint64_t seed);

/// Gaussian m x n matrix redrawn until its 2-norm condition number is at
/// most `condition_cap`.
Matrix random_mixing(std::size_t m, std::size_t n, double condition_cap, std::uint64_t seed);

double condition_number(const Matrix& A);

/// x_r = A s_r + noise_std * eta_r.
MixtureSeries mix(const Matrix& sources, const Matrix& A, double noise_std, std::uint64_t seed);

/// Population-convention standardization (divide by R).
std::vector<double> zscore(std::span<const double> v);
Matrix zscore_columns(const Matrix& X);

/// Symmetric (ZCA) whitening: centers the columns and maps their covariance
/// to the identity. Directions with negligible variance are zeroed rather
/// than inverted, so rank-deficient inputs are accepted.
Matrix whiten_columns(const Matrix& X);

SyntheticData generate(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace arflow
