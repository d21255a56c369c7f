#pragma once

// Overload set that lets model code be written once and evaluated either on
// plain doubles or on an autodiff tape.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include "arflow/autodiff.hpp"

namespace arflow::num {

inline constexpr double kExpCap = 30.0;

inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double square(double x) { return x * x; }
inline double exp_clamped(double x, double cap = kExpCap) { return std::exp(std::min(x, cap)); }
inline double affine(std::span<const double> w, std::span<const double> x, double bias) {
  double acc = bias;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * x[i];
  return acc;
}
inline double sum(std::span<const double> terms) {
  double acc = 0.0;
  for (double t : terms) acc += t;
  return acc;
}
inline double value(double x) { return x; }

inline ad::Var exp(const ad::Var& x) { return ad::exp(x); }
inline ad::Var log(const ad::Var& x) { return ad::log(x); }
inline ad::Var tanh(const ad::Var& x) { return ad::tanh(x); }
inline ad::Var sqrt(const ad::Var& x) { return ad::sqrt(x); }
inline ad::Var square(const ad::Var& x) { return ad::square(x); }
inline ad::Var exp_clamped(const ad::Var& x, double cap = kExpCap) {
  return ad::exp_clamped(x, cap);
}
inline ad::Var affine(std::span<const ad::Var> w, std::span<const ad::Var> x, const ad::Var& bias) {
  return ad::affine(w, x, bias);
}
inline ad::Var affine(std::span<const ad::Var> w, std::span<const double> x, const ad::Var& bias) {
  return ad::affine(w, x, bias);
}
inline ad::Var sum(std::span<const ad::Var> terms) { return ad::sum(terms); }
inline double value(const ad::Var& x) { return x.value(); }

}  // namespace arflow::num
