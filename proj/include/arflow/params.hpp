#pragma once

// Flat parameter storage for the whole model and typed views into it.
//
// The optimizer works on one contiguous vector; the model code reads it
// through views whose element type is either double (plain evaluation) or
// ad::Var (evaluation on a tape).

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace arflow {

/// Model dimensions. `hidden == 0` selects affine encoder/decoder maps;
/// a positive value inserts one tanh layer of that width in both.
struct Dims {
  std::size_t m = 3;       // observation channels
  std::size_t n = 3;       // latent sources
  std::size_t H = 8;       // flow hidden-state width
  std::size_t hidden = 0;  // encoder/decoder hidden width
};

inline constexpr double kFlowLogScaleBound = 0.8;

template <class T>
struct AffineView {
  std::span<const T> W;  // out x in, row-major
  std::span<const T> b;  // out
  std::size_t out = 0;
  std::size_t in = 0;

  std::span<const T> row(std::size_t i) const { return W.subspan(i * in, in); }
};

/// Affine map, or affine -> tanh -> affine when `hidden_layer` is set.
template <class T>
struct MapView {
  AffineView<T> first;
  AffineView<T> second;
  bool hidden_layer = false;

  std::size_t in() const { return first.in; }
  std::size_t out() const { return hidden_layer ? second.out : first.out; }
};

template <class T>
struct PriorView {
  T a{};
  T log_sigma{};
  T log_sigma0{};
  std::span<const T> W_h;    // H x H
  std::span<const T> W_eps;  // H
  std::span<const T> c_eps;  // H
  std::span<const T> w_b;    // H
  T c_b{};
  std::span<const T> w_alpha;  // H
  T c_alpha{};
  std::size_t H = 0;
  double kappa = kFlowLogScaleBound;

  std::span<const T> W_h_row(std::size_t i) const { return W_h.subspan(i * H, H); }
};

template <class T>
struct ModelView {
  MapView<T> encoder;
  MapView<T> decoder;
  std::span<const T> log_q;
  std::vector<PriorView<T>> priors;
};

/// A named block of the flat vector, used for snapshots and diagnostics.
struct ParamSection {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;  // 0 marks a scalar, 1 a vector
  std::size_t size() const { return cols == 0 ? 1 : rows * cols; }
};

class ParamLayout {
 public:
  explicit ParamLayout(const Dims& dims);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return size_; }
  std::size_t prior_block_size() const;
  std::size_t prior_offset(std::size_t j) const;
  std::size_t log_q_offset() const { return log_q_offset_; }

  const std::vector<ParamSection>& sections() const { return sections_; }
  const ParamSection& section(const std::string& name) const;

  template <class T>
  ModelView<T> view(std::span<const T> flat) const;

 private:
  template <class T>
  MapView<T> map_view(std::span<const T> flat, std::size_t offset, std::size_t in,
                      std::size_t out) const;

  std::size_t add_section(const std::string& name, std::size_t rows, std::size_t cols);

  Dims dims_;
  std::size_t size_ = 0;
  std::size_t encoder_offset_ = 0;
  std::size_t decoder_offset_ = 0;
  std::size_t log_q_offset_ = 0;
  std::size_t priors_offset_ = 0;
  std::vector<ParamSection> sections_;
};

struct InitConfig {
  double map_weight_std = 0.1;
  double flow_weight_std = 0.01;
  double log_q = -2.302585092994046;  // log(0.1)
  double a = 0.0;
  double log_sigma = 0.0;
  double log_sigma0 = 0.0;
};

/// Draws an initial parameter vector. Deterministic in `seed`.
std::vector<double> initial_params(const ParamLayout& layout, std::uint64_t seed,
                                   const InitConfig& init = {});

// ---------------------------------------------------------------------------

template <class T>
MapView<T> ParamLayout::map_view(std::span<const T> flat, std::size_t offset, std::size_t in,
                                 std::size_t out) const {
  MapView<T> v;
  if (dims_.hidden == 0) {
    v.first = {flat.subspan(offset, out * in), flat.subspan(offset + out * in, out), out, in};
    return v;
  }
  const std::size_t h = dims_.hidden;
  v.hidden_layer = true;
  v.first = {flat.subspan(offset, h * in), flat.subspan(offset + h * in, h), h, in};
  const std::size_t o2 = offset + h * in + h;
  v.second = {flat.subspan(o2, out * h), flat.subspan(o2 + out * h, out), out, h};
  return v;
}

template <class T>
ModelView<T> ParamLayout::view(std::span<const T> flat) const {
  if (flat.size() != size_) throw std::invalid_argument("parameter vector has wrong length");
  ModelView<T> v;
  v.encoder = map_view(flat, encoder_offset_, dims_.m, dims_.n);
  v.decoder = map_view(flat, decoder_offset_, dims_.n, dims_.m);
  v.log_q = flat.subspan(log_q_offset_, dims_.n);
  const std::size_t H = dims_.H;
  v.priors.reserve(dims_.n);
  for (std::size_t j = 0; j < dims_.n; ++j) {
    std::size_t o = prior_offset(j);
    PriorView<T> p;
    p.H = H;
    p.a = flat[o++];
    p.log_sigma = flat[o++];
    p.log_sigma0 = flat[o++];
    p.W_h = flat.subspan(o, H * H);
    o += H * H;
    p.W_eps = flat.subspan(o, H);
    o += H;
    p.c_eps = flat.subspan(o, H);
    o += H;
    p.w_b = flat.subspan(o, H);
    o += H;
    p.c_b = flat[o++];
    p.w_alpha = flat.subspan(o, H);
    o += H;
    p.c_alpha = flat[o++];
    v.priors.push_back(p);
  }
  return v;
}

}  // namespace arflow
