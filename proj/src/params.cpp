#include "arflow/params.hpp"

#include <random>
#include <stdexcept>

namespace arflow {

ParamLayout::ParamLayout(const Dims& dims) : dims_(dims) {
  if (dims.m == 0 || dims.n == 0 || dims.H == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  auto add_map = [&](const std::string& name, std::size_t in, std::size_t out) {
    std::size_t start = size_;
    if (dims_.hidden == 0) {
      add_section(name + ".W", out, in);
      add_section(name + ".b", out, 1);
    } else {
      add_section(name + ".W1", dims_.hidden, in);
      add_section(name + ".b1", dims_.hidden, 1);
      add_section(name + ".W2", out, dims_.hidden);
      add_section(name + ".b2", out, 1);
    }
    return start;
  };
  encoder_offset_ = add_map("encoder", dims.m, dims.n);
  decoder_offset_ = add_map("decoder", dims.n, dims.m);
  log_q_offset_ = add_section("posterior.log_q", dims.n, 1);
  priors_offset_ = size_;
  const std::size_t H = dims.H;
  for (std::size_t j = 0; j < dims.n; ++j) {
    const std::string p = "prior" + std::to_string(j) + ".";
    add_section(p + "a", 1, 0);
    add_section(p + "log_sigma", 1, 0);
    add_section(p + "log_sigma0", 1, 0);
    add_section(p + "W_h", H, H);
    add_section(p + "W_eps", H, 1);
    add_section(p + "c_eps", H, 1);
    add_section(p + "w_b", H, 1);
    add_section(p + "c_b", 1, 0);
    add_section(p + "w_alpha", H, 1);
    add_section(p + "c_alpha", 1, 0);
  }
}

std::size_t ParamLayout::add_section(const std::string& name, std::size_t rows, std::size_t cols) {
  ParamSection s{name, size_, rows, cols};
  size_ += s.size();
  sections_.push_back(s);
  return s.offset;
}

std::size_t ParamLayout::prior_block_size() const {
  const std::size_t H = dims_.H;
  return 5 + H * H + 4 * H;
}

std::size_t ParamLayout::prior_offset(std::size_t j) const {
  return priors_offset_ + j * prior_block_size();
}

const ParamSection& ParamLayout::section(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("unknown parameter section '" + name + "'");
}

std::vector<double> initial_params(const ParamLayout& layout, std::uint64_t seed,
                                   const InitConfig& init) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x1A17u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> flat(layout.size(), 0.0);
  auto fill = [&](const std::string& name, double std_dev) {
    const auto& s = layout.section(name);
    for (std::size_t i = 0; i < s.size(); ++i) flat[s.offset + i] = std_dev * normal(rng);
  };
  auto set = [&](const std::string& name, double value) {
    const auto& s = layout.section(name);
    for (std::size_t i = 0; i < s.size(); ++i) flat[s.offset + i] = value;
  };

  for (const auto& s : layout.sections()) {
    const std::string& name = s.name;
    const auto dot = name.rfind('.');
    const std::string field = name.substr(dot + 1);
    if (name.starts_with("encoder.") || name.starts_with("decoder.")) {
      if (field[0] == 'W') fill(name, init.map_weight_std);
    } else if (name == "posterior.log_q") {
      set(name, init.log_q);
    } else if (field == "a") {
      set(name, init.a);
    } else if (field == "log_sigma") {
      set(name, init.log_sigma);
    } else if (field == "log_sigma0") {
      set(name, init.log_sigma0);
    } else if (field == "W_h" || field == "W_eps" || field == "w_b" || field == "w_alpha") {
      fill(name, init.flow_weight_std);
    }
  }
  return flat;
}

}  // namespace arflow
