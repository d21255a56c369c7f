#pragma once

// Full-batch training loop: encode, one reparameterized sample, decode,
// exact log-densities, normalized negative ELBO, adaptive-moment update.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arflow/autodiff.hpp"
#include "arflow/matrix.hpp"
#include "arflow/model.hpp"
#include "arflow/objective.hpp"
#include "arflow/params.hpp"

namespace arflow {

struct TrainConfig {
  std::size_t epochs = 5000;
  double learning_rate = 1e-2;
  double beta = 0.3;
  std::uint64_t seed = 1;
  std::size_t H = 4;
  std::size_t n = 3;
  std::size_t hidden = 0;
  std::size_t monitor_every = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  KlScaling kl_scaling = KlScaling::per_entry;
  // Whiten the mixtures before training. The factorized posterior favors an
  // orthogonal unmixing, which whitening makes correct.
  bool whiten = true;
  InitConfig init;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// Bias-corrected adaptive-moment update, applied elementwise in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps);

struct TraceRow {
  std::size_t epoch = 0;  // 1-based count of completed updates
  double loss = 0.0;
  double rec = 0.0;
  double kl_gap = 0.0;
  std::vector<double> q;
  std::vector<double> a;
  std::vector<double> sigma;
  std::vector<double> sigma0;
  std::vector<double> corr;  // NaN without ground truth
  double max_corr = 0.0;     // NaN without ground truth
};

struct TrainTrace {
  std::vector<TraceRow> rows;
};

using TraceSink = std::function<void(const TraceRow&)>;

struct TrainState {
  Dims dims;
  std::vector<double> params;
  AdamState adam;
  std::size_t epochs_done = 0;
};

struct PosteriorState {
  Matrix M;                   // R x n posterior means
  std::vector<double> log_q;  // per-source log variance
};

struct TrainResult {
  TrainState state;
  PosteriorState posterior;
  TrainTrace trace;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, std::string component, const std::string& what)
      : std::runtime_error(what), epoch_(epoch), component_(std::move(component)) {}
  std::size_t epoch() const { return epoch_; }
  const std::string& component() const { return component_; }

 private:
  std::size_t epoch_;
  std::string component_;
};

TrainState initial_state(const TrainConfig& cfg, std::size_t m);

/// Standard-normal reparameterization draws for one epoch; a pure function
/// of (seed, epoch).
Matrix epoch_noise(std::uint64_t seed, std::size_t epoch, std::size_t R, std::size_t n);

struct LossAndGradient {
  LossBreakdown<double> loss;
  std::vector<double> grad;
  std::size_t clamp_events = 0;
};

/// Evaluates the objective on `tape` (cleared first) and backpropagates.
LossAndGradient loss_and_gradient(const ParamLayout& layout, std::span<const double> params,
                                  const Matrix& X, const Matrix& noise, double beta,
                                  KlScaling scaling, ad::Tape& tape);

/// The matrix the model actually sees: the mixtures, whitened when configured.
Matrix training_inputs(const Matrix& mixtures, const TrainConfig& cfg);

/// Encoder means and log-variances; X must already be in the training frame.
PosteriorState posterior(const TrainState& state, const Matrix& X);

/// Runs `cfg.epochs` updates, starting from `resume` when given. Monitoring
/// against `truth` is read-only.
TrainResult train(const MixtureSeries& X, const TrainConfig& cfg,
                  const std::optional<Matrix>& truth = std::nullopt,
                  std::optional<TrainState> resume = std::nullopt, const TraceSink& sink = {});

}  // namespace arflow
