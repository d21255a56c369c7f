#include "arflow/trainer.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "arflow/datagen.hpp"
#include "arflow/eval.hpp"

namespace arflow {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  if (n < 1) throw std::invalid_argument("source count n must be at least 1");
  if (H < 1) throw std::invalid_argument("flow width H must be at least 1");
  if (monitor_every < 1) throw std::invalid_argument("monitor_every must be at least 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("moment decay rates must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  require_shape(params.size() == grads.size(), "adam: params vs grads");
  if (state.m.empty()) state.m.assign(params.size(), 0.0);
  if (state.v.empty()) state.v.assign(params.size(), 0.0);
  require_shape(state.m.size() == params.size() && state.v.size() == params.size(),
                "adam: state vs params");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

TrainState initial_state(const TrainConfig& cfg, std::size_t m) {
  TrainState st;
  st.dims = Dims{m, cfg.n, cfg.H, cfg.hidden};
  st.params = initial_params(ParamLayout(st.dims), cfg.seed, cfg.init);
  return st;
}

Matrix epoch_noise(std::uint64_t seed, std::size_t epoch, std::size_t R, std::size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    0xE90Cu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noise(R, n);
  for (double& v : noise.data()) v = normal(rng);
  return noise;
}

LossAndGradient loss_and_gradient(const ParamLayout& layout, std::span<const double> params,
                                  const Matrix& X, const Matrix& noise, double beta,
                                  KlScaling scaling, ad::Tape& tape) {
  tape.clear();
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (double p : params) leaves.push_back(tape.lift(p));
  const ModelView<ad::Var> model = layout.view(std::span<const ad::Var>(leaves));
  const LossBreakdown<ad::Var> l = loss(X, model, beta, noise, scaling);

  LossAndGradient out;
  out.loss.rec = l.rec.value();
  out.loss.log_q = l.log_q.value();
  out.loss.log_p = l.log_p.value();
  out.loss.kl_gap = l.kl_gap.value();
  out.loss.total = l.total.value();
  out.loss.beta = l.beta;
  out.loss.normalizer = l.normalizer;
  out.clamp_events = tape.clamp_events();
  if (std::isfinite(out.loss.total)) {
    const ad::Gradients g = tape.backward(l.total);
    const auto lv = g.leaf_values();
    out.grad.assign(lv.begin(), lv.begin() + static_cast<std::ptrdiff_t>(params.size()));
  }
  return out;
}

PosteriorState posterior(const TrainState& state, const Matrix& X) {
  const ParamLayout layout(state.dims);
  const ModelView<double> model = layout.view(std::span<const double>(state.params));
  PosteriorState post;
  post.M = encode(X, model.encoder);
  post.log_q.assign(model.log_q.begin(), model.log_q.end());
  return post;
}

namespace {

void check_finite(const LossAndGradient& lg, std::size_t epoch) {
  const std::pair<const char*, double> parts[] = {
      {"rec", lg.loss.rec}, {"log_q", lg.loss.log_q}, {"log_p", lg.loss.log_p},
      {"total", lg.loss.total}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) {
      throw TrainingError(epoch, name,
                          "non-finite loss at epoch " + std::to_string(epoch) + " (component " +
                              name + " = " + std::to_string(value) + ")");
    }
  }
  for (double g : lg.grad) {
    if (!std::isfinite(g)) {
      throw TrainingError(epoch, "gradient",
                          "non-finite gradient at epoch " + std::to_string(epoch));
    }
  }
}

TraceRow monitor(const TrainState& state, const Matrix& X, const std::optional<Matrix>& truth,
                 const LossBreakdown<double>& l) {
  const ParamLayout layout(state.dims);
  const ModelView<double> model = layout.view(std::span<const double>(state.params));
  TraceRow row;
  row.epoch = state.epochs_done;
  row.loss = l.total;
  row.rec = l.rec;
  row.kl_gap = l.kl_gap;
  const std::size_t n = state.dims.n;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& p = model.priors[j];
    row.q.push_back(std::exp(model.log_q[j]));
    row.a.push_back(p.a);
    row.sigma.push_back(std::exp(p.log_sigma));
    row.sigma0.push_back(std::exp(p.log_sigma0));
  }
  row.corr.assign(n, std::numeric_limits<double>::quiet_NaN());
  row.max_corr = std::numeric_limits<double>::quiet_NaN();
  if (truth) {
    try {
      const Matrix M = encode(X, model.encoder);
      const MatchReport rep = match_sources(M, *truth);
      row.corr = rep.per_source_abs_corr;
      row.max_corr = rep.overall_max_corr;
    } catch (const std::invalid_argument&) {
      // Degenerate (constant) mean column: correlations stay undefined.
    }
  }
  return row;
}

}  // namespace

Matrix training_inputs(const Matrix& mixtures, const TrainConfig& cfg) {
  return cfg.whiten ? whiten_columns(mixtures) : mixtures;
}

TrainResult train(const MixtureSeries& series, const TrainConfig& cfg,
                  const std::optional<Matrix>& truth, std::optional<TrainState> resume,
                  const TraceSink& sink) {
  cfg.validate();
  const Matrix X = training_inputs(series.values(), cfg);
  if (truth) {
    require_shape(truth->rows() == X.rows() && truth->cols() == cfg.n,
                  "ground truth must be R x n");
  }

  TrainResult res;
  res.state = resume ? std::move(*resume) : initial_state(cfg, series.m());
  TrainState& st = res.state;
  const Dims expected{series.m(), cfg.n, cfg.H, cfg.hidden};
  if (st.dims.m != expected.m || st.dims.n != expected.n || st.dims.H != expected.H ||
      st.dims.hidden != expected.hidden) {
    throw std::invalid_argument("resumed state dimensions do not match the configuration");
  }
  const ParamLayout layout(st.dims);
  require_shape(st.params.size() == layout.size(), "resumed parameter count");

  ad::Tape tape;
  const std::size_t end = st.epochs_done + cfg.epochs;
  while (st.epochs_done < end) {
    const std::size_t epoch = st.epochs_done;
    const Matrix noise = epoch_noise(cfg.seed, epoch, X.rows(), cfg.n);
    const LossAndGradient lg =
        loss_and_gradient(layout, st.params, X, noise, cfg.beta, cfg.kl_scaling, tape);
    check_finite(lg, epoch + 1);
    adam_step(st.params, lg.grad, st.adam, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
              cfg.adam_eps);
    ++st.epochs_done;

    const bool last = st.epochs_done == end;
    if (st.epochs_done % cfg.monitor_every == 0 || last) {
      TraceRow row = monitor(st, X, truth, lg.loss);
      if (sink) sink(row);
      res.trace.rows.push_back(std::move(row));
    }
  }
  res.posterior = posterior(st, X);
  return res;
}

}  // namespace arflow
