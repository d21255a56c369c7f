#include "arflow/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "arflow/datagen.hpp"
#include "arflow/eval.hpp"
#include "arflow/io.hpp"
#include "arflow/trainer.hpp"

namespace arflow::cli {

namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
  CliError(int code, std::string category, const std::string& what)
      : std::runtime_error(what), code(code), category(std::move(category)) {}
  int code;
  std::string category;
};

[[noreturn]] void input_error(const std::string& what) { throw CliError(kInput, "input", what); }

struct RunConfig {
  // shared
  std::uint64_t seed = 1;
  std::string out = "run";
  // synthetic data
  std::size_t R = 512;
  std::string sources = "sinusoid:4,gaussian_ar:0.9,laplace_ar:0.3";
  std::size_t m = 3;
  std::string mixing;
  double condition_cap = 10.0;
  double noise_std = 0.0;
  // training
  std::size_t epochs = TrainConfig{}.epochs;
  double beta = TrainConfig{}.beta;
  double lr = TrainConfig{}.learning_rate;
  std::size_t n = 3;
  std::size_t H = TrainConfig{}.H;
  bool no_whiten = !TrainConfig{}.whiten;
  std::size_t hidden = 0;
  std::size_t monitor_every = TrainConfig{}.monitor_every;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string kl_scaling = "per_entry";
  std::string mixtures;
  std::string truth;
  bool no_truth = false;
  std::string resume;
  // evaluation
  std::string means;
  std::string params;
  double level = 0.95;
};

fs::path in_out(const RunConfig& rc, const std::string& explicit_path, const char* name) {
  return explicit_path.empty() ? fs::path(rc.out) / name : fs::path(explicit_path);
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) input_error(std::string(what) + " not found: " + p.string());
}

void prepare_out_dir(const RunConfig& rc) {
  std::error_code ec;
  fs::create_directories(rc.out, ec);
  const fs::path probe = fs::path(rc.out) / ".write_probe";
  std::ofstream os(probe);
  if (ec || !os) throw CliError(kOutput, "output", "output directory is not writable: " + rc.out);
  os.close();
  fs::remove(probe, ec);
}

io::CsvTable read_csv(const fs::path& p, const char* what) {
  require_file(p, what);
  try {
    return io::read_matrix_csv(p);
  } catch (const io::IoError& e) {
    input_error(e.what());
  }
}

SyntheticSpec synthetic_spec(const RunConfig& rc) {
  SyntheticSpec spec;
  spec.R = rc.R;
  try {
    spec.sources = parse_source_list(rc.sources);
  } catch (const std::invalid_argument& e) {
    throw CliError(kUsage, "usage", e.what());
  }
  spec.m = rc.m;
  spec.condition_cap = rc.condition_cap;
  spec.noise_std = rc.noise_std;
  if (!rc.mixing.empty()) {
    spec.mixing = read_csv(rc.mixing, "mixing matrix").values;
    spec.m = spec.mixing.rows();
  }
  return spec;
}

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig cfg;
  cfg.epochs = rc.epochs;
  cfg.learning_rate = rc.lr;
  cfg.beta = rc.beta;
  cfg.seed = rc.seed;
  cfg.H = rc.H;
  cfg.n = rc.n;
  cfg.hidden = rc.hidden;
  cfg.monitor_every = rc.monitor_every;
  cfg.adam_beta1 = rc.adam_beta1;
  cfg.adam_beta2 = rc.adam_beta2;
  cfg.adam_eps = rc.adam_eps;
  cfg.kl_scaling = rc.kl_scaling == "raw" ? KlScaling::raw : KlScaling::per_entry;
  cfg.whiten = !rc.no_whiten;
  return cfg;
}

int cmd_generate(const RunConfig& rc, std::ostream& out) {
  const SyntheticSpec spec = synthetic_spec(rc);
  prepare_out_dir(rc);
  SyntheticData data;
  try {
    data = generate(spec, rc.seed);
  } catch (const std::exception& e) {
    throw CliError(kUsage, "usage", e.what());
  }
  const fs::path dir(rc.out);
  io::write_matrix_csv(dir / "sources.csv", io::numbered("s", spec.n()), data.sources);
  io::write_matrix_csv(dir / "mixtures.csv", io::numbered("x", spec.m), data.mixtures);
  io::write_matrix_csv(dir / "mixing.csv", io::numbered("s", spec.n()), data.mixing);
  out << "generated R=" << spec.R << " n=" << spec.n() << " m=" << spec.m
      << " condition=" << io::format_double(condition_number(data.mixing)) << " -> " << rc.out
      << '\n';
  return kOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const fs::path mixtures_path = in_out(rc, rc.mixtures, "mixtures.csv");
  const io::CsvTable mixtures = read_csv(mixtures_path, "mixtures file");

  std::optional<Matrix> truth;
  if (!rc.no_truth) {
    const fs::path truth_path = in_out(rc, rc.truth, "sources.csv");
    if (!rc.truth.empty() || fs::exists(truth_path)) {
      truth = read_csv(truth_path, "ground-truth file").values;
      if (truth->cols() != rc.n) {
        input_error("ground truth has " + std::to_string(truth->cols()) + " columns but n = " +
                    std::to_string(rc.n));
      }
      if (truth->rows() != mixtures.values.rows()) input_error("ground truth and mixtures differ in length");
    }
  }

  std::optional<TrainState> resume;
  if (!rc.resume.empty()) {
    require_file(rc.resume, "snapshot");
    try {
      resume = io::snapshot_from_json(io::read_json(rc.resume));
    } catch (const io::IoError& e) {
      input_error(e.what());
    }
  } else if (rc.epochs == 0) {
    throw CliError(kUsage, "usage", "epochs must be at least 1 unless resuming");
  }

  TrainConfig cfg = train_config(rc);
  std::optional<MixtureSeries> series;
  try {
    series.emplace(mixtures.values);
  } catch (const std::invalid_argument& e) {
    input_error(e.what());
  }
  prepare_out_dir(rc);
  const fs::path dir(rc.out);

  std::ofstream trace_os(dir / "trace.csv", std::ios::binary | std::ios::trunc);
  if (!trace_os) throw CliError(kOutput, "output", "cannot write trace.csv");
  const auto header = io::trace_header(rc.n);
  for (std::size_t i = 0; i < header.size(); ++i) trace_os << (i ? "," : "") << header[i];
  trace_os << '\n';

  TrainState state;
  PosteriorState post;
  if (rc.epochs == 0) {
    state = std::move(*resume);
    if (state.dims.m != series->m() || state.dims.n != cfg.n) {
      input_error("snapshot dimensions do not match the data");
    }
    post = posterior(state, training_inputs(series->values(), cfg));
  } else {
    try {
      cfg.validate();
      TrainResult res = train(*series, cfg, truth, std::move(resume), [&](const TraceRow& row) {
        io::write_trace_row(trace_os, row);
        trace_os.flush();
      });
      state = std::move(res.state);
      post = std::move(res.posterior);
    } catch (const TrainingError& e) {
      throw CliError(kTraining, "training", e.what());
    } catch (const std::invalid_argument& e) {
      throw CliError(kUsage, "usage", e.what());
    }
  }

  io::write_snapshot(dir / "params.json", state, cfg);
  io::write_matrix_csv(dir / "posterior_means.csv", io::numbered("mu", cfg.n), post.M);
  out << "trained epochs=" << state.epochs_done;
  if (truth) {
    const CiReport rep = ci_report(post.M, post.log_q, *truth, rc.level);
    io::write_recovery_csv(dir / "recovery.csv", rep);
    out << " mean_abs_corr=" << io::format_double(rep.match.mean_abs_corr);
  }
  out << " -> " << rc.out << '\n';
  return kOk;
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out) {
  const io::CsvTable means = read_csv(in_out(rc, rc.means, "posterior_means.csv"), "posterior means");
  const io::CsvTable truth = read_csv(in_out(rc, rc.truth, "sources.csv"), "ground-truth file");
  const fs::path params_path = in_out(rc, rc.params, "params.json");
  require_file(params_path, "parameter snapshot");
  if (means.values.cols() != truth.values.cols()) {
    input_error("column-count mismatch: means have " + std::to_string(means.values.cols()) +
                " columns, truth has " + std::to_string(truth.values.cols()));
  }
  if (means.values.rows() != truth.values.rows()) input_error("row-count mismatch between means and truth");

  std::vector<double> log_q;
  try {
    log_q = io::read_json(params_path).at("posterior").at("log_q").get<std::vector<double>>();
  } catch (const std::exception& e) {
    input_error(std::string("cannot read posterior.log_q: ") + e.what());
  }
  if (log_q.size() != means.values.cols()) input_error("posterior.log_q length does not match the means");
  if (!(rc.level > 0.0 && rc.level < 1.0)) throw CliError(kUsage, "usage", "level must lie in (0,1)");

  CiReport rep;
  try {
    rep = ci_report(means.values, log_q, truth.values, rc.level);
  } catch (const std::invalid_argument& e) {
    input_error(e.what());
  }
  nlohmann::json j;
  std::vector<std::size_t> perm1;
  for (std::size_t p : rep.match.permutation) perm1.push_back(p + 1);
  j["permutation"] = perm1;
  j["signs"] = rep.match.signs;
  j["per_source_abs_corr"] = rep.match.per_source_abs_corr;
  j["mean_abs_corr"] = rep.match.mean_abs_corr;
  j["overall_max_corr"] = rep.match.overall_max_corr;
  j["level"] = rep.level;
  j["z"] = rep.z;
  j["coverage"] = rep.coverage;

  prepare_out_dir(rc);
  const fs::path report = fs::path(rc.out) / "report.json";
  std::ofstream os(report, std::ios::binary | std::ios::trunc);
  if (!os) throw CliError(kOutput, "output", "cannot write " + report.string());
  os << j.dump(1) << '\n';
  out << "mean_abs_corr=" << io::format_double(rep.match.mean_abs_corr) << " -> " << report.string()
      << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"AR-Flow VAE blind source separation"};
  app.set_config("--config", "", "key = value configuration file (flags override it)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  RunConfig rc;
  app.add_option("--seed", rc.seed, "seed for data generation, initialization and noise");
  app.add_option("--out", rc.out, "output directory");
  app.add_option("--R", rc.R, "series length")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
  app.add_option("--sources", rc.sources, "comma-separated kind:param list");
  app.add_option("--m", rc.m, "observation channels")->check(CLI::PositiveNumber);
  app.add_option("--mixing", rc.mixing, "CSV mixing matrix (m x n); random when omitted");
  app.add_option("--condition_cap", rc.condition_cap, "condition-number cap for random mixing");
  app.add_option("--noise_std", rc.noise_std, "observation noise standard deviation")->check(CLI::NonNegativeNumber);
  app.add_option("--epochs", rc.epochs, "training epochs");
  app.add_option("--beta", rc.beta, "KL weight")->check(CLI::NonNegativeNumber);
  app.add_option("--lr", rc.lr, "learning rate")->check(CLI::PositiveNumber);
  app.add_option("--n", rc.n, "latent sources")->check(CLI::Range(1, 8));
  app.add_option("--H", rc.H, "flow hidden width")->check(CLI::PositiveNumber);
  app.add_option("--hidden", rc.hidden, "encoder/decoder tanh layer width (0 = affine)");
  app.add_option("--monitor_every", rc.monitor_every, "trace row interval")->check(CLI::PositiveNumber);
  app.add_option("--adam_beta1", rc.adam_beta1, "first-moment decay");
  app.add_option("--adam_beta2", rc.adam_beta2, "second-moment decay");
  app.add_option("--adam_eps", rc.adam_eps, "optimizer epsilon");
  app.add_option("--kl_scaling", rc.kl_scaling, "per_entry (beta/(mR)) or raw (beta)")
      ->check(CLI::IsMember({"per_entry", "raw"}));
  app.add_option("--mixtures", rc.mixtures, "mixtures CSV (default <out>/mixtures.csv)");
  app.add_option("--truth", rc.truth, "ground-truth sources CSV (default <out>/sources.csv)");
  app.add_flag("--no_whiten", rc.no_whiten, "train on the raw mixtures instead of whitened ones");
  app.add_flag("--no_truth", rc.no_truth, "train without monitoring against ground truth");
  app.add_option("--resume", rc.resume, "parameter snapshot to continue from");
  app.add_option("--means", rc.means, "posterior means CSV (default <out>/posterior_means.csv)");
  app.add_option("--params", rc.params, "parameter snapshot (default <out>/params.json)");
  app.add_option("--level", rc.level, "credible-interval level");

  auto* gen = app.add_subcommand("generate", "write sources.csv, mixtures.csv, mixing.csv");
  auto* trn = app.add_subcommand("train", "fit the model; write trace.csv, params.json, recovery.csv");
  auto* evl = app.add_subcommand("evaluate", "score posterior means against ground truth");
  for (auto* sub : {gen, trn, evl}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << '\n';
    return kUsage;
  }

  try {
    if (*gen) return cmd_generate(rc, out);
    if (*trn) return cmd_train(rc, out);
    return cmd_evaluate(rc, out);
  } catch (const CliError& e) {
    err << "error: " << e.category << ": " << e.what() << '\n';
    return e.code;
  } catch (const io::IoError& e) {
    err << "error: output: " << e.what() << '\n';
    return kOutput;
  } catch (const std::exception& e) {
    err << "error: input: " << e.what() << '\n';
    return kInput;
  }
}

}  // namespace arflow::cli
