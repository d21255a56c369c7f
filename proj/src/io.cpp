#include "arflow/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace arflow::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw IoError("cannot format number");
  return std::string(buf.data(), ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
  if (s == "nan") return NAN;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

void write_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << fields[i];
  }
  os << '\n';
}

}  // namespace

std::vector<std::string> numbered(const std::string& prefix, std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void write_matrix_csv(const fs::path& path, const std::vector<std::string>& header,
                      const Matrix& values) {
  require_shape(header.size() == values.cols(), "csv header width");
  auto os = open_out(path);
  write_row(os, header);
  std::vector<std::string> fields(values.cols());
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) fields[c] = format_double(values(r, c));
    write_row(os, fields);
  }
  if (!os) throw IoError("write failed for " + path.string());
}

CsvTable read_matrix_csv(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != t.header.size()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.header.size()) + " fields, got " +
                    std::to_string(fields.size()));
    }
    for (const auto& f : fields) data.push_back(parse_double(f, path, lineno));
    ++rows;
  }
  t.values = Matrix(rows, t.header.size());
  std::copy(data.begin(), data.end(), t.values.data().begin());
  return t;
}

std::vector<std::string> trace_header(std::size_t n) {
  std::vector<std::string> h = {"epoch", "loss", "rec", "kl_gap"};
  for (std::size_t j = 1; j <= n; ++j) {
    const std::string s = std::to_string(j);
    for (const char* name : {"q_", "a_", "sigma_", "sigma0_", "corr_"}) h.push_back(name + s);
  }
  h.push_back("max_corr");
  return h;
}

void write_trace_row(std::ostream& os, const TraceRow& row) {
  std::vector<std::string> f = {std::to_string(row.epoch), format_double(row.loss),
                                format_double(row.rec), format_double(row.kl_gap)};
  for (std::size_t j = 0; j < row.q.size(); ++j) {
    f.push_back(format_double(row.q[j]));
    f.push_back(format_double(row.a[j]));
    f.push_back(format_double(row.sigma[j]));
    f.push_back(format_double(row.sigma0[j]));
    f.push_back(format_double(row.corr[j]));
  }
  f.push_back(format_double(row.max_corr));
  write_row(os, f);
}

void write_recovery_csv(const fs::path& path, const CiReport& rep) {
  const std::size_t n = rep.mean.cols();
  std::vector<std::string> header = {"r"};
  for (std::size_t j = 1; j <= n; ++j) {
    const std::string s = std::to_string(j);
    for (const char* name : {"truth_", "mean_", "lower_", "upper_"}) header.push_back(name + s);
  }
  auto os = open_out(path);
  write_row(os, header);
  std::vector<std::string> f;
  for (std::size_t r = 0; r < rep.mean.rows(); ++r) {
    f.assign(1, std::to_string(r + 1));
    for (std::size_t j = 0; j < n; ++j) {
      f.push_back(format_double(rep.truth(r, j)));
      f.push_back(format_double(rep.mean(r, j)));
      f.push_back(format_double(rep.lower(r, j)));
      f.push_back(format_double(rep.upper(r, j)));
    }
    write_row(os, f);
  }
  if (!os) throw IoError("write failed for " + path.string());
}

namespace {

json section_to_json(const ParamSection& s, std::span<const double> flat) {
  if (s.cols == 0) return flat[s.offset];
  if (s.cols == 1) return std::vector<double>(flat.begin() + s.offset, flat.begin() + s.offset + s.rows);
  json rows = json::array();
  for (std::size_t r = 0; r < s.rows; ++r) {
    const auto first = flat.begin() + static_cast<std::ptrdiff_t>(s.offset + r * s.cols);
    rows.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(s.cols)));
  }
  return rows;
}

void section_from_json(const ParamSection& s, const json& j, std::span<double> flat) {
  auto fail = [&] { throw IoError("snapshot field '" + s.name + "' has the wrong shape"); };
  if (s.cols == 0) {
    if (!j.is_number()) fail();
    flat[s.offset] = j.get<double>();
    return;
  }
  if (!j.is_array() || j.size() != s.rows) fail();
  for (std::size_t r = 0; r < s.rows; ++r) {
    if (s.cols == 1) {
      flat[s.offset + r] = j[r].get<double>();
      continue;
    }
    if (!j[r].is_array() || j[r].size() != s.cols) fail();
    for (std::size_t c = 0; c < s.cols; ++c) flat[s.offset + r * s.cols + c] = j[r][c].get<double>();
  }
}

}  // namespace

json snapshot_to_json(const TrainState& state, const TrainConfig& cfg) {
  const ParamLayout layout(state.dims);
  json j;
  j["format"] = "arflow-vae-snapshot";
  j["version"] = 1;
  j["dims"] = {{"m", state.dims.m}, {"n", state.dims.n}, {"H", state.dims.H},
               {"hidden", state.dims.hidden}};
  json params = json::object();
  for (const auto& s : layout.sections()) params[s.name] = section_to_json(s, state.params);
  j["params"] = std::move(params);
  // Convenience copy for consumers that only need the posterior variances.
  j["posterior"] = {{"log_q", section_to_json(layout.section("posterior.log_q"), state.params)}};
  j["optimizer"] = {{"step", state.adam.step}, {"m", state.adam.m}, {"v", state.adam.v}};
  j["training"] = {{"epochs_done", state.epochs_done},
                   {"seed", cfg.seed},
                   {"beta", cfg.beta},
                   {"learning_rate", cfg.learning_rate},
                   {"kl_scaling", cfg.kl_scaling == KlScaling::per_entry ? "per_entry" : "raw"},
                   {"whiten", cfg.whiten}};
  return j;
}

TrainState snapshot_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "arflow-vae-snapshot") {
      throw IoError("not a parameter snapshot");
    }
    TrainState st;
    const json& d = j.at("dims");
    st.dims = Dims{d.at("m").get<std::size_t>(), d.at("n").get<std::size_t>(),
                   d.at("H").get<std::size_t>(), d.at("hidden").get<std::size_t>()};
    const ParamLayout layout(st.dims);
    st.params.assign(layout.size(), 0.0);
    const json& params = j.at("params");
    if (params.size() != layout.sections().size()) throw IoError("snapshot has unexpected fields");
    for (const auto& s : layout.sections()) section_from_json(s, params.at(s.name), st.params);
    const json& opt = j.at("optimizer");
    st.adam.step = opt.at("step").get<std::uint64_t>();
    st.adam.m = opt.at("m").get<std::vector<double>>();
    st.adam.v = opt.at("v").get<std::vector<double>>();
    if ((!st.adam.m.empty() && st.adam.m.size() != layout.size()) ||
        st.adam.m.size() != st.adam.v.size()) {
      throw IoError("snapshot optimizer state has the wrong length");
    }
    st.epochs_done = j.at("training").at("epochs_done").get<std::size_t>();
    return st;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed snapshot: ") + e.what());
  }
}

void write_snapshot(const fs::path& path, const TrainState& state, const TrainConfig& cfg) {
  auto os = open_out(path);
  os << snapshot_to_json(state, cfg).dump(1) << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace arflow::io
