#include "oscar/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace oscar {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kTimeConvention = "noise0-data1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// Shortest round-trip formatting so reruns are byte-identical.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_states(std::ostream& os, std::size_t step, const Matrix& states) {
  for (std::size_t i = 0; i < states.rows; ++i) {
    os << step << ',' << i;
    for (std::size_t j = 0; j < states.cols; ++j) os << ',' << fmt(states(i, j));
    os << '\n';
  }
}

std::string csv_header(std::size_t dim) {
  std::string h = "step,particle";
  for (std::size_t j = 0; j < dim; ++j) h += ",x" + std::to_string(j);
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const MlpVelocity& model,
                     std::uint64_t train_seed) {
  json doc;
  doc["version"] = 1;
  doc["time_convention"] = kTimeConvention;
  doc["state_dim"] = model.state_dim;
  doc["cond_dim"] = model.cond_dim;
  doc["seed"] = train_seed;
  json dims = json::array(), weights = json::array(), biases = json::array();
  for (std::size_t l = 0; l < model.layers(); ++l) {
    dims.push_back({model.weights[l].rows, model.weights[l].cols});
    weights.push_back(model.weights[l].data);  // row-major
    biases.push_back(model.biases[l]);
  }
  doc["layer_dims"] = dims;
  doc["weights"] = weights;
  doc["biases"] = biases;
  write_text_file(path, doc.dump(2) + "\n");
}

MlpVelocity load_checkpoint(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("checkpoint " + path + ": " + e.what());
  }
  try {
    if (doc.at("time_convention").get<std::string>() != kTimeConvention)
      throw SchemaError("checkpoint " + path + ": unexpected time convention");
    MlpVelocity m;
    m.state_dim = doc.at("state_dim").get<std::size_t>();
    m.cond_dim = doc.at("cond_dim").get<std::size_t>();
    const auto& dims = doc.at("layer_dims");
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    for (std::size_t l = 0; l < dims.size(); ++l) {
      const std::size_t rows = dims.at(l).at(0).get<std::size_t>();
      const std::size_t cols = dims.at(l).at(1).get<std::size_t>();
      Matrix W(rows, cols);
      W.data = weights.at(l).get<Vec>();
      if (W.data.size() != rows * cols)
        throw SchemaError("checkpoint " + path + ": weight size mismatch");
      m.weights.push_back(std::move(W));
      Vec b = biases.at(l).get<Vec>();
      if (b.size() != rows)
        throw SchemaError("checkpoint " + path + ": bias size mismatch");
      m.biases.push_back(std::move(b));
    }
    if (m.layers() == 0 || m.weights.front().cols != m.input_dim())
      throw SchemaError("checkpoint " + path + ": inconsistent layer dimensions");
    return m;
  } catch (const json::exception& e) {
    throw SchemaError("checkpoint " + path + ": " + e.what());
  }
}

void write_trace_jsonl(const std::string& path, const RunTrace& trace,
                       std::uint64_t cfg_hash) {
  std::ostringstream os;
  json meta;
  meta["config_hash"] = hex64(cfg_hash);
  meta["seed"] = trace.seed;
  meta["method"] = trace.method;
  meta["particles"] = trace.particles;
  meta["dim"] = trace.dim;
  meta["steps"] = trace.records.empty() ? 0 : trace.records.size() - 1;
  meta["time_convention"] = kTimeConvention;
  os << meta.dump() << '\n';
  for (const auto& r : trace.records) {
    json rec;
    rec["step"] = r.step;
    rec["t"] = r.t;
    rec["energy"] = r.energy;
    rec["log_volume"] = r.log_volume;
    rec["eps_tr"] = r.eps_tr;
    rec["max_orth_residual"] = r.max_orth_residual;
    rec["max_noise_residual"] = r.max_noise_residual;
    rec["max_control_frac"] = r.max_control_frac;
    rec["mean_alignment"] = r.mean_alignment;
    rec["skipped"] = r.skipped;
    rec["state_checksum"] = hex64(r.state_checksum);
    os << rec.dump() << '\n';
  }
  write_text_file(path, os.str());
}

void write_samples_csv(const std::string& path, const RunTrace& trace,
                       std::uint64_t cfg_hash) {
  std::ostringstream os;
  os << "# config_hash=" << hex64(cfg_hash) << " seed=" << trace.seed
     << " method=" << trace.method << '\n';
  os << csv_header(trace.dim) << '\n';
  append_states(os, trace.records.empty() ? 0 : trace.records.size() - 1,
                trace.final_states);
  write_text_file(path, os.str());
}

void write_snapshots_csv(const std::string& path, const RunTrace& trace,
                         std::uint64_t cfg_hash) {
  std::ostringstream os;
  os << "# config_hash=" << hex64(cfg_hash) << " seed=" << trace.seed
     << " method=" << trace.method << '\n';
  os << csv_header(trace.dim) << '\n';
  for (std::size_t s = 0; s < trace.snapshot_steps.size(); ++s)
    append_states(os, trace.snapshot_steps[s], trace.snapshots[s]);
  write_text_file(path, os.str());
}

const Matrix& SamplesFile::last_step() const {
  if (by_step.empty()) throw SchemaError("sample file holds no rows");
  return by_step.rbegin()->second;
}

SamplesFile read_samples_csv(const std::string& path) {
  std::istringstream is(read_text_file(path));
  SamplesFile out;
  std::string line;
  bool header_seen = false;
  std::size_t dim = 0;
  std::map<std::size_t, std::vector<Vec>> rows;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "config_hash") out.cfg_hash = std::stoull(val, nullptr, 16);
        if (key == "seed") out.seed = std::stoull(val);
        if (key == "method") out.method = val;
      }
      continue;
    }
    if (!header_seen) {
      if (line.rfind("step,particle", 0) != 0)
        throw SchemaError(path + ":" + std::to_string(lineno) +
                          ": expected header 'step,particle,x0...'");
      dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
      if (dim == 0)
        throw SchemaError(path + ": header names no coordinate columns");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    Vec values;
    while (std::getline(row, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw SchemaError(path + ":" + std::to_string(lineno) +
                          ": non-numeric cell '" + cell + "'");
      }
    }
    if (values.size() != dim + 2)
      throw SchemaError(path + ":" + std::to_string(lineno) +
                        ": expected " + std::to_string(dim + 2) + " cells");
    const auto step = static_cast<std::size_t>(values[0]);
    rows[step].emplace_back(values.begin() + 2, values.end());
  }
  if (!header_seen || rows.empty())
    throw SchemaError(path + ": no sample rows");
  for (auto& [step, rs] : rows) {
    Matrix m(rs.size(), dim);
    for (std::size_t i = 0; i < rs.size(); ++i) m.set_row(i, rs[i]);
    out.by_step.emplace(step, std::move(m));
  }
  return out;
}

void write_loss_csv(const std::string& path, const Vec& loss,
                    std::uint64_t cfg_hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "# config_hash=" << hex64(cfg_hash) << " seed=" << seed << '\n';
  os << "step,loss\n";
  for (std::size_t i = 0; i < loss.size(); ++i)
    os << i << ',' << fmt(loss[i]) << '\n';
  write_text_file(path, os.str());
}

namespace {

json metric_json(const MetricReport& rep) {
  json doc;
  doc["vendi"] = rep.vendi.score;
  doc["bandwidth_used"] = rep.vendi.bandwidth_used;
  doc["entropy_norm"] = rep.entropy_norm;
  json cov = json::object();
  for (const auto& [tau, frac] : rep.coverage) cov[fmt(tau)] = frac;
  doc["coverage"] = cov;
  json pr = json::array();
  for (const auto& p : rep.pr)
    pr.push_back({{"k", p.k}, {"precision", p.precision}, {"recall", p.recall}});
  doc["precision_recall"] = pr;
  return doc;
}

}  // namespace

void write_metric_json(const std::string& path, const MetricReport& rep,
                       std::uint64_t cfg_hash, std::uint64_t seed,
                       const std::string& method) {
  json doc;
  doc["config_hash"] = hex64(cfg_hash);
  doc["seed"] = seed;
  doc["method"] = method;
  doc.update(metric_json(rep));
  write_text_file(path, doc.dump(2) + "\n");
}

std::string metric_csv_header(const MetricsConfig& mc) {
  std::string h = "label,config_hash,seed,vendi,bandwidth,entropy_norm";
  for (double tau : mc.taus) h += ",coverage@" + fmt(tau);
  for (std::size_t k : mc.ks) {
    h += ",precision@" + std::to_string(k);
    h += ",recall@" + std::to_string(k);
  }
  return h;
}

std::string metric_csv_row(const std::string& label, const MetricReport& rep,
                           std::uint64_t cfg_hash, std::uint64_t seed,
                           const MetricsConfig& mc) {
  std::ostringstream os;
  os << label << ',' << hex64(cfg_hash) << ',' << seed << ','
     << fmt(rep.vendi.score) << ',' << fmt(rep.vendi.bandwidth_used) << ','
     << fmt(rep.entropy_norm);
  for (double tau : mc.taus) {
    const auto it = rep.coverage.find(tau);
    os << ',' << (it == rep.coverage.end() ? "nan" : fmt(it->second));
  }
  for (std::size_t k : mc.ks) {
    const PrecisionRecall* found = nullptr;
    for (const auto& p : rep.pr)
      if (p.k == k) found = &p;
    os << ',' << (found ? fmt(found->precision) : "nan") << ','
       << (found ? fmt(found->recall) : "nan");
  }
  return os.str();
}

namespace {

json check_json(const CheckResult& c) {
  return {{"name", c.name},
          {"pass", c.pass},
          {"stat", c.stat},
          {"tolerance", c.tolerance},
          {"detail", c.detail}};
}

}  // namespace

void write_theory_json(const std::string& path, const TheoryReport& rep,
                       std::uint64_t cfg_hash) {
  json doc;
  doc["config_hash"] = hex64(cfg_hash);
  doc["all_pass"] = rep.all_pass();
  doc["checks"] = json::array({check_json(rep.volume_identity),
                               check_json(rep.pullback),
                               check_json(rep.orthogonality),
                               check_json(rep.reduction),
                               check_json(rep.descent_strict),
                               check_json(rep.descent_late),
                               check_json(rep.deviation.result)});
  json dev;
  dev["budgets"] = rep.deviation.budgets;
  dev["mean_dev"] = rep.deviation.mean_dev;
  dev["stderr_dev"] = rep.deviation.stderr_dev;
  dev["slope_budget"] = rep.deviation.slope_budget;
  dev["slope_halfwidth"] = rep.deviation.slope_halfwidth;
  dev["ratio_double_budget"] = rep.deviation.ratio_double_budget;
  dev["ratio_half_dt"] = rep.deviation.ratio_half_dt;
  dev["ratio_half_dt_stderr"] = rep.deviation.ratio_half_dt_stderr;
  doc["deviation_detail"] = dev;
  doc["curvature_trace_estimate"] = rep.curvature_trace_estimate;
  write_text_file(path, doc.dump(2) + "\n");
}

void write_failure_manifest(const std::string& path, std::uint64_t cfg_hash,
                            std::uint64_t seed, const std::string& what) {
  json doc;
  doc["config_hash"] = hex64(cfg_hash);
  doc["seed"] = seed;
  doc["error"] = what;
  write_text_file(path, doc.dump(2) + "\n");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SchemaError("cannot open: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace oscar
