#include "oscar/experiment.hpp"

#include <filesystem>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oscar/io.hpp"
#include "oscar/verify.hpp"

namespace oscar {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw SchemaError("config: " + path + ": " + msg);
}

// Unknown keys are hard errors at every level of the document.
void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(path, "unexpected key '" + it.key() + "'");
  }
}

double get_num(const json& obj, const char* key, double def,
               const std::string& path) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

std::size_t get_size(const json& obj, const char* key, std::size_t def,
                     const std::string& path) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) fail(path + "." + key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

bool get_bool(const json& obj, const char* key, bool def, const std::string& path) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string get_str(const json& obj, const char* key, const std::string& def,
                    const std::string& path) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

Vec get_vec(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  Vec out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(path, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

GmmSpec parse_gmm(const json& obj, const std::string& path) {
  expect_keys(obj, path, {"means", "stds", "weights"});
  if (!obj.contains("means")) fail(path, "missing 'means'");
  GmmSpec spec;
  const json& means = obj.at("means");
  if (!means.is_array() || means.empty()) fail(path + ".means", "expected rows");
  const std::size_t d = means.front().is_array() ? means.front().size() : 0;
  if (d == 0) fail(path + ".means", "expected rows of numbers");
  spec.means = Matrix(means.size(), d);
  for (std::size_t i = 0; i < means.size(); ++i) {
    const Vec row = get_vec(means.at(i), path + ".means");
    if (row.size() != d) fail(path + ".means", "ragged rows");
    spec.means.set_row(i, row);
  }
  if (obj.contains("stds")) {
    spec.stds = get_vec(obj.at("stds"), path + ".stds");
  } else {
    fail(path, "missing 'stds'");
  }
  spec.weights = obj.contains("weights")
                     ? get_vec(obj.at("weights"), path + ".weights")
                     : Vec(means.size(), 1.0 / static_cast<double>(means.size()));
  try {
    validate_gmm(spec);
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return spec;
}

json gmm_json(const GmmSpec& spec) {
  json o;
  json means = json::array();
  for (std::size_t i = 0; i < spec.means.rows; ++i)
    means.push_back(to_vec(spec.means.row(i)));
  o["means"] = means;
  o["stds"] = spec.stds;
  o["weights"] = spec.weights;
  return o;
}

GammaSchedule parse_gamma(const json& obj, const std::string& path) {
  expect_keys(obj, path, {"shape", "gamma0", "t0", "t1"});
  GammaSchedule s;
  try {
    s.shape = gamma_shape_from_string(get_str(obj, "shape", to_string(s.shape), path));
  } catch (const Error& e) {
    fail(path + ".shape", e.what());
  }
  s.gamma0 = get_num(obj, "gamma0", s.gamma0, path);
  s.t0 = get_num(obj, "t0", s.t0, path);
  s.t1 = get_num(obj, "t1", s.t1, path);
  if (!(s.t0 < s.t1)) fail(path, "gate must satisfy t0 < t1");
  if (s.gamma0 < 0.0) fail(path + ".gamma0", "must be nonnegative");
  return s;
}

BetaSchedule parse_beta(const json& obj, const std::string& path) {
  expect_keys(obj, path,
              {"family", "scale", "budget", "p", "eps_beta", "kappa", "t0", "t1"});
  BetaSchedule s;
  try {
    s.family = beta_family_from_string(get_str(obj, "family", to_string(s.family), path));
  } catch (const Error& e) {
    fail(path + ".family", e.what());
  }
  s.p = get_num(obj, "p", s.p, path);
  s.eps_beta = get_num(obj, "eps_beta", s.eps_beta, path);
  s.kappa = get_num(obj, "kappa", s.kappa, path);
  s.t0 = get_num(obj, "t0", s.t0, path);
  s.t1 = get_num(obj, "t1", s.t1, path);
  if (!(s.t0 < s.t1)) fail(path, "gate must satisfy t0 < t1");
  const bool has_scale = obj.contains("scale");
  const bool has_budget = obj.contains("budget");
  if (has_scale && has_budget)
    fail(path, "'scale' and 'budget' are mutually exclusive");
  if (has_budget) {
    const double budget = get_num(obj, "budget", 0.0, path);
    if (budget < 0.0) fail(path + ".budget", "must be nonnegative");
    if (budget == 0.0) {
      s.scale = 0.0;
    } else {
      try {
        s = normalize_budget(s, budget);
      } catch (const Error& e) {
        fail(path, e.what());
      }
    }
  } else {
    s.scale = get_num(obj, "scale", s.scale, path);
    if (s.scale < 0.0) fail(path + ".scale", "must be nonnegative");
  }
  return s;
}

EnergyConfig parse_energy(const json& obj, const std::string& path) {
  expect_keys(obj, path,
              {"tau", "eps", "alpha", "ridge", "freeze_weights", "freeze_stabilizer"});
  EnergyConfig c;
  c.tau = get_num(obj, "tau", c.tau, path);
  c.eps = get_num(obj, "eps", c.eps, path);
  c.alpha = get_num(obj, "alpha", c.alpha, path);
  c.ridge = get_num(obj, "ridge", c.ridge, path);
  c.freeze_weights = get_bool(obj, "freeze_weights", c.freeze_weights, path);
  c.freeze_stabilizer = get_bool(obj, "freeze_stabilizer", c.freeze_stabilizer, path);
  if (c.tau <= 0.0) fail(path + ".tau", "must be positive");
  if (c.eps < 0.0) fail(path + ".eps", "must be nonnegative");
  if (c.ridge <= 0.0) fail(path + ".ridge", "must be positive");
  if (c.alpha < 0.0) fail(path + ".alpha", "must be nonnegative");
  return c;
}

EncoderSpec parse_encoder(const json& obj, const std::string& path,
                          std::size_t state_dim) {
  expect_keys(obj, path, {"kind", "out_dim", "seed", "weight_scale", "bias_scale"});
  EncoderSpec e;
  e.in_dim = state_dim;
  const std::string kind = get_str(obj, "kind", "tanh_lift", path);
  if (kind == "identity") {
    e.kind = EncoderSpec::Kind::identity;
  } else if (kind == "fixed_linear") {
    e.kind = EncoderSpec::Kind::fixed_linear;
  } else if (kind == "tanh_lift") {
    e.kind = EncoderSpec::Kind::tanh_lift;
  } else {
    fail(path + ".kind", "unknown encoder kind '" + kind + "'");
  }
  e.out_dim = get_size(obj, "out_dim", e.out_dim, path);
  e.seed = get_size(obj, "seed", e.seed, path);
  e.weight_scale = get_num(obj, "weight_scale", e.weight_scale, path);
  e.bias_scale = get_num(obj, "bias_scale", e.bias_scale, path);
  if (e.out_dim == 0) fail(path + ".out_dim", "must be positive");
  return e;
}

SamplerConfig parse_sampler(const json& obj, const std::string& path,
                            std::size_t state_dim) {
  expect_keys(obj, path,
              {"particles", "steps", "seed", "lambda", "noise_lambda", "delta",
               "trust_ratio", "vnorm_threshold", "gamma", "beta", "energy",
               "encoder", "vjp_mode", "init", "snapshot_stride", "debug_fault"});
  SamplerConfig c;
  c.encoder.in_dim = state_dim;
  c.particles = get_size(obj, "particles", c.particles, path);
  c.steps = get_size(obj, "steps", c.steps, path);
  c.seed = get_size(obj, "seed", c.seed, path);
  c.lambda = get_num(obj, "lambda", c.lambda, path);
  c.noise_lambda = get_num(obj, "noise_lambda", c.noise_lambda, path);
  c.delta = get_num(obj, "delta", c.delta, path);
  c.trust_ratio = get_num(obj, "trust_ratio", c.trust_ratio, path);
  c.vnorm_threshold = get_num(obj, "vnorm_threshold", c.vnorm_threshold, path);
  if (c.particles == 0) fail(path + ".particles", "must be positive");
  if (c.steps == 0) fail(path + ".steps", "must be positive");
  if (c.lambda < 0.0 || c.lambda > 1.0) fail(path + ".lambda", "must lie in [0,1]");
  if (c.noise_lambda < 0.0 || c.noise_lambda > 1.0)
    fail(path + ".noise_lambda", "must lie in [0,1]");
  if (c.delta <= 0.0) fail(path + ".delta", "must be positive");
  if (c.trust_ratio <= 0.0) fail(path + ".trust_ratio", "must be positive");
  if (obj.contains("gamma")) c.gamma = parse_gamma(obj.at("gamma"), path + ".gamma");
  if (obj.contains("beta")) c.beta = parse_beta(obj.at("beta"), path + ".beta");
  if (obj.contains("energy"))
    c.energy = parse_energy(obj.at("energy"), path + ".energy");
  if (obj.contains("encoder"))
    c.encoder = parse_encoder(obj.at("encoder"), path + ".encoder", state_dim);
  const std::string mode = get_str(obj, "vjp_mode", "exact", path);
  if (mode == "exact") {
    c.vjp_mode = EndpointVjpMode::exact;
  } else if (mode == "frozen_corrector") {
    c.vjp_mode = EndpointVjpMode::frozen_corrector;
  } else {
    fail(path + ".vjp_mode", "expected 'exact' or 'frozen_corrector'");
  }
  if (obj.contains("init")) {
    const json& init = obj.at("init");
    expect_keys(init, path + ".init", {"kind", "radius"});
    const std::string kind = get_str(init, "kind", "gauss", path + ".init");
    if (kind == "gauss") {
      c.init = SamplerConfig::Init::gauss;
    } else if (kind == "disk") {
      c.init = SamplerConfig::Init::disk;
    } else {
      fail(path + ".init.kind", "expected 'gauss' or 'disk'");
    }
    c.disk_radius = get_num(init, "radius", c.disk_radius, path + ".init");
    if (c.disk_radius <= 0.0) fail(path + ".init.radius", "must be positive");
  }
  c.snapshot_stride = get_size(obj, "snapshot_stride", c.snapshot_stride, path);
  c.debug_fault = get_str(obj, "debug_fault", "", path);
  if (!c.debug_fault.empty() && c.debug_fault != "parallel-control")
    fail(path + ".debug_fault", "unknown fault '" + c.debug_fault + "'");
  return c;
}

json sampler_json(const SamplerConfig& c) {
  json o;
  o["particles"] = c.particles;
  o["steps"] = c.steps;
  o["seed"] = c.seed;
  o["lambda"] = c.lambda;
  o["noise_lambda"] = c.noise_lambda;
  o["delta"] = c.delta;
  o["trust_ratio"] = c.trust_ratio;
  o["vnorm_threshold"] = c.vnorm_threshold;
  o["gamma"] = {{"shape", to_string(c.gamma.shape)},
                {"gamma0", c.gamma.gamma0},
                {"t0", c.gamma.t0},
                {"t1", c.gamma.t1}};
  o["beta"] = {{"family", to_string(c.beta.family)}, {"scale", c.beta.scale},
               {"p", c.beta.p},                      {"eps_beta", c.beta.eps_beta},
               {"kappa", c.beta.kappa},              {"t0", c.beta.t0},
               {"t1", c.beta.t1}};
  o["energy"] = {{"tau", c.energy.tau},
                 {"eps", c.energy.eps},
                 {"alpha", c.energy.alpha},
                 {"ridge", c.energy.ridge},
                 {"freeze_weights", c.energy.freeze_weights},
                 {"freeze_stabilizer", c.energy.freeze_stabilizer}};
  const char* kind = c.encoder.kind == EncoderSpec::Kind::identity ? "identity"
                     : c.encoder.kind == EncoderSpec::Kind::fixed_linear
                         ? "fixed_linear"
                         : "tanh_lift";
  o["encoder"] = {{"kind", kind},
                  {"out_dim", c.encoder.out_dim},
                  {"seed", c.encoder.seed},
                  {"weight_scale", c.encoder.weight_scale},
                  {"bias_scale", c.encoder.bias_scale}};
  o["vjp_mode"] =
      c.vjp_mode == EndpointVjpMode::exact ? "exact" : "frozen_corrector";
  o["init"] = {{"kind", c.init == SamplerConfig::Init::gauss ? "gauss" : "disk"},
               {"radius", c.disk_radius}};
  o["snapshot_stride"] = c.snapshot_stride;
  if (!c.debug_fault.empty()) o["debug_fault"] = c.debug_fault;
  return o;
}

ProblemConfig parse_problem(const json& obj, const std::string& path,
                            const std::string& base_dir) {
  expect_keys(obj, path, {"gmm", "gmm_file", "field", "checkpoint", "condition"});
  ProblemConfig p;
  const bool inline_gmm = obj.contains("gmm");
  const bool file_gmm = obj.contains("gmm_file");
  if (inline_gmm == file_gmm)
    fail(path, "exactly one of 'gmm' and 'gmm_file' is required");
  if (inline_gmm) {
    p.gmm = parse_gmm(obj.at("gmm"), path + ".gmm");
  } else {
    p.gmm_file = get_str(obj, "gmm_file", "", path);
    std::filesystem::path f(p.gmm_file);
    if (f.is_relative() && !base_dir.empty()) f = std::filesystem::path(base_dir) / f;
    p.gmm = gmm_from_json_text(read_text_file(f.string()));
  }
  const std::string field = get_str(obj, "field", "analytic", path);
  if (field == "analytic") {
    p.field = ProblemConfig::Field::analytic;
  } else if (field == "checkpoint") {
    p.field = ProblemConfig::Field::checkpoint;
  } else {
    fail(path + ".field", "expected 'analytic' or 'checkpoint'");
  }
  p.checkpoint = get_str(obj, "checkpoint", "", path);
  if (p.field == ProblemConfig::Field::checkpoint) {
    if (p.checkpoint.empty())
      fail(path, "'checkpoint' is required when field = checkpoint");
    std::filesystem::path f(p.checkpoint);
    if (f.is_relative() && !base_dir.empty()) f = std::filesystem::path(base_dir) / f;
    p.checkpoint = f.string();
  }
  const double cond = get_num(obj, "condition", 0.0, path);
  p.condition = static_cast<ConditionId>(cond);
  if (p.condition < 0 ||
      p.condition > static_cast<ConditionId>(p.gmm.means.rows))
    fail(path + ".condition", "label out of range for the mixture");
  return p;
}

MetricsConfig parse_metrics(const json& obj, const std::string& path) {
  expect_keys(obj, path, {"taus", "kernel", "ks", "real_points"});
  MetricsConfig m;
  if (obj.contains("taus")) {
    m.taus = get_vec(obj.at("taus"), path + ".taus");
    for (double t : m.taus)
      if (t <= 0.0) fail(path + ".taus", "must be positive");
  }
  if (obj.contains("kernel")) {
    const json& k = obj.at("kernel");
    expect_keys(k, path + ".kernel", {"kind", "bandwidth"});
    const std::string kind = get_str(k, "kind", "rbf", path + ".kernel");
    if (kind == "linear") {
      m.kernel.kind = KernelSpec::Kind::linear;
    } else if (kind == "rbf") {
      m.kernel.kind = KernelSpec::Kind::rbf;
    } else {
      fail(path + ".kernel.kind", "expected 'linear' or 'rbf'");
    }
    if (k.contains("bandwidth") && !k.at("bandwidth").is_null())
      m.kernel.bandwidth = get_num(k, "bandwidth", 1.0, path + ".kernel");
  }
  if (obj.contains("ks")) {
    const json& ks = obj.at("ks");
    if (!ks.is_array()) fail(path + ".ks", "expected an array of integers");
    m.ks.clear();
    for (const auto& e : ks) {
      if (!e.is_number_unsigned() || e.get<std::size_t>() == 0)
        fail(path + ".ks", "expected positive integers");
      m.ks.push_back(e.get<std::size_t>());
    }
  }
  m.real_points = get_size(obj, "real_points", m.real_points, path);
  return m;
}

OutputConfig parse_outputs(const json& obj, const std::string& path) {
  expect_keys(obj, path, {"directory", "snapshot_stride", "svg"});
  OutputConfig o;
  o.directory = get_str(obj, "directory", o.directory, path);
  o.snapshot_stride = get_size(obj, "snapshot_stride", o.snapshot_stride, path);
  o.svg = get_bool(obj, "svg", o.svg, path);
  return o;
}

TrainSpec parse_train(const json& obj, const std::string& path) {
  expect_keys(obj, path,
              {"hidden", "steps", "batch", "lr", "seed", "cond_dim", "checkpoint"});
  TrainSpec t;
  if (obj.contains("hidden")) {
    const json& h = obj.at("hidden");
    if (!h.is_array()) fail(path + ".hidden", "expected an array of widths");
    t.hidden.clear();
    for (const auto& e : h) {
      if (!e.is_number_unsigned() || e.get<std::size_t>() == 0)
        fail(path + ".hidden", "expected positive widths");
      t.hidden.push_back(e.get<std::size_t>());
    }
  }
  t.train.steps = get_size(obj, "steps", t.train.steps, path);
  t.train.batch = get_size(obj, "batch", t.train.batch, path);
  t.train.lr = get_num(obj, "lr", t.train.lr, path);
  t.train.seed = get_size(obj, "seed", t.train.seed, path);
  t.cond_dim = get_size(obj, "cond_dim", t.cond_dim, path);
  t.checkpoint = get_str(obj, "checkpoint", t.checkpoint, path);
  if (t.train.batch == 0) fail(path + ".batch", "must be positive");
  if (!(t.train.lr > 0.0)) fail(path + ".lr", "must be positive");
  return t;
}

ExperimentConfig parse_document(const json& doc, const std::string& base_dir) {
  expect_keys(doc, "$",
              {"version", "problem", "sampler", "metrics", "seeds", "outputs",
               "train"});
  if (!doc.contains("version")) fail("$", "missing 'version'");
  if (!doc.at("version").is_number_integer())
    fail("$.version", "expected an integer");
  ExperimentConfig cfg;
  cfg.version = doc.at("version").get<int>();
  if (cfg.version != 1) fail("$.version", "unsupported version");
  if (!doc.contains("problem")) fail("$", "missing 'problem'");
  cfg.problem = parse_problem(doc.at("problem"), "$.problem", base_dir);
  const std::size_t d = cfg.problem.gmm.means.cols;
  cfg.sampler = doc.contains("sampler")
                    ? parse_sampler(doc.at("sampler"), "$.sampler", d)
                    : [&] {
                        SamplerConfig c;
                        c.encoder.in_dim = d;
                        return c;
                      }();
  if (doc.contains("metrics"))
    cfg.metrics = parse_metrics(doc.at("metrics"), "$.metrics");
  if (doc.contains("seeds")) {
    const json& seeds = doc.at("seeds");
    if (!seeds.is_array() || seeds.empty())
      fail("$.seeds", "expected a non-empty array of integers");
    cfg.seeds.clear();
    for (const auto& e : seeds) {
      if (!e.is_number_unsigned()) fail("$.seeds", "expected nonnegative integers");
      cfg.seeds.push_back(e.get<std::uint64_t>());
    }
  }
  if (doc.contains("outputs"))
    cfg.outputs = parse_outputs(doc.at("outputs"), "$.outputs");
  if (doc.contains("train")) cfg.train = parse_train(doc.at("train"), "$.train");
  return cfg;
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  return parse_document(doc, "");
}

ExperimentConfig load_experiment(const std::string& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("config " + path + ": " + e.what());
  }
  return parse_document(doc, std::filesystem::path(path).parent_path().string());
}

std::string experiment_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["version"] = cfg.version;
  json problem;
  problem["gmm"] = gmm_json(cfg.problem.gmm);
  problem["field"] =
      cfg.problem.field == ProblemConfig::Field::analytic ? "analytic" : "checkpoint";
  if (!cfg.problem.checkpoint.empty()) problem["checkpoint"] = cfg.problem.checkpoint;
  if (cfg.problem.condition != kUnconditional)
    problem["condition"] = cfg.problem.condition;
  doc["problem"] = problem;
  doc["sampler"] = sampler_json(cfg.sampler);
  json metrics;
  metrics["taus"] = cfg.metrics.taus;
  metrics["kernel"] = {
      {"kind", cfg.metrics.kernel.kind == KernelSpec::Kind::linear ? "linear" : "rbf"}};
  if (!std::isnan(cfg.metrics.kernel.bandwidth))
    metrics["kernel"]["bandwidth"] = cfg.metrics.kernel.bandwidth;
  metrics["ks"] = cfg.metrics.ks;
  metrics["real_points"] = cfg.metrics.real_points;
  doc["metrics"] = metrics;
  doc["seeds"] = cfg.seeds;
  doc["outputs"] = {{"directory", cfg.outputs.directory},
                    {"snapshot_stride", cfg.outputs.snapshot_stride},
                    {"svg", cfg.outputs.svg}};
  if (cfg.train) {
    doc["train"] = {{"hidden", cfg.train->hidden},
                    {"steps", cfg.train->train.steps},
                    {"batch", cfg.train->train.batch},
                    {"lr", cfg.train->train.lr},
                    {"seed", cfg.train->train.seed},
                    {"cond_dim", cfg.train->cond_dim},
                    {"checkpoint", cfg.train->checkpoint}};
  }
  return doc.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = experiment_to_json(cfg);
  return fnv1a64(text.data(), text.size());
}

ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.problem.gmm = verify_toy_gmm();
  cfg.sampler = verify_toy_config();
  // Coverage radius = half the minimum distance between mixture means.
  cfg.metrics.taus = {2.0};
  cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  cfg.outputs.snapshot_stride = 10;
  cfg.outputs.svg = true;
  return cfg;
}

std::unique_ptr<VelocityField> make_field(const ProblemConfig& problem) {
  if (problem.field == ProblemConfig::Field::analytic)
    return std::make_unique<GmmField>(problem.gmm, problem.condition);
  MlpVelocity model = load_checkpoint(problem.checkpoint);
  if (model.state_dim != problem.gmm.means.cols)
    throw DimensionMismatch("checkpoint state dimension does not match the mixture");
  return std::make_unique<MlpField>(std::move(model), problem.condition);
}

GmmSpec gmm_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("gmm: ") + e.what());
  }
  return parse_gmm(doc, "$");
}

std::string gmm_to_json(const GmmSpec& spec) { return gmm_json(spec).dump(2); }

}  // namespace oscar
