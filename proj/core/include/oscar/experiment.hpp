#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oscar/flow.hpp"
#include "oscar/metrics.hpp"
#include "oscar/sampler.hpp"

namespace oscar {

// What to sample from: a mixture spec (inline or from a side file) and the
// velocity field driving the particles - the closed form, or a trained
// checkpoint.
struct ProblemConfig {
  GmmSpec gmm;
  std::string gmm_file;  // non-empty when the spec came from a side file
  enum class Field { analytic, checkpoint };
  Field field = Field::analytic;
  std::string checkpoint;  // path, required when field == checkpoint
  ConditionId condition = kUnconditional;
};

struct MetricsConfig {
  Vec taus{2.0};
  KernelSpec kernel;
  std::vector<std::size_t> ks{3};
  std::size_t real_points = 512;  // reference cloud size for precision/recall
};

struct OutputConfig {
  std::string directory = "out";
  std::size_t snapshot_stride = 0;
  bool svg = false;
};

struct TrainSpec {
  std::vector<std::size_t> hidden{128, 128};
  TrainConfig train;
  std::size_t cond_dim = 0;
  std::string checkpoint = "checkpoint.json";  // output path for `train`
};

// The top-level experiment file. JSON with a mandatory `version` field;
// unknown keys anywhere in the document are hard errors so hyperparameter
// typos cannot pass silently.
struct ExperimentConfig {
  int version = 1;
  ProblemConfig problem;
  SamplerConfig sampler;
  MetricsConfig metrics;
  std::vector<std::uint64_t> seeds{1};
  OutputConfig outputs;
  std::optional<TrainSpec> train;
};

// Parse/serialize. `load_experiment` resolves relative side-file paths
// against the config's own directory and throws SchemaError with the JSON
// path of the offending field.
ExperimentConfig parse_experiment(const std::string& text);
ExperimentConfig load_experiment(const std::string& path);
std::string experiment_to_json(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization; embedded in every output file so
// artifacts can be traced back to the exact configuration.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// The shipped defaults: the 3x3 grid toy with the stock sampler settings.
ExperimentConfig default_experiment();

// Instantiate the velocity field demanded by the problem block (loads the
// checkpoint when one is referenced).
std::unique_ptr<VelocityField> make_field(const ProblemConfig& problem);

GmmSpec gmm_from_json_text(const std::string& text);
std::string gmm_to_json(const GmmSpec& spec);

}  // namespace oscar
