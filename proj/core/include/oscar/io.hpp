#pragma once

#include <map>
#include <string>

#include "oscar/experiment.hpp"
#include "oscar/metrics.hpp"
#include "oscar/sampler.hpp"
#include "oscar/verify.hpp"

namespace oscar {

// Model checkpoints: JSON with the layer widths, row-major weight arrays,
// the training seed, and the time-convention tag ("noise0-data1") so a file
// can never be silently read under the wrong convention.
void save_checkpoint(const std::string& path, const MlpVelocity& model,
                     std::uint64_t train_seed);
MlpVelocity load_checkpoint(const std::string& path);

// Trace files: JSON lines. First line is run metadata (config hash, seed,
// method, particle count, dimension, step count, time convention); every
// following line is one grid-node record with named fields.
void write_trace_jsonl(const std::string& path, const RunTrace& trace,
                       std::uint64_t cfg_hash);

// Sample CSVs: a `# config_hash=... seed=... method=...` comment line, then
// `step,particle,x0..x{d-1}` rows. `write_samples_csv` emits the final
// states only; `write_snapshots_csv` emits every recorded snapshot.
void write_samples_csv(const std::string& path, const RunTrace& trace,
                       std::uint64_t cfg_hash);
void write_snapshots_csv(const std::string& path, const RunTrace& trace,
                         std::uint64_t cfg_hash);

// Parsed sample file: states grouped by step, plus the provenance comment.
struct SamplesFile {
  std::uint64_t cfg_hash = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::map<std::size_t, Matrix> by_step;

  const Matrix& last_step() const;
};
SamplesFile read_samples_csv(const std::string& path);

void write_loss_csv(const std::string& path, const Vec& loss,
                    std::uint64_t cfg_hash, std::uint64_t seed);

void write_metric_json(const std::string& path, const MetricReport& rep,
                       std::uint64_t cfg_hash, std::uint64_t seed,
                       const std::string& method);

// Flat sweep table: one row per run, stable column order derived from the
// metrics configuration. `label` lands in the first column.
std::string metric_csv_header(const MetricsConfig& mc);
std::string metric_csv_row(const std::string& label, const MetricReport& rep,
                           std::uint64_t cfg_hash, std::uint64_t seed,
                           const MetricsConfig& mc);

void write_theory_json(const std::string& path, const TheoryReport& rep,
                       std::uint64_t cfg_hash);

// Aborted runs leave a manifest next to the other outputs instead of a
// truncated artifact.
void write_failure_manifest(const std::string& path, std::uint64_t cfg_hash,
                            std::uint64_t seed, const std::string& what);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);  // throws SchemaError

}  // namespace oscar
