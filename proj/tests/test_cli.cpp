#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oscar/cli.hpp"
#include "oscar/errors.hpp"
#include "oscar/experiment.hpp"
#include "oscar/flow.hpp"
#include "oscar/io.hpp"
#include "oscar/sampler.hpp"
#include "test_support.hpp"

using namespace oscar;
using namespace oscar::testsupport;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.problem.gmm.means = Matrix(2, 2);
  cfg.problem.gmm.means(0, 0) = -2.0;
  cfg.problem.gmm.means(1, 0) = 2.0;
  cfg.problem.gmm.stds = {0.6, 0.6};
  cfg.problem.gmm.weights = {0.5, 0.5};
  cfg.sampler.particles = 8;
  cfg.sampler.steps = 10;
  cfg.metrics.taus = {1.0};
  cfg.metrics.ks = {3};
  cfg.metrics.real_points = 64;
  cfg.seeds = {1, 2, 3, 4};
  return cfg;
}

int run_argv(std::vector<std::string> args) {
  std::vector<const char*> argv;
  argv.push_back("oscar");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("usage errors: missing config file, unknown method, no subcommand") {
  CHECK(run_argv({"sample", "--config", "/definitely/not/here.json"}) ==
        cli::kUsage);
  CHECK(run_argv({"sample", "--method", "sideways"}) == cli::kUsage);
  CHECK(run_argv({}) == cli::kUsage);
  CHECK(run_argv({"train"}) == cli::kUsage);  // train requires --config
}

TEST_CASE("zero-step training writes the untouched initialization") {
  TempDir dir("train0");
  ExperimentConfig cfg = small_experiment();
  TrainSpec ts;
  ts.hidden = {8, 4};
  ts.train.steps = 0;
  ts.train.seed = 5;
  cfg.train = ts;

  const std::string ckpt = dir.file("model.json");
  CHECK(cli::cmd_train(cfg, ckpt) == cli::kOk);

  MlpVelocity loaded = load_checkpoint(ckpt);
  MlpVelocity fresh = make_mlp(2, 0, {8, 4}, 5);
  REQUIRE(loaded.weights.size() == fresh.weights.size());
  for (std::size_t l = 0; l < fresh.weights.size(); ++l) {
    CHECK(loaded.weights[l].data == fresh.weights[l].data);
    CHECK(loaded.biases[l] == fresh.biases[l]);
  }
  CHECK(fs::exists(dir.file("model.loss.csv")));

  ExperimentConfig no_train = small_experiment();
  CHECK(cli::cmd_train(no_train, dir.file("x.json")) == cli::kUsage);
}

TEST_CASE("sampling over seeds writes one artifact set per seed plus a table") {
  TempDir dir("sample");
  ExperimentConfig cfg = small_experiment();
  CHECK(cli::cmd_sample(cfg, Method::oscar, {}, 2, dir.path().string()) ==
        cli::kOk);

  for (std::uint64_t s : {1, 2, 3, 4}) {
    const std::string tag = "oscar_seed" + std::to_string(s);
    CHECK(fs::exists(dir.file("trace_" + tag + ".jsonl")));
    CHECK(fs::exists(dir.file("samples_" + tag + ".csv")));
    CHECK(fs::exists(dir.file("metrics_" + tag + ".json")));
    CHECK_FALSE(fs::exists(dir.file("failure_" + tag + ".json")));
  }
  const std::string table = read_text_file(dir.file("metrics_oscar.csv"));
  CHECK(count_lines(table) == 6);  // header + 4 seeds + mean
  CHECK(table.find("\nmean,") != std::string::npos);

  // The mean row averages the per-seed rows; spot-check the vendi column.
  std::istringstream is(table);
  std::string line;
  std::getline(is, line);  // header
  double sum = 0.0, mean_val = -1.0;
  while (std::getline(is, line)) {
    std::istringstream row(line);
    std::string label, hash, seed, vendi;
    std::getline(row, label, ',');
    std::getline(row, hash, ',');
    std::getline(row, seed, ',');
    std::getline(row, vendi, ',');
    if (label == "mean")
      mean_val = std::stod(vendi);
    else
      sum += std::stod(vendi);
  }
  CHECK(mean_val == doctest::Approx(sum / 4.0).epsilon(1e-12));
}

TEST_CASE("repeated runs are byte-identical") {
  TempDir a("rerun_a"), b("rerun_b");
  ExperimentConfig cfg = small_experiment();
  cfg.seeds = {7};
  REQUIRE(cli::cmd_sample(cfg, Method::oscar, {}, 1, a.path().string()) ==
          cli::kOk);
  REQUIRE(cli::cmd_sample(cfg, Method::oscar, {}, 1, b.path().string()) ==
          cli::kOk);
  for (const std::string name :
       {"samples_oscar_seed7.csv", "trace_oscar_seed7.jsonl",
        "metrics_oscar.csv"}) {
    CHECK(read_text_file(a.file(name)) == read_text_file(b.file(name)));
  }
}

TEST_CASE("svg rendering does not perturb the sampled states") {
  TempDir plain("svg_off"), fancy("svg_on");
  ExperimentConfig cfg = small_experiment();
  cfg.seeds = {3};
  REQUIRE(cli::cmd_sample(cfg, Method::oscar, {}, 1, plain.path().string()) ==
          cli::kOk);
  ExperimentConfig cfg_svg = cfg;
  cfg_svg.outputs.svg = true;
  REQUIRE(cli::cmd_sample(cfg_svg, Method::oscar, {}, 1, fancy.path().string()) ==
          cli::kOk);

  CHECK(fs::exists(fancy.file("plot_oscar_seed3.svg")));
  CHECK_FALSE(fs::exists(plain.file("plot_oscar_seed3.svg")));
  SamplesFile sp = read_samples_csv(plain.file("samples_oscar_seed3.csv"));
  SamplesFile sf = read_samples_csv(fancy.file("samples_oscar_seed3.csv"));
  CHECK(sp.last_step().data == sf.last_step().data);

  // The rendered file is nonempty svg markup.
  const std::string svg = read_text_file(fancy.file("plot_oscar_seed3.svg"));
  CHECK(svg.find("<svg") != std::string::npos);
}

TEST_CASE("seed override replaces the config's seed list") {
  TempDir dir("seedov");
  ExperimentConfig cfg = small_experiment();
  CHECK(cli::cmd_sample(cfg, Method::baseline, {11}, 1, dir.path().string()) ==
        cli::kOk);
  CHECK(fs::exists(dir.file("samples_baseline_seed11.csv")));
  CHECK_FALSE(fs::exists(dir.file("samples_baseline_seed1.csv")));
}

TEST_CASE("metric scoring of sample files, with a paired comparison for two") {
  TempDir dir("metrics");
  ExperimentConfig cfg = small_experiment();

  // Synthetic sample files: one sitting exactly on the mode centers, one far
  // off to the side.
  auto write_cloud = [&](const std::string& name, double cx) {
    std::ostringstream os;
    os << "# config_hash=00000000000000ff seed=9 method=synthetic\n";
    os << "step,particle,x0,x1\n";
    for (int i = 0; i < 8; ++i)
      os << "10," << i << ',' << cx + 2.0 * (i % 2 ? 1 : -1) << ','
         << 0.01 * i << '\n';
    write_text_file(dir.file(name), os.str());
  };
  write_cloud("on_modes.csv", 0.0);
  write_cloud("offset.csv", 50.0);

  CHECK(cli::cmd_metrics(cfg, {dir.file("on_modes.csv"), dir.file("offset.csv")},
                         dir.path().string()) == cli::kOk);
  CHECK(fs::exists(dir.file("on_modes_metrics.json")));
  CHECK(fs::exists(dir.file("offset_metrics.json")));
  CHECK(fs::exists(dir.file("comparison.csv")));

  auto on = nlohmann::json::parse(read_text_file(dir.file("on_modes_metrics.json")));
  CHECK(on["coverage"]["1"] == 1.0);  // every center has a sample on it
  auto off = nlohmann::json::parse(read_text_file(dir.file("offset_metrics.json")));
  CHECK(off["coverage"]["1"] == 0.0);

  const std::string cmp = read_text_file(dir.file("comparison.csv"));
  CHECK(cmp.rfind("metric,on_modes,offset,delta", 0) == 0);

  CHECK(cli::cmd_metrics(cfg, {}, dir.path().string()) == cli::kUsage);
}

TEST_CASE("malformed sample input surfaces as a usage error through the cli") {
  TempDir dir("badinput");
  write_text_file(dir.file("empty.csv"), "");
  ExperimentConfig cfg = small_experiment();
  const std::string cfg_path = dir.file("cfg.json");
  write_text_file(cfg_path, experiment_to_json(cfg));
  CHECK(run_argv({"metrics", "--config", cfg_path, dir.file("empty.csv"),
                  "--out", dir.path().string()}) == cli::kUsage);
}

TEST_CASE("plot renders an svg per sample file") {
  TempDir dir("plot");
  ExperimentConfig cfg = small_experiment();
  cfg.outputs.snapshot_stride = 5;
  REQUIRE(cli::cmd_sample(cfg, Method::oscar, {2}, 1, dir.path().string()) ==
          cli::kOk);
  CHECK(cli::cmd_plot(cfg, {dir.file("snapshots_oscar_seed2.csv")},
                      dir.path().string()) == cli::kOk);
  CHECK(fs::exists(dir.file("snapshots_oscar_seed2.svg")));
}

TEST_CASE("verification subcommand: fault caught, filter honored") {
  TempDir dir("verify");
  ExperimentConfig cfg = small_experiment();
  cfg.sampler.particles = 8;
  cfg.sampler.steps = 25;

  // A single cheap check through the full dispatch path.
  const std::string cfg_path = dir.file("cfg.json");
  write_text_file(cfg_path, experiment_to_json(cfg));
  CHECK(run_argv({"verify", "--config", cfg_path, "--only", "volume", "--out",
                  dir.path().string()}) == cli::kOk);
  auto rep = nlohmann::json::parse(read_text_file(dir.file("theory_report.json")));
  CHECK(rep["all_pass"] == true);

  // Injected parallel control must flip the orthogonality check red.
  ExperimentConfig faulty = cfg;
  faulty.sampler.debug_fault = "parallel-control";
  CHECK(cli::cmd_verify(faulty, "orthogonality", dir.path().string()) ==
        cli::kCheckFailed);
  auto bad = nlohmann::json::parse(read_text_file(dir.file("theory_report.json")));
  CHECK(bad["all_pass"] == false);
}

TEST_CASE("full argv round trip: config file in, artifacts out") {
  TempDir dir("argv");
  ExperimentConfig cfg = small_experiment();
  cfg.seeds = {1, 2};
  const std::string cfg_path = dir.file("cfg.json");
  write_text_file(cfg_path, experiment_to_json(cfg));
  CHECK(run_argv({"sample", "--config", cfg_path, "--method", "baseline",
                  "--jobs", "2", "--out", dir.path().string()}) == cli::kOk);
  CHECK(fs::exists(dir.file("samples_baseline_seed1.csv")));
  CHECK(fs::exists(dir.file("samples_baseline_seed2.csv")));
  CHECK(fs::exists(dir.file("metrics_baseline.csv")));
}
