#include "oscar/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "oscar/io.hpp"
#include "oscar/svg.hpp"
#include "oscar/verify.hpp"

namespace oscar::cli {

namespace fs = std::filesystem;

namespace {

std::string method_name(Method m) {
  return m == Method::oscar ? "oscar" : "baseline";
}

// Reference cloud for the precision/recall metrics: a fixed-seed draw from
// the target mixture, shared across methods so comparisons are paired.
Matrix reference_cloud(const ProblemConfig& problem, std::size_t n) {
  const GmmSpec spec = select_condition(problem.gmm, problem.condition);
  Matrix cloud(n, spec.means.cols);
  for (std::size_t i = 0; i < n; ++i)
    cloud.set_row(i, gmm_sample(spec, 424242, rng::kMisc, 0, i));
  return cloud;
}

MetricReport mean_report(const std::vector<MetricReport>& reps) {
  MetricReport mean;
  if (reps.empty()) return mean;
  mean.vendi.score = 0.0;  // the result type defaults to the metric floor
  const double n = static_cast<double>(reps.size());
  for (const auto& r : reps) {
    mean.vendi.score += r.vendi.score / n;
    mean.vendi.bandwidth_used += r.vendi.bandwidth_used / n;
    mean.entropy_norm += r.entropy_norm / n;
    for (const auto& [tau, frac] : r.coverage) mean.coverage[tau] += frac / n;
  }
  for (std::size_t j = 0; j < reps.front().pr.size(); ++j) {
    PrecisionRecall p;
    p.k = reps.front().pr[j].k;
    for (const auto& r : reps) {
      p.precision += r.pr[j].precision / n;
      p.recall += r.pr[j].recall / n;
    }
    mean.pr.push_back(p);
  }
  return mean;
}

// Early / middle / final scatter panels from a step-indexed state history.
std::vector<SvgPanel> snapshot_panels(const std::map<std::size_t, Matrix>& by_step,
                                      const Matrix& centers, std::size_t steps) {
  std::vector<SvgPanel> panels;
  if (by_step.empty()) return panels;
  std::vector<std::size_t> keys;
  for (const auto& [step, states] : by_step) keys.push_back(step);
  std::vector<std::size_t> picks{keys.front()};
  if (keys.size() >= 3) {
    const std::size_t mid_target = keys.back() / 2;
    std::size_t mid = keys[1];
    for (std::size_t k : keys)
      if (k != keys.front() && k != keys.back() &&
          (mid == keys.front() ||
           std::llabs(static_cast<long long>(k) - static_cast<long long>(mid_target)) <
               std::llabs(static_cast<long long>(mid) -
                          static_cast<long long>(mid_target))))
        mid = k;
    picks.push_back(mid);
  }
  if (keys.size() >= 2) picks.push_back(keys.back());

  for (std::size_t p = 0; p < picks.size(); ++p) {
    SvgPanel panel;
    const std::size_t step = picks[p];
    char title[48];
    std::snprintf(title, sizeof title, "step %zu / %zu", step,
                  steps ? steps : keys.back());
    panel.title = title;
    const Matrix& states = by_step.at(step);
    if (p + 1 == picks.size() && picks.size() > 1) {
      panel.crosses = states;  // final samples as "x"
    } else {
      panel.dots = states;
    }
    panel.plusses = centers;
    panels.push_back(std::move(panel));
  }
  return panels;
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg, const std::string& out_override) {
  if (!cfg.train) {
    std::cerr << "train: the config has no 'train' block\n";
    return kUsage;
  }
  const TrainSpec& ts = *cfg.train;
  const std::size_t d = cfg.problem.gmm.means.cols;
  MlpVelocity model = make_mlp(d, ts.cond_dim, ts.hidden, ts.train.seed);
  const TrainResult result =
      train_flow(cfg.problem.gmm, model, ts.train, cfg.problem.condition);

  fs::path ckpt = out_override.empty()
                      ? fs::path(cfg.outputs.directory) / ts.checkpoint
                      : fs::path(out_override);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt.string(), model, ts.train.seed);
  const std::uint64_t hash = config_hash(cfg);
  fs::path loss = ckpt;
  loss.replace_extension(".loss.csv");
  write_loss_csv(loss.string(), result.loss_trace, hash, ts.train.seed);

  double head = 0.0, tail = 0.0;
  const std::size_t w = std::min<std::size_t>(100, result.loss_trace.size());
  for (std::size_t i = 0; i < w; ++i) {
    head += result.loss_trace[i] / static_cast<double>(w ? w : 1);
    tail += result.loss_trace[result.loss_trace.size() - 1 - i] /
            static_cast<double>(w ? w : 1);
  }
  std::cout << "train: " << result.loss_trace.size() << " steps, loss "
            << head << " -> " << tail << ", checkpoint " << ckpt.string()
            << "\n";
  return kOk;
}

int cmd_sample(const ExperimentConfig& cfg, Method method,
               const std::vector<std::uint64_t>& seed_override,
               std::size_t jobs, const std::string& out_override) {
  const std::vector<std::uint64_t>& seeds =
      seed_override.empty() ? cfg.seeds : seed_override;
  const fs::path dir =
      out_override.empty() ? fs::path(cfg.outputs.directory) : fs::path(out_override);
  fs::create_directories(dir);
  const auto field = make_field(cfg.problem);
  const std::uint64_t hash = config_hash(cfg);
  const std::string mname = method_name(method);
  const Matrix real = reference_cloud(cfg.problem, cfg.metrics.real_points);
  const Matrix& centers = cfg.problem.gmm.means;

  struct SeedResult {
    RunTrace trace;
    MetricReport report;
    bool ok = false;
    std::string error;
  };
  std::vector<SeedResult> results(seeds.size());

  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= seeds.size()) return;
      SamplerConfig sc = cfg.sampler;
      sc.seed = seeds[i];
      sc.snapshot_stride = cfg.outputs.snapshot_stride;
      if (cfg.outputs.svg && sc.snapshot_stride == 0)
        sc.snapshot_stride = std::max<std::size_t>(1, sc.steps / 2);
      try {
        results[i].trace = run(sc, *field, method);
        results[i].report =
            compute_metrics(results[i].trace.final_states, centers,
                            cfg.metrics.taus, cfg.metrics.kernel, cfg.metrics.ks,
                            &real);
        results[i].ok = true;
      } catch (const Error& e) {
        results[i].error = e.what();
      }
    }
  };
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min(jobs, seeds.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  // All writes from this one thread; one file, one writer.
  std::vector<MetricReport> ok_reports;
  std::size_t failures = 0;
  std::string csv = metric_csv_header(cfg.metrics) + "\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::string tag = mname + "_seed" + std::to_string(seeds[i]);
    if (!results[i].ok) {
      ++failures;
      write_failure_manifest((dir / ("failure_" + tag + ".json")).string(), hash,
                             seeds[i], results[i].error);
      std::cerr << "sample: seed " << seeds[i] << " failed: " << results[i].error
                << "\n";
      continue;
    }
    const RunTrace& trace = results[i].trace;
    write_trace_jsonl((dir / ("trace_" + tag + ".jsonl")).string(), trace, hash);
    write_samples_csv((dir / ("samples_" + tag + ".csv")).string(), trace, hash);
    if (cfg.outputs.snapshot_stride > 0)
      write_snapshots_csv((dir / ("snapshots_" + tag + ".csv")).string(), trace,
                          hash);
    if (cfg.outputs.svg) {
      std::map<std::size_t, Matrix> by_step;
      for (std::size_t s = 0; s < trace.snapshot_steps.size(); ++s)
        by_step[trace.snapshot_steps[s]] = trace.snapshots[s];
      by_step[trace.records.empty() ? 0 : trace.records.size() - 1] =
          trace.final_states;
      write_svg((dir / ("plot_" + tag + ".svg")).string(),
                snapshot_panels(by_step, centers, cfg.sampler.steps));
    }
    write_metric_json((dir / ("metrics_" + tag + ".json")).string(),
                      results[i].report, hash, seeds[i], mname);
    csv += metric_csv_row(mname, results[i].report, hash, seeds[i], cfg.metrics) +
           "\n";
    ok_reports.push_back(results[i].report);
  }
  if (!ok_reports.empty())
    csv += metric_csv_row("mean", mean_report(ok_reports), hash, 0, cfg.metrics) +
           "\n";
  write_text_file((dir / ("metrics_" + mname + ".csv")).string(), csv);

  std::cout << "sample: method " << mname << ", " << seeds.size() - failures
            << "/" << seeds.size() << " seeds completed, outputs in "
            << dir.string() << "\n";
  return failures == 0 ? kOk : kCheckFailed;
}

int cmd_metrics(const ExperimentConfig& cfg,
                const std::vector<std::string>& sample_files,
                const std::string& out_override) {
  if (sample_files.empty()) {
    std::cerr << "metrics: no sample files given\n";
    return kUsage;
  }
  const fs::path dir =
      out_override.empty() ? fs::path(cfg.outputs.directory) : fs::path(out_override);
  fs::create_directories(dir);
  const Matrix real = reference_cloud(cfg.problem, cfg.metrics.real_points);
  const Matrix& centers = cfg.problem.gmm.means;

  std::vector<std::string> labels;
  std::vector<MetricReport> reports;
  std::string csv = metric_csv_header(cfg.metrics) + "\n";
  for (const std::string& f : sample_files) {
    const SamplesFile sf = read_samples_csv(f);
    const MetricReport rep =
        compute_metrics(sf.last_step(), centers, cfg.metrics.taus,
                        cfg.metrics.kernel, cfg.metrics.ks, &real);
    const std::string label = fs::path(f).stem().string();
    write_metric_json((dir / (label + "_metrics.json")).string(), rep, sf.cfg_hash,
                      sf.seed, sf.method.empty() ? label : sf.method);
    csv += metric_csv_row(label, rep, sf.cfg_hash, sf.seed, cfg.metrics) + "\n";
    labels.push_back(label);
    reports.push_back(rep);
  }
  write_text_file((dir / "metrics.csv").string(), csv);

  if (reports.size() == 2) {
    std::ostringstream os;
    os << "metric," << labels[0] << ',' << labels[1] << ",delta\n";
    auto row = [&os](const std::string& name, double a, double b) {
      os << name << ',' << a << ',' << b << ',' << b - a << '\n';
    };
    row("vendi", reports[0].vendi.score, reports[1].vendi.score);
    row("entropy_norm", reports[0].entropy_norm, reports[1].entropy_norm);
    for (const auto& [tau, frac] : reports[0].coverage)
      if (reports[1].coverage.count(tau))
        row("coverage@" + std::to_string(tau), frac, reports[1].coverage.at(tau));
    for (std::size_t j = 0;
         j < std::min(reports[0].pr.size(), reports[1].pr.size()); ++j) {
      row("precision@" + std::to_string(reports[0].pr[j].k),
          reports[0].pr[j].precision, reports[1].pr[j].precision);
      row("recall@" + std::to_string(reports[0].pr[j].k), reports[0].pr[j].recall,
          reports[1].pr[j].recall);
    }
    write_text_file((dir / "comparison.csv").string(), os.str());
  }
  std::cout << "metrics: " << reports.size() << " sample file(s) scored, outputs in "
            << dir.string() << "\n";
  return kOk;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& only,
               const std::string& out_override) {
  const fs::path dir =
      out_override.empty() ? fs::path(cfg.outputs.directory) : fs::path(out_override);
  fs::create_directories(dir);
  const auto field = make_field(cfg.problem);
  const TheoryReport rep = run_verification(cfg.sampler, *field, only);

  auto line = [](const CheckResult& c) {
    std::cout << (c.pass ? "  pass  " : "  FAIL  ") << c.name << "  stat="
              << c.stat;
    if (c.tolerance != 0.0) std::cout << "  tol=" << c.tolerance;
    if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
    std::cout << "\n";
  };
  std::cout << "verification checks:\n";
  line(rep.volume_identity);
  line(rep.pullback);
  line(rep.orthogonality);
  line(rep.reduction);
  line(rep.descent_strict);
  line(rep.descent_late);
  line(rep.deviation.result);
  std::cout << "  curvature trace estimate: " << rep.curvature_trace_estimate
            << "\n";

  write_theory_json((dir / "theory_report.json").string(), rep, config_hash(cfg));
  return rep.all_pass() ? kOk : kCheckFailed;
}

int cmd_plot(const ExperimentConfig& cfg,
             const std::vector<std::string>& sample_files,
             const std::string& out_override) {
  if (sample_files.empty()) {
    std::cerr << "plot: no sample files given\n";
    return kUsage;
  }
  const fs::path dir =
      out_override.empty() ? fs::path(cfg.outputs.directory) : fs::path(out_override);
  fs::create_directories(dir);
  for (const std::string& f : sample_files) {
    const SamplesFile sf = read_samples_csv(f);
    const auto panels =
        snapshot_panels(sf.by_step, cfg.problem.gmm.means, cfg.sampler.steps);
    const fs::path out = dir / (fs::path(f).stem().string() + ".svg");
    write_svg(out.string(), panels);
    std::cout << "plot: wrote " << out.string() << "\n";
  }
  return kOk;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Diversity-steered flow sampling toolkit"};
  app.require_subcommand(1);

  std::string config_path, method_str = "oscar", only, out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> files;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());

  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--config", config_path, "experiment JSON file");
    if (required) opt->required();
  };

  CLI::App* train = app.add_subcommand("train", "fit the velocity model");
  add_config(train, true);
  train->add_option("--out", out, "checkpoint output path");

  CLI::App* sample = app.add_subcommand("sample", "run the sampler over seeds");
  add_config(sample, false);
  sample->add_option("--method", method_str, "oscar | baseline");
  sample->add_option("--seeds", seeds, "override the config seed list");
  sample->add_option("--jobs", jobs, "worker threads");
  sample->add_option("--out", out, "output directory");

  CLI::App* metrics = app.add_subcommand("metrics", "score sample CSV files");
  add_config(metrics, false);
  metrics->add_option("files", files, "sample CSV files")->required();
  metrics->add_option("--out", out, "output directory");

  CLI::App* verify = app.add_subcommand("verify", "run the identity checks");
  add_config(verify, false);
  verify->add_option("--only", only, "run a single check by name");
  verify->add_option("--out", out, "output directory");

  CLI::App* plot = app.add_subcommand("plot", "render sample CSVs to SVG");
  add_config(plot, false);
  plot->add_option("files", files, "sample/snapshot CSV files")->required();
  plot->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    const ExperimentConfig cfg =
        config_path.empty() ? default_experiment() : load_experiment(config_path);
    if (train->parsed()) return cmd_train(cfg, out);
    if (sample->parsed()) {
      Method m;
      if (method_str == "oscar") {
        m = Method::oscar;
      } else if (method_str == "baseline") {
        m = Method::baseline;
      } else {
        std::cerr << "sample: unknown method '" << method_str << "'\n";
        return kUsage;
      }
      return cmd_sample(cfg, m, seeds, jobs, out);
    }
    if (metrics->parsed()) return cmd_metrics(cfg, files, out);
    if (verify->parsed()) return cmd_verify(cfg, only, out);
    if (plot->parsed()) return cmd_plot(cfg, files, out);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}

}  // namespace oscar::cli
