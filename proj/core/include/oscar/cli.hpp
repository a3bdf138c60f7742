#pragma once

#include <string>
#include <vector>

#include "oscar/experiment.hpp"

namespace oscar::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;  // verification / runtime failure
inline constexpr int kUsage = 2;        // bad flags, bad config, bad input files

// Subcommand bodies, callable directly from tests. Paths in `cfg.outputs`
// are taken as-is; `out_override`, when non-empty, replaces the output
// directory (or file, for train/plot).
int cmd_train(const ExperimentConfig& cfg, const std::string& out_override);
int cmd_sample(const ExperimentConfig& cfg, Method method,
               const std::vector<std::uint64_t>& seed_override,
               std::size_t jobs, const std::string& out_override);
int cmd_metrics(const ExperimentConfig& cfg,
                const std::vector<std::string>& sample_files,
                const std::string& out_override);
int cmd_verify(const ExperimentConfig& cfg, const std::string& only,
               const std::string& out_override);
int cmd_plot(const ExperimentConfig& cfg,
             const std::vector<std::string>& sample_files,
             const std::string& out_override);

// Full argv dispatch: train | sample | metrics | verify | plot.
int run(int argc, const char* const* argv);

}  // namespace oscar::cli
