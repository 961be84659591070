#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cle/metrics.hpp"

namespace cle {

// Flat key=value experiment configuration. Every key has a registered default;
// unknown keys are rejected. The resolved table (defaults plus file plus
// overrides) is echoed into the report so each number is re-derivable.
class ExperimentConfig {
 public:
  ExperimentConfig();  // defaults only
  static ExperimentConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& key_equals_value);

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  bool is_set(const std::string& key) const;  // non-empty

  std::vector<std::pair<std::string, std::string>> echo() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;  // registry order
};

struct RunOptions {
  bool init_only = false;                         // stop after the init phase, write the snapshot
  bool resume = false;                            // skip init, load the snapshot
  std::optional<std::filesystem::path> state_path;
};

// Full protocol: split classes, offline-init the learner on the pre-train
// subset, stream the whole dataset one example at a time (pre-train classes
// first in class-incremental mode), evaluate at checkpoints, and write
// report.json plus curve.csv into output_dir. With init_only the run stops
// after writing the learner snapshot and returns an empty report.
RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

}  // namespace cle
