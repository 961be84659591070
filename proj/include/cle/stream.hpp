#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cle/feature_io.hpp"

namespace cle {

struct SplitSpec {
  int pretrain_num_classes = 0;
  std::uint64_t seed = 0;
};

struct ClassSplit {
  std::vector<int> pretrain;   // 𝒴, ascending
  std::vector<int> continual;  // 𝒦, ascending
};

enum class StreamMode { kClassIncremental, kIid };

struct StreamCheckpoint {
  std::size_t position;  // examples consumed when the checkpoint fires
  std::size_t progress;  // classes completed (class-incremental) or examples seen (iid)
};

struct StreamPlan {
  StreamMode mode = StreamMode::kClassIncremental;
  std::vector<std::size_t> order;  // permutation of 0..n-1
  std::vector<StreamCheckpoint> checkpoints;
};

// Seeded random choice of pre-train classes; the rest become the continual set.
ClassSplit select_pretrain_classes(int num_classes, const SplitSpec& spec);

// Pre-train class blocks first (seeded block order), then continual class
// blocks; each block is a seeded shuffle of that class's examples. A
// checkpoint fires after every `checkpoint_every` completed classes and at
// stream end.
StreamPlan build_class_incremental_stream(const FeatureDataset& ds, const std::vector<int>& pretrain_classes,
                                          std::uint64_t seed, int checkpoint_every);

// Full seeded shuffle; checkpoints every `checkpoint_every_examples` and at end.
StreamPlan build_iid_stream(const FeatureDataset& ds, std::uint64_t seed, std::size_t checkpoint_every_examples);

// Audit format: one index per line, plus "#checkpoint <progress>" lines.
void write_stream_plan(const StreamPlan& plan, const std::filesystem::path& path);

}  // namespace cle
