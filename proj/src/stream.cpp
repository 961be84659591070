#include "cle/stream.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cle {

namespace {

void push_checkpoint(StreamPlan& plan, std::size_t position, std::size_t progress) {
  // Empty trailing classes can land on an existing position; keep the later
  // progress value so positions stay strictly increasing.
  if (!plan.checkpoints.empty() && plan.checkpoints.back().position == position) {
    plan.checkpoints.back().progress = progress;
    return;
  }
  plan.checkpoints.push_back({position, progress});
}

}  // namespace

ClassSplit select_pretrain_classes(int num_classes, const SplitSpec& spec) {
  if (spec.pretrain_num_classes < 1 || spec.pretrain_num_classes >= num_classes)
    throw std::invalid_argument("pretrain_num_classes must be in [1, num_classes): got " +
                                std::to_string(spec.pretrain_num_classes) + " of " + std::to_string(num_classes));
  std::vector<int> ids(static_cast<std::size_t>(num_classes));
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ClassSplit split;
  split.pretrain.assign(ids.begin(), ids.begin() + spec.pretrain_num_classes);
  split.continual.assign(ids.begin() + spec.pretrain_num_classes, ids.end());
  std::sort(split.pretrain.begin(), split.pretrain.end());
  std::sort(split.continual.begin(), split.continual.end());
  return split;
}

StreamPlan build_class_incremental_stream(const FeatureDataset& ds, const std::vector<int>& pretrain_classes,
                                          std::uint64_t seed, int checkpoint_every) {
  if (checkpoint_every <= 0) throw std::invalid_argument("checkpoint_every must be positive");
  std::vector<char> is_pretrain(ds.num_classes, 0);
  for (int c : pretrain_classes) {
    if (c < 0 || static_cast<std::uint32_t>(c) >= ds.num_classes)
      throw std::invalid_argument("pretrain class " + std::to_string(c) + " not in dataset");
    is_pretrain[static_cast<std::size_t>(c)] = 1;
  }

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::vector<int> pre, cont;
  for (std::uint32_t c = 0; c < ds.num_classes; ++c)
    (is_pretrain[c] ? pre : cont).push_back(static_cast<int>(c));

  std::mt19937_64 rng(seed);
  std::shuffle(pre.begin(), pre.end(), rng);
  std::shuffle(cont.begin(), cont.end(), rng);

  StreamPlan plan;
  plan.mode = StreamMode::kClassIncremental;
  plan.order.reserve(ds.size());
  std::size_t classes_done = 0;
  auto emit_block = [&](int c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    std::shuffle(idx.begin(), idx.end(), rng);
    plan.order.insert(plan.order.end(), idx.begin(), idx.end());
    ++classes_done;
    if (classes_done % static_cast<std::size_t>(checkpoint_every) == 0)
      push_checkpoint(plan, plan.order.size(), classes_done);
  };
  for (int c : pre) emit_block(c);
  for (int c : cont) emit_block(c);

  if (plan.checkpoints.empty() || plan.checkpoints.back().progress != classes_done)
    push_checkpoint(plan, plan.order.size(), classes_done);
  return plan;
}

StreamPlan build_iid_stream(const FeatureDataset& ds, std::uint64_t seed, std::size_t checkpoint_every_examples) {
  if (checkpoint_every_examples == 0) throw std::invalid_argument("checkpoint interval must be positive");
  StreamPlan plan;
  plan.mode = StreamMode::kIid;
  plan.order.resize(ds.size());
  std::iota(plan.order.begin(), plan.order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(plan.order.begin(), plan.order.end(), rng);
  for (std::size_t p = checkpoint_every_examples; p < ds.size(); p += checkpoint_every_examples)
    push_checkpoint(plan, p, p);
  push_checkpoint(plan, ds.size(), ds.size());
  return plan;
}

void write_stream_plan(const StreamPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  std::size_t next_cp = 0;
  for (std::size_t p = 0; p <= plan.order.size(); ++p) {
    while (next_cp < plan.checkpoints.size() && plan.checkpoints[next_cp].position == p) {
      out << "#checkpoint " << plan.checkpoints[next_cp].progress << "\n";
      ++next_cp;
    }
    if (p < plan.order.size()) out << plan.order[p] << "\n";
  }
  if (!out) throw std::runtime_error(path.string() + ": write failure");
}

}  // namespace cle
