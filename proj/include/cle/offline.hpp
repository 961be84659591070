#pragma once

#include <cstdint>
#include <vector>

#include "cle/feature_io.hpp"
#include "cle/learner.hpp"
#include "cle/softmax.hpp"

namespace cle {

struct OfflineTrainConfig {
  int epochs = 100;
  int batch_size = 256;
  double learning_rate = 0.1;
  std::vector<int> decay_epochs = {60, 80};
  double decay_factor = 10.0;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
};

// Learning rate in effect during a 1-based epoch: the base rate divided by
// decay_factor once per decay epoch already reached.
double lr_at_epoch(const OfflineTrainConfig& cfg, int epoch);

// Multi-epoch seeded-shuffle minibatch SGD on cross-entropy plus
// (weight_decay/2)·‖W‖² (bias undecayed). Rows for all dataset classes are
// allocated up front.
SoftmaxHead train_linear_offline(const FeatureDataset& train, const OfflineTrainConfig& cfg);

// Fraction of examples whose true label ranks among the k best scores, with
// ties ordered by lowest class id. A non-null filter restricts evaluation to
// examples whose label is flagged in it.
double evaluate_topk(Scorer& scorer, const FeatureDataset& eval, int k, const std::vector<char>* class_filter = nullptr);

}  // namespace cle
