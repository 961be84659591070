#include "cle/offline.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cle {

double lr_at_epoch(const OfflineTrainConfig& cfg, int epoch) {
  double lr = cfg.learning_rate;
  for (int d : cfg.decay_epochs)
    if (d <= epoch) lr /= cfg.decay_factor;
  return lr;
}

SoftmaxHead train_linear_offline(const FeatureDataset& train, const OfflineTrainConfig& cfg) {
  if (train.size() == 0) throw std::invalid_argument("offline: empty training set");
  if (cfg.batch_size < 1) throw std::invalid_argument("offline: batch_size must be >= 1");
  for (int d : cfg.decay_epochs)
    if (d < 1 || d > cfg.epochs) throw std::invalid_argument("offline: decay epoch out of range");

  SoftmaxHead head(static_cast<int>(train.dim), cfg.learning_rate);
  for (std::uint32_t c = 0; c < train.num_classes; ++c) head.ensure_class(static_cast<int>(c));

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const int dim = static_cast<int>(train.dim);
  std::vector<double> x;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < train.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size), train.size() - begin);
      x.assign(bsz * static_cast<std::size_t>(dim), 0.0);
      labels.resize(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        const auto v = train.vec(order[begin + i]);
        std::copy(v.begin(), v.end(), x.begin() + i * static_cast<std::size_t>(dim));
        labels[i] = train.labels[order[begin + i]];
      }
      const LossGrad g = head.loss_grad(x.data(), labels, static_cast<int>(bsz));
      head.apply(g, lr, cfg.weight_decay);
    }
  }
  return head;
}

double evaluate_topk(Scorer& scorer, const FeatureDataset& eval, int k, const std::vector<char>* class_filter) {
  if (k < 1) throw std::invalid_argument("evaluate_topk: k must be >= 1");
  if (eval.size() == 0) throw std::invalid_argument("evaluate_topk: empty evaluation set");
  if (!scorer.has_trained_class()) throw std::logic_error("evaluate_topk: scorer has no trained classes");
  scorer.prepare_for_eval();

  const int n = static_cast<int>(eval.size());
  const std::size_t num_classes = eval.num_classes;
  std::int64_t hits = 0, considered = 0;

#pragma omp parallel reduction(+ : hits, considered)
  {
    std::vector<double> scores(num_classes);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      const int y = eval.labels[static_cast<std::size_t>(i)];
      if (class_filter && !(*class_filter)[static_cast<std::size_t>(y)]) continue;
      ++considered;
      std::fill(scores.begin(), scores.end(), -std::numeric_limits<double>::infinity());
      scorer.score_into(eval.vec(static_cast<std::size_t>(i)), scores);
      // Rank of the true label under (score desc, class id asc).
      const double sy = scores[static_cast<std::size_t>(y)];
      int rank = 0;
      for (std::size_t c = 0; c < num_classes; ++c) {
        if (scores[c] > sy || (scores[c] == sy && static_cast<int>(c) < y)) ++rank;
      }
      if (rank < k) ++hits;
    }
  }
  if (considered == 0) throw std::invalid_argument("evaluate_topk: class filter excludes every example");
  return static_cast<double>(hits) / static_cast<double>(considered);
}

}  // namespace cle
