#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "cle/feature_io.hpp"
#include "cle/learner.hpp"
#include "cle/pq.hpp"
#include "cle/replay_buffer.hpp"

namespace cle {

// One-hidden-layer rectifier head with a softmax output row per known class.
// Output rows are zero-initialized when a class first appears.
class PlasticHead {
 public:
  PlasticHead(int dim, int hidden, std::mt19937_64& rng);

  int dim() const { return dim_; }
  int hidden() const { return hidden_; }
  int num_rows() const { return static_cast<int>(class_of_row_.size()); }
  bool knows(int label) const;
  int row_of(int label) const;
  int ensure_class(int label);
  std::vector<int> known_classes() const;

  struct Grads {
    double loss = 0.0;
    std::vector<double> gw1, gb1, gw2, gb2;
  };

  // Mean soft-label cross-entropy over a batch. x: bsz × dim, targets: bsz ×
  // num_rows() (rows of nonnegative weights summing to 1).
  Grads loss_grad(const double* x, const double* targets, int bsz) const;
  double loss_only(const double* x, const double* targets, int bsz) const;
  void apply(const Grads& g, double lr);

  void score_into(std::span<const float> z, std::span<double> out) const;

  std::vector<double>& w1() { return w1_; }
  std::vector<double>& b1() { return b1_; }
  std::vector<double>& w2() { return w2_; }
  std::vector<double>& b2() { return b2_; }
  const std::vector<double>& w1() const { return w1_; }
  const std::vector<double>& b1() const { return b1_; }
  const std::vector<double>& w2() const { return w2_; }
  const std::vector<double>& b2() const { return b2_; }

  void save(std::ostream& os) const;
  static PlasticHead load(std::istream& is);

 private:
  PlasticHead() = default;
  void forward(const double* x, int bsz, std::vector<double>& pre_hidden, std::vector<double>& hidden,
               std::vector<double>& probs) const;

  int dim_ = 0;
  int hidden_ = 0;
  std::vector<double> w1_, b1_;  // hidden × dim, hidden
  std::vector<double> w2_, b2_;  // rows × hidden, rows
  std::vector<int> row_of_class_;
  std::vector<int> class_of_row_;
};

struct MixedExample {
  std::vector<double> v;
  std::vector<std::pair<int, double>> soft;  // sparse soft label, weights sum to 1
};

MixedExample mix_pair(std::span<const double> v1, int y1, std::span<const double> v2, int y2, double lambda);

// Random pairing without replacement; each pair becomes one convex blend with
// λ ~ Beta(alpha, alpha). An odd leftover passes through unmixed.
std::vector<MixedExample> mixup_batch(const std::vector<std::pair<std::vector<double>, int>>& items, double alpha,
                                      std::mt19937_64& rng);

struct RemindConfig {
  int pq_subspaces = 32;
  int pq_codebook_size = 256;
  std::size_t buffer_capacity = 959665;
  int replay_samples = 50;
  double mixup_alpha = 0.1;  // 0 disables
  double learning_rate = 0.1;
  int hidden_units = 256;
  int warm_epochs = 10;
  int warm_batch_size = 256;
  PqTrainOptions pq_opts;
  std::uint64_t seed = 0;
};

struct RemindStepStats {
  std::size_t replayed = 0;   // codes sampled from the buffer
  std::size_t assembled = 0;  // 1 + replayed, before augmentation
  std::size_t trained = 0;    // rows in the gradient batch after mixup
};

inline constexpr std::size_t kCodeBufferHeaderBytes = 28;

// REMIND-style learner: PQ-compressed replay plus a plastic head trained on
// reconstructed features. Prediction runs on the raw input and never touches
// the buffer.
class RemindLearner final : public OnlineLearner {
 public:
  RemindLearner(const FeatureDataset& pretrain, const RemindConfig& config);

  RemindStepStats step(std::span<const float> z, int label);

  const RemindConfig& config() const { return config_; }
  const PqModel& pq() const { return pq_; }
  const PlasticHead& head() const { return head_; }
  const ReplayBuffer<PqCode>& buffer() const { return buffer_; }

  // OnlineLearner
  void observe(std::span<const float> z, int label) override { step(z, label); }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }
  void prepare_for_eval() override {}
  void score_into(std::span<const float> z, std::span<double> out) const override { head_.score_into(z, out); }
  std::vector<int> known_classes() const override { return head_.known_classes(); }

  void save(std::ostream& os) const;
  static RemindLearner load(std::istream& is);

 private:
  RemindLearner(RemindConfig config, PqModel pq, PlasticHead head);

  RemindConfig config_;
  PqModel pq_;
  PlasticHead head_;
  ReplayBuffer<PqCode> buffer_;
  std::mt19937_64 rng_;
};

// Buffer wire format: "RBUF", u32 version, u64 capacity, u32 code length m,
// u64 count, then count × [u32 label][m bytes]. Exactly
// kCodeBufferHeaderBytes + count·(m+4) bytes.
void save_code_buffer(const ReplayBuffer<PqCode>& buffer, int code_len, std::ostream& os);
ReplayBuffer<PqCode> load_code_buffer(int expected_code_len, std::istream& is);

}  // namespace cle
