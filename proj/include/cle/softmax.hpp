#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "cle/learner.hpp"
#include "cle/replay_buffer.hpp"

namespace cle {

struct LossGrad {
  double loss = 0.0;
  std::vector<double> gw;  // rows × dim, row order = head row order
  std::vector<double> gb;  // rows
};

// Linear softmax classifier with rows allocated per class as classes appear.
class SoftmaxHead : public Scorer {
 public:
  explicit SoftmaxHead(int dim, double learning_rate = 0.1);

  int dim() const { return dim_; }
  double learning_rate() const { return lr_; }
  int num_rows() const { return static_cast<int>(class_of_row_.size()); }
  bool knows(int label) const;
  int row_of(int label) const;
  int class_of_row(int row) const { return class_of_row_[static_cast<std::size_t>(row)]; }
  // Allocates a zero row/bias for an unseen class; returns the row.
  int ensure_class(int label);

  std::span<const double> weights() const { return w_; }
  std::span<const double> bias() const { return b_; }

  // Mean cross-entropy over a batch (x: bsz × dim doubles, hard labels) and
  // its exact gradients. Labels must already be known to the head.
  LossGrad loss_grad(const double* x, std::span<const int> labels, int bsz) const;
  // grad step: W -= lr (gw + weight_decay·W), b -= lr gb
  void apply(const LossGrad& g, double lr, double weight_decay = 0.0);

  int predict(std::span<const float> z) const;  // argmax, lowest id on ties

  // Scorer
  void score_into(std::span<const float> z, std::span<double> out) const override;
  std::vector<int> known_classes() const override;

  void save(std::ostream& os) const;
  static SoftmaxHead load(std::istream& is);

 private:
  friend class ReplaySoftmax;
  int dim_;
  double lr_;
  std::vector<double> w_;            // rows × dim
  std::vector<double> b_;
  std::vector<int> row_of_class_;    // -1 when unknown
  std::vector<int> class_of_row_;
};

// Softmax probabilities of logits in place (stable, max-shifted).
void softmax_inplace(std::span<double> logits);

struct ReplayStepStats {
  std::size_t replayed = 0;
  std::size_t batch = 0;  // 1 + replayed
};

// Online softmax with replay: each incoming example is trained together with
// up to 50 uniformly sampled buffered vectors, then inserted into the buffer.
class ReplaySoftmax final : public OnlineLearner {
 public:
  static constexpr std::size_t kReplaySamples = 50;
  static constexpr std::size_t kDefaultCapacity = 735000;

  ReplaySoftmax(int dim, double learning_rate = 0.1, std::size_t capacity = kDefaultCapacity,
                std::uint64_t seed = 0);

  ReplayStepStats step(std::span<const float> z, int label);

  const SoftmaxHead& head() const { return head_; }
  const ReplayBuffer<std::vector<float>>& buffer() const { return buffer_; }
  ReplayBuffer<std::vector<float>>& buffer() { return buffer_; }

  // OnlineLearner
  void observe(std::span<const float> z, int label) override { step(z, label); }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }
  void score_into(std::span<const float> z, std::span<double> out) const override { head_.score_into(z, out); }
  std::vector<int> known_classes() const override { return head_.known_classes(); }

  void save(std::ostream& os) const;
  static ReplaySoftmax load(std::istream& is);

 private:
  SoftmaxHead head_;
  ReplayBuffer<std::vector<float>> buffer_;
  std::mt19937_64 rng_;
};

}  // namespace cle
