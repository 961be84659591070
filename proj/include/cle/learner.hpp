#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cle {

// Anything that can score a feature vector against class ids. `out` is sized
// by the caller (dataset num_classes) and pre-filled with -inf; a scorer
// writes entries only for classes it knows. score_into must be safe to call
// concurrently after prepare_for_eval().
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual void prepare_for_eval() {}
  virtual void score_into(std::span<const float> z, std::span<double> out) const = 0;
  virtual std::vector<int> known_classes() const = 0;
  bool has_trained_class() const { return !known_classes().empty(); }
};

// A streaming learner: observes one labeled example at a time.
class OnlineLearner : public Scorer {
 public:
  virtual void observe(std::span<const float> z, int label) = 0;
  // Fresh RNG stream for the online phase; lets an interrupted run resume
  // from a snapshot with identical behavior.
  virtual void reseed(std::uint64_t /*seed*/) {}
};

}  // namespace cle
