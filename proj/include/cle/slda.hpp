#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cle/feature_io.hpp"
#include "cle/learner.hpp"

namespace cle {

struct SldaConfig {
  enum class Init { kZeros, kIdentity };
  double shrinkage = 1e-4;
  bool covariance_plastic = true;
  Init init = Init::kZeros;
};

struct SldaPrediction {
  int label = -1;
  std::vector<double> scores;  // indexed by class id; -inf for untrained classes
};

// Streaming LDA over fixed embeddings: per-class running means plus one shared
// covariance. Classifies by the highest linear Gaussian score under the
// shrinkage-regularized precision.
//
// Covariance recurrence: with pre-update per-class count c and global count t,
//   Δ = (c/(c+1)) (z-μ)(z-μ)ᵀ,   Σ ← (t·Σ + Δ)/(t+1)
// which makes t·Σ the running pooled within-class scatter: after any update
// sequence Σ equals the batch pooled (biased) covariance taken with the final
// class means, in any order.
class SldaState final : public OnlineLearner {
 public:
  explicit SldaState(int dim, const SldaConfig& config = {});

  // Batch statistics of a pre-train set; requires a fresh (never updated) state.
  void fit_base(const FeatureDataset& base);

  void update(std::span<const float> z, int label);
  SldaPrediction predict(std::span<const float> z) const;

  // Λ = [(1-ε)Σ + εI]⁻¹, cached until the next update.
  const std::vector<double>& precision() const;

  int dim() const { return dim_; }
  const SldaConfig& config() const { return config_; }
  std::uint64_t total_count() const { return total_; }
  std::uint64_t class_count(int label) const;
  std::span<const double> class_mean(int label) const;
  const std::vector<double>& covariance() const { return cov_; }
  bool precision_cached() const { return !dirty_; }

  // OnlineLearner
  void observe(std::span<const float> z, int label) override { update(z, label); }
  void prepare_for_eval() override { refresh(); }
  void score_into(std::span<const float> z, std::span<double> out) const override;
  std::vector<int> known_classes() const override;

  void save(std::ostream& os) const;
  static SldaState load(std::istream& is);

 private:
  void ensure_class(int label);
  void refresh() const;

  int dim_;
  SldaConfig config_;
  std::vector<double> means_;        // slots × dim
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::vector<double> cov_;          // dim × dim

  // Lazy prediction cache: precision plus per-class weight/bias so a score is
  // one dot product.
  mutable bool dirty_ = true;
  mutable std::vector<double> precision_;
  mutable std::vector<double> weights_;  // slots × dim, Λμ_k
  mutable std::vector<double> biases_;   // -½ μ_kᵀΛμ_k
};

}  // namespace cle
