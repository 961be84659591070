#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cle {

// Labeled embedding vectors, stored row-major. Example order carries no
// meaning; presentation order is imposed by a StreamPlan.
struct FeatureDataset {
  std::uint32_t dim = 0;
  std::uint32_t num_classes = 0;
  std::vector<std::int32_t> labels;
  std::vector<float> features;  // size() * dim

  std::size_t size() const { return labels.size(); }
  std::span<const float> vec(std::size_t i) const { return {features.data() + i * dim, dim}; }
  bool operator==(const FeatureDataset&) const = default;
};

struct SyntheticSpec {
  std::uint32_t num_classes = 0;
  std::uint32_t dim = 0;
  std::uint32_t examples_per_class = 0;
  double class_separation = 1.0;  // distance scale between class means
  double noise_scale = 1.0;       // isotropic within-class stddev
  std::uint64_t seed = 0;
};

// FSET, little-endian: "FSET", u32 version=1, u32 n, u32 dim, u32 classes,
// then n records of [u32 label][dim × f32]. No padding, no trailing bytes.
inline constexpr std::size_t kFsetHeaderBytes = 20;

FeatureDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const FeatureDataset& ds, const std::filesystem::path& path);

// Class k mean = class_separation × u_k for a seeded unit vector u_k; samples
// add noise_scale × standard normal per coordinate. Same spec, same bytes.
FeatureDataset gen_synthetic_gaussian(const SyntheticSpec& spec);

// Held-out draw from the same class means as `spec` (means come from
// spec.seed exactly as in gen_synthetic_gaussian) with fresh noise.
FeatureDataset gen_synthetic_heldout(const SyntheticSpec& spec, std::uint32_t examples_per_class,
                                     std::uint64_t noise_seed);

// Examples whose label lies in `classes` (order preserved).
FeatureDataset subset_by_class(const FeatureDataset& ds, std::span<const int> classes);

}  // namespace cle
