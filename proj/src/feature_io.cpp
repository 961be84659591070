#include "cle/feature_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "cle/bytes.hpp"

namespace cle {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& msg) {
  throw std::runtime_error(path.string() + ": " + msg);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  in.seekg(0, std::ios::end);
  const auto len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(buf.data()), len);
  if (!in) fail(path, "read failure");
  return buf;
}

}  // namespace

FeatureDataset load_dataset(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  if (buf.size() < kFsetHeaderBytes) fail(path, "truncated payload at offset " + std::to_string(buf.size()));
  if (std::memcmp(buf.data(), kMagic, 4) != 0) fail(path, "bad magic at offset 0");
  const std::uint32_t version = bytes::get_u32(buf.data() + 4);
  if (version != kVersion)
    fail(path, "version mismatch at offset 4: got " + std::to_string(version) + ", want " + std::to_string(kVersion));
  const std::uint32_t n = bytes::get_u32(buf.data() + 8);
  const std::uint32_t dim = bytes::get_u32(buf.data() + 12);
  const std::uint32_t num_classes = bytes::get_u32(buf.data() + 16);
  if (dim == 0) fail(path, "zero dim at offset 12");
  if (num_classes == 0) fail(path, "zero num_classes at offset 16");

  const std::uint64_t record = 4ull + 4ull * dim;
  const std::uint64_t need = kFsetHeaderBytes + record * n;
  if (buf.size() < need) fail(path, "truncated payload at offset " + std::to_string(buf.size()));
  if (buf.size() > need) fail(path, "trailing bytes at offset " + std::to_string(need));

  FeatureDataset ds;
  ds.dim = dim;
  ds.num_classes = num_classes;
  ds.labels.reserve(n);
  ds.features.reserve(static_cast<std::size_t>(n) * dim);
  std::size_t off = kFsetHeaderBytes;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t label = bytes::get_u32(buf.data() + off);
    if (label >= num_classes)
      fail(path, "label " + std::to_string(label) + " >= num_classes " + std::to_string(num_classes) +
                     " at offset " + std::to_string(off));
    off += 4;
    for (std::uint32_t j = 0; j < dim; ++j) {
      const float v = bytes::get_f32(buf.data() + off);
      if (!std::isfinite(v)) fail(path, "non-finite value at offset " + std::to_string(off));
      ds.features.push_back(v);
      off += 4;
    }
    ds.labels.push_back(static_cast<std::int32_t>(label));
  }
  return ds;
}

void save_dataset(const FeatureDataset& ds, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf;
  buf.reserve(kFsetHeaderBytes + ds.size() * (4 + 4ull * ds.dim));
  buf.insert(buf.end(), kMagic, kMagic + 4);
  bytes::put_u32(buf, kVersion);
  bytes::put_u32(buf, static_cast<std::uint32_t>(ds.size()));
  bytes::put_u32(buf, ds.dim);
  bytes::put_u32(buf, ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bytes::put_u32(buf, static_cast<std::uint32_t>(ds.labels[i]));
    for (std::uint32_t j = 0; j < ds.dim; ++j) bytes::put_f32(buf, ds.features[i * ds.dim + j]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failure");
}

namespace {

void check_spec(const SyntheticSpec& spec) {
  if (spec.num_classes == 0 || spec.dim == 0 || spec.examples_per_class == 0)
    throw std::invalid_argument("synthetic spec: num_classes, dim and examples_per_class must be positive");
  if (spec.class_separation < 0 || spec.noise_scale < 0)
    throw std::invalid_argument("synthetic spec: scales must be nonnegative");
}

// Means are drawn first from their own generator state, so the noise_scale=0
// twin of a spec (and the held-out generator) reproduce them exactly.
std::vector<double> draw_class_means(const SyntheticSpec& spec, std::mt19937_64& rng,
                                     std::normal_distribution<double>& gauss) {
  std::vector<double> means(static_cast<std::size_t>(spec.num_classes) * spec.dim);
  for (std::uint32_t k = 0; k < spec.num_classes; ++k) {
    double* mu = means.data() + static_cast<std::size_t>(k) * spec.dim;
    double norm_sq = 0.0;
    for (std::uint32_t j = 0; j < spec.dim; ++j) {
      mu[j] = gauss(rng);
      norm_sq += mu[j] * mu[j];
    }
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-300) {
      mu[0] = spec.class_separation;
      for (std::uint32_t j = 1; j < spec.dim; ++j) mu[j] = 0.0;
    } else {
      for (std::uint32_t j = 0; j < spec.dim; ++j) mu[j] *= spec.class_separation / norm;
    }
  }
  return means;
}

FeatureDataset sample_around_means(const SyntheticSpec& spec, const std::vector<double>& means,
                                   std::uint32_t examples_per_class, std::mt19937_64& rng,
                                   std::normal_distribution<double>& gauss) {
  FeatureDataset ds;
  ds.dim = spec.dim;
  ds.num_classes = spec.num_classes;
  ds.labels.reserve(static_cast<std::size_t>(spec.num_classes) * examples_per_class);
  ds.features.reserve(ds.labels.capacity() * spec.dim);
  for (std::uint32_t k = 0; k < spec.num_classes; ++k) {
    const double* mu = means.data() + static_cast<std::size_t>(k) * spec.dim;
    for (std::uint32_t i = 0; i < examples_per_class; ++i) {
      ds.labels.push_back(static_cast<std::int32_t>(k));
      for (std::uint32_t j = 0; j < spec.dim; ++j)
        ds.features.push_back(static_cast<float>(mu[j] + spec.noise_scale * gauss(rng)));
    }
  }
  return ds;
}

}  // namespace

FeatureDataset gen_synthetic_gaussian(const SyntheticSpec& spec) {
  check_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto means = draw_class_means(spec, rng, gauss);
  return sample_around_means(spec, means, spec.examples_per_class, rng, gauss);
}

FeatureDataset gen_synthetic_heldout(const SyntheticSpec& spec, std::uint32_t examples_per_class,
                                     std::uint64_t noise_seed) {
  check_spec(spec);
  if (examples_per_class == 0) throw std::invalid_argument("synthetic heldout: examples_per_class must be positive");
  std::mt19937_64 mean_rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto means = draw_class_means(spec, mean_rng, gauss);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> fresh(0.0, 1.0);
  return sample_around_means(spec, means, examples_per_class, rng, fresh);
}

FeatureDataset subset_by_class(const FeatureDataset& ds, std::span<const int> classes) {
  std::vector<char> keep(ds.num_classes, 0);
  for (int c : classes) {
    if (c < 0 || static_cast<std::uint32_t>(c) >= ds.num_classes)
      throw std::invalid_argument("subset_by_class: class id " + std::to_string(c) + " out of range");
    keep[static_cast<std::size_t>(c)] = 1;
  }
  FeatureDataset out;
  out.dim = ds.dim;
  out.num_classes = ds.num_classes;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!keep[static_cast<std::size_t>(ds.labels[i])]) continue;
    out.labels.push_back(ds.labels[i]);
    const auto v = ds.vec(i);
    out.features.insert(out.features.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace cle
