#include "cle/pq.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "cle/bytes.hpp"
#include "cle/kernels.hpp"
#include "cle/seeds.hpp"

namespace cle {

namespace {

// One sub-block's k-means. Slices are n × sd contiguous; centroids written to
// `cents` (s × sd). Returns the objective after each assignment.
std::vector<double> kmeans_subblock(const std::vector<float>& slices, int n, int sd, int s, std::uint64_t seed,
                                    const PqTrainOptions& opts, float* cents) {
  std::mt19937_64 rng(seed);

  // Distinct slice values, by first occurrence in lexicographic order.
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  auto slice_less = [&](int a, int b) {
    const float* pa = slices.data() + static_cast<std::size_t>(a) * sd;
    const float* pb = slices.data() + static_cast<std::size_t>(b) * sd;
    return std::lexicographical_compare(pa, pa + sd, pb, pb + sd);
  };
  auto slice_eq = [&](int a, int b) {
    const float* pa = slices.data() + static_cast<std::size_t>(a) * sd;
    const float* pb = slices.data() + static_cast<std::size_t>(b) * sd;
    return std::equal(pa, pa + sd, pb);
  };
  std::sort(idx.begin(), idx.end(), slice_less);
  std::vector<int> distinct;
  for (int i : idx)
    if (distinct.empty() || !slice_eq(distinct.back(), i)) distinct.push_back(i);

  auto copy_slice = [&](int src, int centroid) {
    std::copy_n(slices.data() + static_cast<std::size_t>(src) * sd, sd,
                cents + static_cast<std::size_t>(centroid) * sd);
  };

  if (static_cast<int>(distinct.size()) >= s) {
    // Seeded sample of s distinct slices (partial Fisher-Yates).
    for (int i = 0; i < s; ++i) {
      const std::size_t j =
          std::uniform_int_distribution<std::size_t>(i, distinct.size() - 1)(rng);
      std::swap(distinct[static_cast<std::size_t>(i)], distinct[j]);
      copy_slice(distinct[static_cast<std::size_t>(i)], i);
    }
  } else {
    // Too few distinct values: take them all, then duplicate with a seeded
    // jitter that is negligible next to the data spread.
    float lo = slices.empty() ? 0.0f : slices[0], hi = lo;
    for (float v : slices) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double sigma = 1e-6 * std::max(static_cast<double>(hi) - lo, 1e-6);
    std::normal_distribution<double> jitter(0.0, sigma);
    for (int c = 0; c < s; ++c) {
      const int src = distinct[static_cast<std::size_t>(c) % distinct.size()];
      copy_slice(src, c);
      if (c >= static_cast<int>(distinct.size()))
        for (int j = 0; j < sd; ++j) cents[static_cast<std::size_t>(c) * sd + j] += static_cast<float>(jitter(rng));
    }
  }

  std::vector<double> history;
  std::vector<std::uint8_t> assign(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<double> sums(static_cast<std::size_t>(s) * sd);
  std::vector<std::size_t> counts(static_cast<std::size_t>(s));
  double prev = 0.0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const double obj = kernels::serial::assign_nearest(slices.data(), n, cents, s, sd, assign.data(), dist.data());
    history.push_back(obj);
    if (iter > 0 && prev - obj <= opts.rel_tol * prev) break;
    prev = obj;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    for (int i = 0; i < n; ++i) {
      const int c = assign[static_cast<std::size_t>(i)];
      ++counts[static_cast<std::size_t>(c)];
      const float* p = slices.data() + static_cast<std::size_t>(i) * sd;
      double* acc = sums.data() + static_cast<std::size_t>(c) * sd;
      for (int j = 0; j < sd; ++j) acc[j] += p[j];
    }
    for (int c = 0; c < s; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      for (int j = 0; j < sd; ++j)
        cents[static_cast<std::size_t>(c) * sd + j] =
            static_cast<float>(sums[static_cast<std::size_t>(c) * sd + j] * inv);
    }
    // Re-seed each empty cluster to the point currently farthest from its
    // centroid (assignment-step distances; lowest index on ties).
    for (int c = 0; c < s; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) continue;
      int far = 0;
      for (int i = 1; i < n; ++i)
        if (dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
      copy_slice(far, c);
      dist[static_cast<std::size_t>(far)] = 0.0;
    }
  }
  return history;
}

}  // namespace

PqModel pq_train(std::span<const float> data, int dim, int m, int s, std::uint64_t seed,
                 const PqTrainOptions& opts) {
  if (dim < 1 || m < 1 || dim % m != 0)
    throw std::invalid_argument("pq: dim " + std::to_string(dim) + " not divisible by m " + std::to_string(m));
  if (s < 1 || s > 256) throw std::invalid_argument("pq: codebook size must be in [1, 256]");
  if (data.empty() || data.size() % static_cast<std::size_t>(dim) != 0)
    throw std::invalid_argument("pq: training data must be a nonempty multiple of dim");
  const int n = static_cast<int>(data.size() / static_cast<std::size_t>(dim));

  PqModel model;
  model.dim = dim;
  model.num_subspaces = m;
  model.codebook_size = s;
  const int sd = model.sub_dim();
  model.codebooks.assign(static_cast<std::size_t>(m) * s * sd, 0.0f);
  model.objective_history.resize(static_cast<std::size_t>(m));

  // Sub-blocks are independent; each owns its seed, so the parallel schedule
  // cannot change the result.
#pragma omp parallel for schedule(dynamic)
  for (int sub = 0; sub < m; ++sub) {
    std::vector<float> slices(static_cast<std::size_t>(n) * sd);
    for (int i = 0; i < n; ++i)
      std::copy_n(data.data() + static_cast<std::size_t>(i) * dim + static_cast<std::size_t>(sub) * sd, sd,
                  slices.data() + static_cast<std::size_t>(i) * sd);
    float* cents = model.codebooks.data() + static_cast<std::size_t>(sub) * s * sd;
    model.objective_history[static_cast<std::size_t>(sub)] =
        kmeans_subblock(slices, n, sd, s, derive_seed(seed, "pq-sub-" + std::to_string(sub)), opts, cents);
  }

  for (float v : model.codebooks)
    if (!std::isfinite(v)) throw std::runtime_error("pq: non-finite centroid after training");
  model.trained = true;
  return model;
}

PqCode pq_encode(const PqModel& model, std::span<const float> v) {
  if (!model.trained) throw std::logic_error("pq: encode with untrained model");
  if (v.size() != static_cast<std::size_t>(model.dim)) throw std::invalid_argument("pq: encode dim mismatch");
  const int sd = model.sub_dim();
  PqCode code(static_cast<std::size_t>(model.num_subspaces));
  for (int sub = 0; sub < model.num_subspaces; ++sub) {
    double dist = 0.0;
    kernels::serial::assign_nearest(v.data() + static_cast<std::size_t>(sub) * sd, 1,
                                    model.codebooks.data() + static_cast<std::size_t>(sub) * model.codebook_size * sd,
                                    model.codebook_size, sd, &code[static_cast<std::size_t>(sub)], &dist);
  }
  return code;
}

std::vector<float> pq_decode(const PqModel& model, const PqCode& code) {
  if (!model.trained) throw std::logic_error("pq: decode with untrained model");
  if (code.size() != static_cast<std::size_t>(model.num_subspaces))
    throw std::invalid_argument("pq: code length mismatch");
  const int sd = model.sub_dim();
  std::vector<float> out(static_cast<std::size_t>(model.dim));
  for (int sub = 0; sub < model.num_subspaces; ++sub) {
    if (code[static_cast<std::size_t>(sub)] >= model.codebook_size)
      throw std::invalid_argument("pq: code entry " + std::to_string(code[static_cast<std::size_t>(sub)]) +
                                  " >= codebook size " + std::to_string(model.codebook_size));
    const auto c = model.centroid(sub, code[static_cast<std::size_t>(sub)]);
    std::copy(c.begin(), c.end(), out.begin() + static_cast<std::size_t>(sub) * sd);
  }
  return out;
}

double pq_reconstruction_error(const PqModel& model, std::span<const float> data) {
  if (data.empty() || data.size() % static_cast<std::size_t>(model.dim) != 0)
    throw std::invalid_argument("pq: reconstruction input must be a nonempty multiple of dim");
  const int n = static_cast<int>(data.size() / static_cast<std::size_t>(model.dim));
  std::vector<double> err(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const std::span<const float> v{data.data() + static_cast<std::size_t>(i) * model.dim,
                                   static_cast<std::size_t>(model.dim)};
    const auto rec = pq_decode(model, pq_encode(model, v));
    double acc = 0.0;
    for (int j = 0; j < model.dim; ++j) {
      const double d = static_cast<double>(v[static_cast<std::size_t>(j)]) - rec[static_cast<std::size_t>(j)];
      acc += d * d;
    }
    err[static_cast<std::size_t>(i)] = acc;
  }
  double total = 0.0;
  for (double e : err) total += e;
  return total / n;
}

void save_pq(const PqModel& model, std::ostream& os) {
  bytes::Writer w{os};
  w.magic("PQMD");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(model.dim));
  w.u32(static_cast<std::uint32_t>(model.num_subspaces));
  w.u32(static_cast<std::uint32_t>(model.codebook_size));
  for (float v : model.codebooks) w.f32(v);
  if (!os) throw std::runtime_error("pq: snapshot write failure");
}

PqModel load_pq(std::istream& is) {
  bytes::Reader r{is};
  r.expect_magic("PQMD", "pq");
  r.expect_version(1, "pq");
  PqModel model;
  model.dim = static_cast<int>(r.u32());
  model.num_subspaces = static_cast<int>(r.u32());
  model.codebook_size = static_cast<int>(r.u32());
  if (model.dim < 1 || model.num_subspaces < 1 || model.dim % model.num_subspaces != 0 ||
      model.codebook_size < 1 || model.codebook_size > 256)
    throw std::runtime_error("pq: corrupt snapshot header");
  model.codebooks.resize(static_cast<std::size_t>(model.num_subspaces) * model.codebook_size * model.sub_dim());
  for (auto& v : model.codebooks) v = r.f32();
  model.trained = true;
  return model;
}

}  // namespace cle
