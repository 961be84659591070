#include "cle/remind.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cle/bytes.hpp"
#include "cle/kernels.hpp"
#include "cle/seeds.hpp"
#include "cle/softmax.hpp"

namespace cle {

PlasticHead::PlasticHead(int dim, int hidden, std::mt19937_64& rng) : dim_(dim), hidden_(hidden) {
  if (dim < 1 || hidden < 1) throw std::invalid_argument("plastic head: dim and hidden must be >= 1");
  w1_.resize(static_cast<std::size_t>(hidden) * dim);
  b1_.assign(static_cast<std::size_t>(hidden), 0.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / dim));
  for (auto& v : w1_) v = gauss(rng);
}

bool PlasticHead::knows(int label) const {
  return label >= 0 && static_cast<std::size_t>(label) < row_of_class_.size() &&
         row_of_class_[static_cast<std::size_t>(label)] >= 0;
}

int PlasticHead::row_of(int label) const {
  if (!knows(label)) throw std::out_of_range("plastic head: unknown class " + std::to_string(label));
  return row_of_class_[static_cast<std::size_t>(label)];
}

int PlasticHead::ensure_class(int label) {
  if (label < 0) throw std::invalid_argument("plastic head: negative label");
  if (static_cast<std::size_t>(label) >= row_of_class_.size())
    row_of_class_.resize(static_cast<std::size_t>(label) + 1, -1);
  int& row = row_of_class_[static_cast<std::size_t>(label)];
  if (row < 0) {
    row = num_rows();
    class_of_row_.push_back(label);
    w2_.resize(w2_.size() + static_cast<std::size_t>(hidden_), 0.0);
    b2_.push_back(0.0);
  }
  return row;
}

std::vector<int> PlasticHead::known_classes() const {
  std::vector<int> out = class_of_row_;
  std::sort(out.begin(), out.end());
  return out;
}

void PlasticHead::forward(const double* x, int bsz, std::vector<double>& pre_hidden, std::vector<double>& hidden,
                          std::vector<double>& probs) const {
  const int k = num_rows();
  pre_hidden.resize(static_cast<std::size_t>(bsz) * hidden_);
  kernels::affine_batch(w1_.data(), b1_.data(), hidden_, dim_, x, bsz, pre_hidden.data());
  hidden = pre_hidden;
  for (auto& v : hidden) v = v > 0.0 ? v : 0.0;
  probs.resize(static_cast<std::size_t>(bsz) * k);
  kernels::affine_batch(w2_.data(), b2_.data(), k, hidden_, hidden.data(), bsz, probs.data());
  for (int i = 0; i < bsz; ++i)
    softmax_inplace({probs.data() + static_cast<std::size_t>(i) * k, static_cast<std::size_t>(k)});
}

double PlasticHead::loss_only(const double* x, const double* targets, int bsz) const {
  const int k = num_rows();
  std::vector<double> pre, hid, probs;
  forward(x, bsz, pre, hid, probs);
  double loss = 0.0;
  for (int i = 0; i < bsz; ++i)
    for (int j = 0; j < k; ++j) {
      const double q = targets[static_cast<std::size_t>(i) * k + j];
      if (q > 0.0) loss -= q * std::log(std::max(probs[static_cast<std::size_t>(i) * k + j], 1e-300));
    }
  return loss / bsz;
}

PlasticHead::Grads PlasticHead::loss_grad(const double* x, const double* targets, int bsz) const {
  if (bsz < 1) throw std::invalid_argument("plastic head: empty batch");
  const int k = num_rows();
  std::vector<double> pre, hid, probs;
  forward(x, bsz, pre, hid, probs);

  Grads g;
  double loss = 0.0;
  std::vector<double> dlogits(static_cast<std::size_t>(bsz) * k);
  const double inv_b = 1.0 / bsz;
  for (int i = 0; i < bsz; ++i)
    for (int j = 0; j < k; ++j) {
      const std::size_t at = static_cast<std::size_t>(i) * k + j;
      const double q = targets[at];
      if (q > 0.0) loss -= q * std::log(std::max(probs[at], 1e-300));
      dlogits[at] = (probs[at] - q) * inv_b;
    }
  g.loss = loss / bsz;

  g.gw2.assign(w2_.size(), 0.0);
  g.gb2.assign(b2_.size(), 0.0);
  kernels::accum_outer_rows(dlogits.data(), hid.data(), bsz, k, hidden_, g.gw2.data(), g.gb2.data());

  std::vector<double> dhidden(static_cast<std::size_t>(bsz) * hidden_);
  kernels::matmul_at(w2_.data(), k, hidden_, dlogits.data(), bsz, dhidden.data());
  for (std::size_t i = 0; i < dhidden.size(); ++i)
    if (pre[i] <= 0.0) dhidden[i] = 0.0;

  g.gw1.assign(w1_.size(), 0.0);
  g.gb1.assign(b1_.size(), 0.0);
  kernels::accum_outer_rows(dhidden.data(), x, bsz, hidden_, dim_, g.gw1.data(), g.gb1.data());
  return g;
}

void PlasticHead::apply(const Grads& g, double lr) {
  for (std::size_t i = 0; i < w1_.size(); ++i) w1_[i] -= lr * g.gw1[i];
  for (std::size_t i = 0; i < b1_.size(); ++i) b1_[i] -= lr * g.gb1[i];
  for (std::size_t i = 0; i < w2_.size(); ++i) w2_[i] -= lr * g.gw2[i];
  for (std::size_t i = 0; i < b2_.size(); ++i) b2_[i] -= lr * g.gb2[i];
}

void PlasticHead::score_into(std::span<const float> z, std::span<double> out) const {
  if (z.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("plastic head: dimension mismatch");
  const int k = num_rows();
  if (k == 0) return;
  std::vector<double> x(z.begin(), z.end());
  std::vector<double> hid(static_cast<std::size_t>(hidden_));
  kernels::affine(w1_.data(), b1_.data(), hidden_, dim_, x.data(), hid.data());
  for (auto& v : hid) v = v > 0.0 ? v : 0.0;
  std::vector<double> logits(static_cast<std::size_t>(k));
  kernels::affine(w2_.data(), b2_.data(), k, hidden_, hid.data(), logits.data());
  for (int r = 0; r < k; ++r) {
    const int c = class_of_row_[static_cast<std::size_t>(r)];
    if (static_cast<std::size_t>(c) < out.size())
      out[static_cast<std::size_t>(c)] = logits[static_cast<std::size_t>(r)];
  }
}

void PlasticHead::save(std::ostream& os) const {
  bytes::Writer w{os};
  w.magic("PLHD");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u32(static_cast<std::uint32_t>(hidden_));
  for (double v : w1_) w.f64(v);
  for (double v : b1_) w.f64(v);
  w.u32(static_cast<std::uint32_t>(num_rows()));
  for (int r = 0; r < num_rows(); ++r) {
    w.i32(class_of_row_[static_cast<std::size_t>(r)]);
    w.f64(b2_[static_cast<std::size_t>(r)]);
    for (int j = 0; j < hidden_; ++j) w.f64(w2_[static_cast<std::size_t>(r) * hidden_ + j]);
  }
}

PlasticHead PlasticHead::load(std::istream& is) {
  bytes::Reader r{is};
  r.expect_magic("PLHD", "plastic head");
  r.expect_version(1, "plastic head");
  PlasticHead head;
  head.dim_ = static_cast<int>(r.u32());
  head.hidden_ = static_cast<int>(r.u32());
  head.w1_.resize(static_cast<std::size_t>(head.hidden_) * head.dim_);
  head.b1_.resize(static_cast<std::size_t>(head.hidden_));
  for (auto& v : head.w1_) v = r.f64();
  for (auto& v : head.b1_) v = r.f64();
  const std::uint32_t rows = r.u32();
  for (std::uint32_t i = 0; i < rows; ++i) {
    const int cls = r.i32();
    const int row = head.ensure_class(cls);
    head.b2_[static_cast<std::size_t>(row)] = r.f64();
    for (int j = 0; j < head.hidden_; ++j) head.w2_[static_cast<std::size_t>(row) * head.hidden_ + j] = r.f64();
  }
  return head;
}

// ---------------------------------------------------------------------------

MixedExample mix_pair(std::span<const double> v1, int y1, std::span<const double> v2, int y2, double lambda) {
  MixedExample out;
  out.v.resize(v1.size());
  for (std::size_t j = 0; j < v1.size(); ++j) out.v[j] = lambda * v1[j] + (1.0 - lambda) * v2[j];
  if (y1 == y2) {
    out.soft = {{y1, 1.0}};
  } else {
    out.soft = {{y1, lambda}, {y2, 1.0 - lambda}};
  }
  return out;
}

std::vector<MixedExample> mixup_batch(const std::vector<std::pair<std::vector<double>, int>>& items, double alpha,
                                      std::mt19937_64& rng) {
  if (alpha <= 0.0) throw std::invalid_argument("mixup: alpha must be positive");
  if (items.size() < 2) throw std::invalid_argument("mixup: need at least two items");
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);

  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<MixedExample> out;
  out.reserve((items.size() + 1) / 2);
  std::size_t p = 0;
  for (; p + 1 < items.size(); p += 2) {
    const auto& a = items[idx[p]];
    const auto& b = items[idx[p + 1]];
    const double x = gamma(rng), y = gamma(rng);
    const double lambda = (x + y) > 0.0 ? x / (x + y) : 0.5;
    out.push_back(mix_pair(a.first, a.second, b.first, b.second, lambda));
  }
  if (p < items.size()) {
    const auto& a = items[idx[p]];
    out.push_back({a.first, {{a.second, 1.0}}});
  }
  return out;
}

// ---------------------------------------------------------------------------

RemindLearner::RemindLearner(RemindConfig config, PqModel pq, PlasticHead head)
    : config_(std::move(config)), pq_(std::move(pq)), head_(std::move(head)), buffer_(config_.buffer_capacity),
      rng_(config_.seed) {}

RemindLearner::RemindLearner(const FeatureDataset& pretrain, const RemindConfig& config)
    : config_(config), buffer_(config.buffer_capacity), rng_(config.seed) {
  if (pretrain.size() == 0) throw std::invalid_argument("remind: empty pre-train set");
  if (config.buffer_capacity == 0) throw std::invalid_argument("remind: buffer capacity must be positive");

  pq_ = pq_train(pretrain.features, static_cast<int>(pretrain.dim), config.pq_subspaces, config.pq_codebook_size,
                 derive_seed(config.seed, "remind-pq"), config.pq_opts);
  head_ = PlasticHead(static_cast<int>(pretrain.dim), config_.hidden_units, rng_);
  for (std::size_t i = 0; i < pretrain.size(); ++i) head_.ensure_class(pretrain.labels[i]);

  // Encode the whole pre-train set (order-independent, safe to parallelize),
  // then insert sequentially so eviction draws stay reproducible.
  const int n = static_cast<int>(pretrain.size());
  std::vector<PqCode> codes(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) codes[static_cast<std::size_t>(i)] = pq_encode(pq_, pretrain.vec(static_cast<std::size_t>(i)));
  for (int i = 0; i < n; ++i) buffer_.insert(std::move(codes[static_cast<std::size_t>(i)]), pretrain.labels[static_cast<std::size_t>(i)], rng_);

  if (config_.warm_epochs > 0) {
    // Offline warm-up of the head on the PQ reconstructions of the pre-train
    // features, the same views replay will later produce.
    const int dim = static_cast<int>(pretrain.dim);
    const int k = head_.num_rows();
    std::vector<double> recon(static_cast<std::size_t>(n) * dim);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto rec = pq_decode(pq_, pq_encode(pq_, pretrain.vec(static_cast<std::size_t>(i))));
      for (int j = 0; j < dim; ++j) recon[static_cast<std::size_t>(i) * dim + j] = rec[static_cast<std::size_t>(j)];
    }
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const int bsz_max = std::max(1, config_.warm_batch_size);
    std::vector<double> x, q;
    for (int epoch = 0; epoch < config_.warm_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng_);
      for (int begin = 0; begin < n; begin += bsz_max) {
        const int bsz = std::min(bsz_max, n - begin);
        x.assign(static_cast<std::size_t>(bsz) * dim, 0.0);
        q.assign(static_cast<std::size_t>(bsz) * k, 0.0);
        for (int i = 0; i < bsz; ++i) {
          const std::size_t src = order[static_cast<std::size_t>(begin + i)];
          std::copy_n(recon.data() + src * dim, dim, x.data() + static_cast<std::size_t>(i) * dim);
          q[static_cast<std::size_t>(i) * k + head_.row_of(pretrain.labels[src])] = 1.0;
        }
        head_.apply(head_.loss_grad(x.data(), q.data(), bsz), config_.learning_rate);
      }
    }
  }
}

RemindStepStats RemindLearner::step(std::span<const float> z, int label) {
  if (z.size() != static_cast<std::size_t>(pq_.dim)) throw std::invalid_argument("remind: dimension mismatch");
  for (float v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("remind: non-finite input");
  head_.ensure_class(label);

  const std::size_t r =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(0, config_.replay_samples)), buffer_.size());
  const auto picks = buffer_.sample_without_replacement(r, rng_);

  std::vector<std::pair<std::vector<double>, int>> replayed;
  replayed.reserve(picks.size());
  for (std::size_t slot : picks) {
    const auto rec = pq_decode(pq_, buffer_.payload(slot));
    replayed.emplace_back(std::vector<double>(rec.begin(), rec.end()), buffer_.label(slot));
  }

  const int dim = static_cast<int>(pq_.dim);
  const int k = head_.num_rows();
  std::vector<double> x, q;
  auto push_row = [&](std::span<const double> v, const std::vector<std::pair<int, double>>& soft) {
    x.insert(x.end(), v.begin(), v.end());
    q.resize(q.size() + static_cast<std::size_t>(k), 0.0);
    double* qrow = q.data() + q.size() - static_cast<std::size_t>(k);
    for (const auto& [cls, wgt] : soft) qrow[head_.row_of(cls)] += wgt;
  };

  std::vector<double> zd(z.begin(), z.end());
  push_row(zd, {{label, 1.0}});

  std::size_t trained = 1;
  if (config_.mixup_alpha > 0.0 && replayed.size() >= 2) {
    // The incoming example keeps its hard label; only replay gets mixed.
    for (const auto& mixed : mixup_batch(replayed, config_.mixup_alpha, rng_)) {
      push_row(mixed.v, mixed.soft);
      ++trained;
    }
  } else {
    for (const auto& [v, y] : replayed) {
      push_row(v, {{y, 1.0}});
      ++trained;
    }
  }

  head_.apply(head_.loss_grad(x.data(), q.data(), static_cast<int>(trained)), config_.learning_rate);
  buffer_.insert(pq_encode(pq_, z), label, rng_);
  return {picks.size(), 1 + picks.size(), trained};
}

void save_code_buffer(const ReplayBuffer<PqCode>& buffer, int code_len, std::ostream& os) {
  bytes::Writer w{os};
  w.magic("RBUF");
  w.u32(1);
  w.u64(buffer.capacity());
  w.u32(static_cast<std::uint32_t>(code_len));
  w.u64(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(buffer.label(i)));
    w.raw(buffer.payload(i).data(), buffer.payload(i).size());
  }
}

ReplayBuffer<PqCode> load_code_buffer(int expected_code_len, std::istream& is) {
  bytes::Reader r{is};
  r.expect_magic("RBUF", "code buffer");
  r.expect_version(1, "code buffer");
  const std::uint64_t capacity = r.u64();
  const std::uint32_t m = r.u32();
  if (m != static_cast<std::uint32_t>(expected_code_len)) throw std::runtime_error("code buffer: code length mismatch");
  ReplayBuffer<PqCode> buffer(capacity);
  const std::uint64_t n = r.u64();
  std::mt19937_64 scratch(0);
  for (std::uint64_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(r.u32());
    PqCode code(m);
    r.raw(code.data(), m);
    buffer.insert(std::move(code), label, scratch);
  }
  return buffer;
}

void RemindLearner::save(std::ostream& os) const {
  bytes::Writer w{os};
  w.magic("RMND");
  w.u32(1);
  w.u64(config_.buffer_capacity);
  w.i32(config_.replay_samples);
  w.f64(config_.mixup_alpha);
  w.f64(config_.learning_rate);
  w.i32(config_.hidden_units);
  w.i32(config_.warm_epochs);
  w.i32(config_.warm_batch_size);
  w.i32(config_.pq_opts.max_iters);
  w.f64(config_.pq_opts.rel_tol);
  w.u64(config_.seed);
  save_pq(pq_, os);
  head_.save(os);
  save_code_buffer(buffer_, pq_.num_subspaces, os);
  if (!os) throw std::runtime_error("remind: snapshot write failure");
}

RemindLearner RemindLearner::load(std::istream& is) {
  bytes::Reader r{is};
  r.expect_magic("RMND", "remind");
  r.expect_version(1, "remind");
  RemindConfig cfg;
  cfg.buffer_capacity = r.u64();
  cfg.replay_samples = r.i32();
  cfg.mixup_alpha = r.f64();
  cfg.learning_rate = r.f64();
  cfg.hidden_units = r.i32();
  cfg.warm_epochs = r.i32();
  cfg.warm_batch_size = r.i32();
  cfg.pq_opts.max_iters = r.i32();
  cfg.pq_opts.rel_tol = r.f64();
  cfg.seed = r.u64();
  PqModel pq = load_pq(is);
  cfg.pq_subspaces = pq.num_subspaces;
  cfg.pq_codebook_size = pq.codebook_size;
  PlasticHead head = PlasticHead::load(is);
  RemindLearner learner(std::move(cfg), std::move(pq), std::move(head));
  learner.buffer_ = load_code_buffer(learner.pq_.num_subspaces, is);
  return learner;
}

}  // namespace cle
