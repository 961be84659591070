#include "cle/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cle/bytes.hpp"
#include "cle/kernels.hpp"

namespace cle {

void softmax_inplace(std::span<double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - mx);
    denom += v;
  }
  for (auto& v : logits) v /= denom;
}

SoftmaxHead::SoftmaxHead(int dim, double learning_rate) : dim_(dim), lr_(learning_rate) {
  if (dim < 1) throw std::invalid_argument("softmax head: dim must be >= 1");
}

bool SoftmaxHead::knows(int label) const {
  return label >= 0 && static_cast<std::size_t>(label) < row_of_class_.size() &&
         row_of_class_[static_cast<std::size_t>(label)] >= 0;
}

int SoftmaxHead::row_of(int label) const {
  if (!knows(label)) throw std::out_of_range("softmax head: unknown class " + std::to_string(label));
  return row_of_class_[static_cast<std::size_t>(label)];
}

int SoftmaxHead::ensure_class(int label) {
  if (label < 0) throw std::invalid_argument("softmax head: negative label");
  if (static_cast<std::size_t>(label) >= row_of_class_.size())
    row_of_class_.resize(static_cast<std::size_t>(label) + 1, -1);
  int& row = row_of_class_[static_cast<std::size_t>(label)];
  if (row < 0) {
    row = num_rows();
    class_of_row_.push_back(label);
    w_.resize(w_.size() + static_cast<std::size_t>(dim_), 0.0);
    b_.push_back(0.0);
  }
  return row;
}

LossGrad SoftmaxHead::loss_grad(const double* x, std::span<const int> labels, int bsz) const {
  if (bsz < 1) throw std::invalid_argument("softmax head: empty batch");
  const int k = num_rows();
  std::vector<double> probs(static_cast<std::size_t>(bsz) * k);
  kernels::affine_batch(w_.data(), b_.data(), k, dim_, x, bsz, probs.data());

  std::vector<double> delta(probs.size());
  double loss = 0.0;
  for (int i = 0; i < bsz; ++i) {
    auto row = std::span<double>(probs.data() + static_cast<std::size_t>(i) * k, static_cast<std::size_t>(k));
    softmax_inplace(row);
    const int r = row_of(labels[static_cast<std::size_t>(i)]);
    loss -= std::log(std::max(row[static_cast<std::size_t>(r)], 1e-300));
    for (int j = 0; j < k; ++j)
      delta[static_cast<std::size_t>(i) * k + j] = row[static_cast<std::size_t>(j)] - (j == r ? 1.0 : 0.0);
  }
  const double inv_b = 1.0 / static_cast<double>(bsz);
  for (auto& v : delta) v *= inv_b;

  LossGrad g;
  g.loss = loss * inv_b;
  g.gw.assign(w_.size(), 0.0);
  g.gb.assign(b_.size(), 0.0);
  kernels::accum_outer_rows(delta.data(), x, bsz, k, dim_, g.gw.data(), g.gb.data());
  return g;
}

void SoftmaxHead::apply(const LossGrad& g, double lr, double weight_decay) {
  if (g.gw.size() != w_.size() || g.gb.size() != b_.size())
    throw std::invalid_argument("softmax head: gradient shape mismatch");
  for (std::size_t i = 0; i < w_.size(); ++i) w_[i] -= lr * (g.gw[i] + weight_decay * w_[i]);
  for (std::size_t i = 0; i < b_.size(); ++i) b_[i] -= lr * g.gb[i];
}

void SoftmaxHead::score_into(std::span<const float> z, std::span<double> out) const {
  if (z.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("softmax head: dimension mismatch");
  const int k = num_rows();
  if (k == 0) return;
  std::vector<double> zd(z.begin(), z.end());
  std::vector<double> logits(static_cast<std::size_t>(k));
  kernels::affine(w_.data(), b_.data(), k, dim_, zd.data(), logits.data());
  for (int r = 0; r < k; ++r) {
    const int c = class_of_row_[static_cast<std::size_t>(r)];
    if (static_cast<std::size_t>(c) < out.size()) out[static_cast<std::size_t>(c)] = logits[static_cast<std::size_t>(r)];
  }
}

int SoftmaxHead::predict(std::span<const float> z) const {
  if (num_rows() == 0) throw std::logic_error("softmax head: no known classes");
  int max_id = 0;
  for (int c : class_of_row_) max_id = std::max(max_id, c);
  std::vector<double> scores(static_cast<std::size_t>(max_id) + 1, -std::numeric_limits<double>::infinity());
  score_into(z, scores);
  int best = -1;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (!knows(static_cast<int>(c))) continue;
    if (best < 0 || scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

std::vector<int> SoftmaxHead::known_classes() const {
  std::vector<int> out = class_of_row_;
  std::sort(out.begin(), out.end());
  return out;
}

void SoftmaxHead::save(std::ostream& os) const {
  bytes::Writer w{os};
  w.magic("SMXH");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.f64(lr_);
  w.u32(static_cast<std::uint32_t>(num_rows()));
  for (int r = 0; r < num_rows(); ++r) {
    w.i32(class_of_row_[static_cast<std::size_t>(r)]);
    w.f64(b_[static_cast<std::size_t>(r)]);
    for (int j = 0; j < dim_; ++j) w.f64(w_[static_cast<std::size_t>(r) * dim_ + j]);
  }
  if (!os) throw std::runtime_error("softmax head: snapshot write failure");
}

SoftmaxHead SoftmaxHead::load(std::istream& is) {
  bytes::Reader r{is};
  r.expect_magic("SMXH", "softmax head");
  r.expect_version(1, "softmax head");
  const int dim = static_cast<int>(r.u32());
  const double lr = r.f64();
  SoftmaxHead head(dim, lr);
  const std::uint32_t rows = r.u32();
  for (std::uint32_t i = 0; i < rows; ++i) {
    const int cls = r.i32();
    const int row = head.ensure_class(cls);
    head.b_[static_cast<std::size_t>(row)] = r.f64();
    for (int j = 0; j < dim; ++j) head.w_[static_cast<std::size_t>(row) * dim + j] = r.f64();
  }
  return head;
}

// ---------------------------------------------------------------------------

ReplaySoftmax::ReplaySoftmax(int dim, double learning_rate, std::size_t capacity, std::uint64_t seed)
    : head_(dim, learning_rate), buffer_(capacity), rng_(seed) {}

ReplayStepStats ReplaySoftmax::step(std::span<const float> z, int label) {
  if (z.size() != static_cast<std::size_t>(head_.dim())) throw std::invalid_argument("replay softmax: dim mismatch");
  for (float v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("replay softmax: non-finite input");
  head_.ensure_class(label);

  const std::size_t r = std::min(kReplaySamples, buffer_.size());
  const auto picks = buffer_.sample_without_replacement(r, rng_);

  const int dim = head_.dim();
  const std::size_t bsz = 1 + picks.size();
  std::vector<double> x(bsz * static_cast<std::size_t>(dim));
  std::vector<int> labels(bsz);
  for (int j = 0; j < dim; ++j) x[static_cast<std::size_t>(j)] = z[static_cast<std::size_t>(j)];
  labels[0] = label;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const auto& v = buffer_.payload(picks[i]);
    for (int j = 0; j < dim; ++j) x[(i + 1) * dim + static_cast<std::size_t>(j)] = v[static_cast<std::size_t>(j)];
    labels[i + 1] = buffer_.label(picks[i]);
  }

  const LossGrad g = head_.loss_grad(x.data(), labels, static_cast<int>(bsz));
  head_.apply(g, head_.learning_rate());

  // Insert after the update so an example never replays against itself.
  // Capacity 0 means replay is disabled entirely.
  if (buffer_.capacity() > 0) buffer_.insert(std::vector<float>(z.begin(), z.end()), label, rng_);
  return {picks.size(), bsz};
}

void ReplaySoftmax::save(std::ostream& os) const {
  bytes::Writer w{os};
  w.magic("RSMX");
  w.u32(1);
  head_.save(os);
  w.magic("RBUF");
  w.u32(1);
  w.u64(buffer_.capacity());
  w.u32(static_cast<std::uint32_t>(head_.dim()));
  w.u64(buffer_.size());
  for (std::size_t i = 0; i < buffer_.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(buffer_.label(i)));
    for (float v : buffer_.payload(i)) w.f32(v);
  }
  if (!os) throw std::runtime_error("replay softmax: snapshot write failure");
}

ReplaySoftmax ReplaySoftmax::load(std::istream& is) {
  bytes::Reader r{is};
  r.expect_magic("RSMX", "replay softmax");
  r.expect_version(1, "replay softmax");
  SoftmaxHead head = SoftmaxHead::load(is);
  r.expect_magic("RBUF", "replay buffer");
  r.expect_version(1, "replay buffer");
  const std::uint64_t capacity = r.u64();
  const std::uint32_t dim = r.u32();
  if (dim != static_cast<std::uint32_t>(head.dim())) throw std::runtime_error("replay softmax: buffer dim mismatch");
  ReplaySoftmax learner(head.dim(), head.learning_rate(), capacity, 0);
  learner.head_ = std::move(head);
  const std::uint64_t n = r.u64();
  std::mt19937_64 scratch(0);  // inserts below never evict: n <= capacity by construction
  for (std::uint64_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(r.u32());
    std::vector<float> v(dim);
    for (auto& f : v) f = r.f32();
    learner.buffer_.insert(std::move(v), label, scratch);
  }
  return learner;
}

}  // namespace cle
