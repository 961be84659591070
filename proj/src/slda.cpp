#include "cle/slda.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cle/bytes.hpp"
#include "cle/kernels.hpp"

namespace cle {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

SldaState::SldaState(int dim, const SldaConfig& config) : dim_(dim), config_(config) {
  if (dim < 1) throw std::invalid_argument("slda: dim must be >= 1");
  if (config.shrinkage < 0) throw std::invalid_argument("slda: shrinkage must be >= 0");
  cov_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  if (config.init == SldaConfig::Init::kIdentity)
    for (int i = 0; i < dim; ++i) cov_[static_cast<std::size_t>(i) * dim + i] = 1.0;
}

void SldaState::ensure_class(int label) {
  if (label < 0) throw std::invalid_argument("slda: negative label");
  if (static_cast<std::size_t>(label) >= counts_.size()) {
    counts_.resize(static_cast<std::size_t>(label) + 1, 0);
    means_.resize(counts_.size() * static_cast<std::size_t>(dim_), 0.0);
  }
}

void SldaState::fit_base(const FeatureDataset& base) {
  if (total_ != 0) throw std::logic_error("slda: fit_base requires a fresh state");
  if (base.dim != static_cast<std::uint32_t>(dim_)) throw std::invalid_argument("slda: base dim mismatch");
  if (base.size() == 0) return;

  for (std::size_t i = 0; i < base.size(); ++i) {
    const int y = base.labels[i];
    ensure_class(y);
    double* mu = means_.data() + static_cast<std::size_t>(y) * dim_;
    const auto z = base.vec(i);
    for (int j = 0; j < dim_; ++j) mu[j] += z[j];
    ++counts_[static_cast<std::size_t>(y)];
    ++total_;
  }
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    if (counts_[k] == 0) continue;
    double* mu = means_.data() + k * dim_;
    for (int j = 0; j < dim_; ++j) mu[j] /= static_cast<double>(counts_[k]);
  }

  // Pooled biased scatter around the final class means.
  cov_.assign(cov_.size(), 0.0);
  std::vector<double> d(static_cast<std::size_t>(dim_));
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double* mu = means_.data() + static_cast<std::size_t>(base.labels[i]) * dim_;
    const auto z = base.vec(i);
    for (int j = 0; j < dim_; ++j) d[j] = static_cast<double>(z[j]) - mu[j];
    kernels::add_scaled_outer(cov_.data(), d.data(), 1.0, dim_);
  }
  const double inv_t = 1.0 / static_cast<double>(total_);
  for (auto& v : cov_) v *= inv_t;
  dirty_ = true;
}

void SldaState::update(std::span<const float> z, int label) {
  if (z.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("slda: dimension mismatch");
  for (float v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("slda: non-finite input");
  ensure_class(label);

  double* mu = means_.data() + static_cast<std::size_t>(label) * dim_;
  const double c = static_cast<double>(counts_[static_cast<std::size_t>(label)]);
  const double t = static_cast<double>(total_);

  if (config_.covariance_plastic) {
    std::vector<double> d(static_cast<std::size_t>(dim_));
    for (int j = 0; j < dim_; ++j) d[j] = static_cast<double>(z[j]) - mu[j];
    const double scale = t / (t + 1.0);
    for (auto& v : cov_) v *= scale;
    kernels::add_scaled_outer(cov_.data(), d.data(), (c / (c + 1.0)) / (t + 1.0), dim_);
  }

  for (int j = 0; j < dim_; ++j) mu[j] += (static_cast<double>(z[j]) - mu[j]) / (c + 1.0);
  ++counts_[static_cast<std::size_t>(label)];
  ++total_;
  dirty_ = true;
}

void SldaState::refresh() const {
  if (!dirty_) return;
  const std::size_t nn = static_cast<std::size_t>(dim_) * dim_;
  std::vector<double> shrunk(nn);
  const double eps = config_.shrinkage;
  for (std::size_t i = 0; i < nn; ++i) shrunk[i] = (1.0 - eps) * cov_[i];
  for (int i = 0; i < dim_; ++i) shrunk[static_cast<std::size_t>(i) * dim_ + i] += eps;

  precision_.assign(nn, 0.0);
  double cond = 0.0;
  if (!kernels::spd_inverse(shrunk.data(), dim_, precision_.data(), &cond))
    throw std::runtime_error("slda: covariance numerically singular after shrinkage (condition estimate " +
                             std::to_string(cond) + ")");

  weights_.assign(means_.size(), 0.0);
  biases_.assign(counts_.size(), 0.0);
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    if (counts_[k] == 0) continue;
    const double* mu = means_.data() + k * dim_;
    double* w = weights_.data() + k * dim_;
    kernels::affine(precision_.data(), nullptr, dim_, dim_, mu, w);
    double b = 0.0;
    for (int j = 0; j < dim_; ++j) b += mu[j] * w[j];
    biases_[k] = -0.5 * b;
  }
  dirty_ = false;
}

const std::vector<double>& SldaState::precision() const {
  if (total_ == 0) throw std::logic_error("slda: precision requires at least one observation");
  refresh();
  return precision_;
}

void SldaState::score_into(std::span<const float> z, std::span<double> out) const {
  if (dirty_) refresh();
  if (z.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("slda: dimension mismatch");
  std::vector<double> zd(z.begin(), z.end());
  for (std::size_t k = 0; k < counts_.size() && k < out.size(); ++k) {
    if (counts_[k] == 0) continue;
    const double* w = weights_.data() + k * dim_;
    double s = biases_[k];
    for (int j = 0; j < dim_; ++j) s += w[j] * zd[j];
    out[k] = s;
  }
}

SldaPrediction SldaState::predict(std::span<const float> z) const {
  bool any = false;
  for (auto c : counts_) any = any || c > 0;
  if (!any) throw std::logic_error("slda: no trained classes");
  SldaPrediction pred;
  pred.scores.assign(counts_.size(), kNegInf);
  score_into(z, pred.scores);
  for (std::size_t k = 0; k < pred.scores.size(); ++k) {
    if (counts_[k] == 0) continue;
    if (pred.label < 0 || pred.scores[k] > pred.scores[static_cast<std::size_t>(pred.label)])
      pred.label = static_cast<int>(k);
  }
  return pred;
}

std::uint64_t SldaState::class_count(int label) const {
  if (label < 0 || static_cast<std::size_t>(label) >= counts_.size()) return 0;
  return counts_[static_cast<std::size_t>(label)];
}

std::span<const double> SldaState::class_mean(int label) const {
  if (label < 0 || static_cast<std::size_t>(label) >= counts_.size())
    throw std::out_of_range("slda: unknown class " + std::to_string(label));
  return {means_.data() + static_cast<std::size_t>(label) * dim_, static_cast<std::size_t>(dim_)};
}

std::vector<int> SldaState::known_classes() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < counts_.size(); ++k)
    if (counts_[k] > 0) out.push_back(static_cast<int>(k));
  return out;
}

void SldaState::save(std::ostream& os) const {
  bytes::Writer w{os};
  w.magic("SLDA");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.f64(config_.shrinkage);
  w.u32(config_.covariance_plastic ? 1 : 0);
  w.u32(config_.init == SldaConfig::Init::kIdentity ? 1 : 0);
  w.u64(total_);
  w.u32(static_cast<std::uint32_t>(counts_.size()));
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    w.u64(counts_[k]);
    for (int j = 0; j < dim_; ++j) w.f64(means_[k * static_cast<std::size_t>(dim_) + j]);
  }
  for (double v : cov_) w.f64(v);
  if (!os) throw std::runtime_error("slda: snapshot write failure");
}

SldaState SldaState::load(std::istream& is) {
  bytes::Reader r{is};
  r.expect_magic("SLDA", "slda");
  r.expect_version(1, "slda");
  const int dim = static_cast<int>(r.u32());
  SldaConfig cfg;
  cfg.shrinkage = r.f64();
  cfg.covariance_plastic = r.u32() != 0;
  cfg.init = r.u32() != 0 ? SldaConfig::Init::kIdentity : SldaConfig::Init::kZeros;
  SldaState state(dim, cfg);
  state.total_ = r.u64();
  const std::uint32_t slots = r.u32();
  state.counts_.resize(slots);
  state.means_.resize(static_cast<std::size_t>(slots) * dim);
  for (std::uint32_t k = 0; k < slots; ++k) {
    state.counts_[k] = r.u64();
    for (int j = 0; j < dim; ++j) state.means_[static_cast<std::size_t>(k) * dim + j] = r.f64();
  }
  for (auto& v : state.cov_) v = r.f64();
  state.dirty_ = true;
  return state;
}

}  // namespace cle
