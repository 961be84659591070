#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace cle {

using PqCode = std::vector<std::uint8_t>;  // m sub-codes, one byte each

struct PqTrainOptions {
  int max_iters = 25;
  double rel_tol = 1e-4;
};

// Product quantizer: m independent sub-block codebooks of s centroids each,
// learned by seeded Lloyd k-means over the sub-block slices.
struct PqModel {
  int dim = 0;
  int num_subspaces = 0;   // m
  int codebook_size = 0;   // s, at most 256 so codes fit in one byte
  bool trained = false;
  std::vector<float> codebooks;  // m × s × (dim/m)

  // Per sub-block quantization objective after each Lloyd assignment; kept
  // from training for diagnostics and tests. Not serialized.
  std::vector<std::vector<double>> objective_history;

  int sub_dim() const { return dim / num_subspaces; }
  std::span<const float> centroid(int sub, int code) const {
    const std::size_t sd = static_cast<std::size_t>(sub_dim());
    return {codebooks.data() + (static_cast<std::size_t>(sub) * codebook_size + code) * sd, sd};
  }
};

PqModel pq_train(std::span<const float> data, int dim, int m, int s, std::uint64_t seed,
                 const PqTrainOptions& opts = {});

PqCode pq_encode(const PqModel& model, std::span<const float> v);
std::vector<float> pq_decode(const PqModel& model, const PqCode& code);

// Mean of ‖v − decode(encode(v))‖² over the rows of `data`.
double pq_reconstruction_error(const PqModel& model, std::span<const float> data);

void save_pq(const PqModel& model, std::ostream& os);
PqModel load_pq(std::istream& is);

}  // namespace cle
