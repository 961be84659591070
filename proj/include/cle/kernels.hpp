#pragma once

#include <cstdint>

// Dense kernels behind the learners. Every kernel exists twice: a plain serial
// reference under kernels::serial and an OpenMP version under kernels::openmp.
// The two are element-wise identical by construction: each output element is
// produced by exactly one thread with a fixed accumulation order, so results
// do not depend on the thread count. Top-level functions dispatch on the
// active backend.

namespace cle::kernels {

enum class Backend { kSerial, kOpenMp };

Backend active_backend();
void set_backend(Backend b);
bool openmp_compiled();
int thread_count();

// s (n×n, row-major, symmetric) += w * d dᵀ
void add_scaled_outer(double* s, const double* d, double w, int n);

// out[r] = bias[r] + Σ_c w[r*cols+c] * x[c]; bias may be null
void affine(const double* w, const double* bias, int rows, int cols, const double* x, double* out);

// out[b*rows+r] = bias[r] + Σ_c w[r*cols+c] * x[b*cols+c]
void affine_batch(const double* w, const double* bias, int rows, int cols, const double* x, int bsz, double* out);

// out[b*cols+c] = Σ_r w[r*cols+c] * v[b*rows+r]   (Wᵀ v per batch row)
void matmul_at(const double* w, int rows, int cols, const double* v, int bsz, double* out);

// gw[r*d+j] += Σ_b delta[b*r_dim+r] * x[b*d+j]; gb[r] += Σ_b delta[b*r_dim+r]
void accum_outer_rows(const double* delta, const double* x, int bsz, int r_dim, int d, double* gw, double* gb);

// Inverse of a symmetric positive definite matrix via Cholesky; the result is
// exactly symmetric. Returns false if a pivot fails. cond_est (optional)
// receives (max diag L / min diag L)² over the rows factored so far.
bool spd_inverse(const double* a, int n, double* inv, double* cond_est);

// For each point the index of the L2-nearest centroid (lowest index on exact
// ties). sqdist (optional) receives the per-point squared distance. Returns
// the summed objective, accumulated in point order.
double assign_nearest(const float* pts, int n, const float* cents, int s, int d, std::uint8_t* codes, double* sqdist);

namespace serial {
void add_scaled_outer(double* s, const double* d, double w, int n);
void affine(const double* w, const double* bias, int rows, int cols, const double* x, double* out);
void affine_batch(const double* w, const double* bias, int rows, int cols, const double* x, int bsz, double* out);
void matmul_at(const double* w, int rows, int cols, const double* v, int bsz, double* out);
void accum_outer_rows(const double* delta, const double* x, int bsz, int r_dim, int d, double* gw, double* gb);
bool spd_inverse(const double* a, int n, double* inv, double* cond_est);
double assign_nearest(const float* pts, int n, const float* cents, int s, int d, std::uint8_t* codes, double* sqdist);
}  // namespace serial

namespace openmp {
void add_scaled_outer(double* s, const double* d, double w, int n);
void affine(const double* w, const double* bias, int rows, int cols, const double* x, double* out);
void affine_batch(const double* w, const double* bias, int rows, int cols, const double* x, int bsz, double* out);
void matmul_at(const double* w, int rows, int cols, const double* v, int bsz, double* out);
void accum_outer_rows(const double* delta, const double* x, int bsz, int r_dim, int d, double* gw, double* gb);
bool spd_inverse(const double* a, int n, double* inv, double* cond_est);
double assign_nearest(const float* pts, int n, const float* cents, int s, int d, std::uint8_t* codes, double* sqdist);
}  // namespace openmp

}  // namespace cle::kernels
