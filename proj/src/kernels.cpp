#include "cle/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cle::kernels {

namespace {

Backend g_backend =
#ifdef _OPENMP
    Backend::kOpenMp;
#else
    Backend::kSerial;
#endif

// Lower Cholesky factor in place; returns rows completed (== n on success).
int cholesky(std::vector<double>& a, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = a[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        acc -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
      if (i == j) {
        if (!(acc > 0.0) || !std::isfinite(acc)) return i;
        a[static_cast<std::size_t>(i) * n + j] = std::sqrt(acc);
      } else {
        a[static_cast<std::size_t>(i) * n + j] = acc / a[static_cast<std::size_t>(j) * n + j];
      }
    }
  }
  return n;
}

double diag_cond_sq(const std::vector<double>& l, int n, int done) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int i = 0; i < done; ++i) {
    const double v = l[static_cast<std::size_t>(i) * n + i];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (done == 0 || lo <= 0.0) return std::numeric_limits<double>::infinity();
  return (hi / lo) * (hi / lo);
}

// Solve L Lᵀ x = e_col into inv column `col`.
void solve_unit_column(const std::vector<double>& l, int n, int col, std::vector<double>& y, double* inv) {
  for (int i = 0; i < n; ++i) {
    double acc = (i == col) ? 1.0 : 0.0;
    for (int k = 0; k < i; ++k) acc -= l[static_cast<std::size_t>(i) * n + k] * y[k];
    y[i] = acc / l[static_cast<std::size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double acc = y[i];
    for (int k = i + 1; k < n; ++k)
      acc -= l[static_cast<std::size_t>(k) * n + i] * inv[static_cast<std::size_t>(k) * n + col];
    inv[static_cast<std::size_t>(i) * n + col] = acc / l[static_cast<std::size_t>(i) * n + i];
  }
}

void symmetrize(double* m, int n) {
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m[static_cast<std::size_t>(i) * n + j] + m[static_cast<std::size_t>(j) * n + i]);
      m[static_cast<std::size_t>(i) * n + j] = v;
      m[static_cast<std::size_t>(j) * n + i] = v;
    }
}

inline double point_sqdist(const float* p, const float* q, int d) {
  double acc = 0.0;
  for (int j = 0; j < d; ++j) {
    const double diff = static_cast<double>(p[j]) - static_cast<double>(q[j]);
    acc += diff * diff;
  }
  return acc;
}

inline void nearest_one(const float* p, const float* cents, int s, int d, std::uint8_t* code, double* dist) {
  double best = std::numeric_limits<double>::infinity();
  int best_c = 0;
  for (int c = 0; c < s; ++c) {
    const double acc = point_sqdist(p, cents + static_cast<std::size_t>(c) * d, d);
    if (acc < best) {
      best = acc;
      best_c = c;
    }
  }
  *code = static_cast<std::uint8_t>(best_c);
  *dist = best;
}

}  // namespace

Backend active_backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------------------
// Serial reference implementations.

namespace serial {

void add_scaled_outer(double* s, const double* d, double w, int n) {
  for (int i = 0; i < n; ++i) {
    const double wi = w * d[i];
    double* row = s + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) row[j] += wi * d[j];
  }
}

void affine(const double* w, const double* bias, int rows, int cols, const double* x, double* out) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    double acc = bias ? bias[r] : 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

void affine_batch(const double* w, const double* bias, int rows, int cols, const double* x, int bsz, double* out) {
  for (int b = 0; b < bsz; ++b)
    affine(w, bias, rows, cols, x + static_cast<std::size_t>(b) * cols, out + static_cast<std::size_t>(b) * rows);
}

void matmul_at(const double* w, int rows, int cols, const double* v, int bsz, double* out) {
  for (int b = 0; b < bsz; ++b) {
    const double* vb = v + static_cast<std::size_t>(b) * rows;
    double* ob = out + static_cast<std::size_t>(b) * cols;
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int r = 0; r < rows; ++r) acc += w[static_cast<std::size_t>(r) * cols + c] * vb[r];
      ob[c] = acc;
    }
  }
}

void accum_outer_rows(const double* delta, const double* x, int bsz, int r_dim, int d, double* gw, double* gb) {
  for (int r = 0; r < r_dim; ++r) {
    double* gwr = gw + static_cast<std::size_t>(r) * d;
    double acc_b = 0.0;
    for (int b = 0; b < bsz; ++b) {
      const double db = delta[static_cast<std::size_t>(b) * r_dim + r];
      acc_b += db;
      const double* xb = x + static_cast<std::size_t>(b) * d;
      for (int j = 0; j < d; ++j) gwr[j] += db * xb[j];
    }
    gb[r] += acc_b;
  }
}

bool spd_inverse(const double* a, int n, double* inv, double* cond_est) {
  std::vector<double> l(a, a + static_cast<std::size_t>(n) * n);
  const int done = cholesky(l, n);
  if (cond_est) *cond_est = diag_cond_sq(l, n, done);
  if (done != n) return false;
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int col = 0; col < n; ++col) solve_unit_column(l, n, col, y, inv);
  symmetrize(inv, n);
  return true;
}

double assign_nearest(const float* pts, int n, const float* cents, int s, int d, std::uint8_t* codes, double* sqdist) {
  std::vector<double> local;
  double* dist = sqdist;
  if (!dist) {
    local.resize(static_cast<std::size_t>(n));
    dist = local.data();
  }
  for (int i = 0; i < n; ++i)
    nearest_one(pts + static_cast<std::size_t>(i) * d, cents, s, d, &codes[i], &dist[i]);
  double obj = 0.0;
  for (int i = 0; i < n; ++i) obj += dist[i];
  return obj;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP implementations. Each output element is owned by one thread and its
// inner accumulation order matches the serial reference, so the two backends
// agree bit for bit regardless of thread count.

namespace openmp {

void add_scaled_outer(double* s, const double* d, double w, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double wi = w * d[i];
    double* row = s + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) row[j] += wi * d[j];
  }
}

void affine(const double* w, const double* bias, int rows, int cols, const double* x, double* out) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    double acc = bias ? bias[r] : 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

void affine_batch(const double* w, const double* bias, int rows, int cols, const double* x, int bsz, double* out) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < bsz; ++b)
    serial::affine(w, bias, rows, cols, x + static_cast<std::size_t>(b) * cols,
                   out + static_cast<std::size_t>(b) * rows);
}

void matmul_at(const double* w, int rows, int cols, const double* v, int bsz, double* out) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < bsz; ++b) {
    const double* vb = v + static_cast<std::size_t>(b) * rows;
    double* ob = out + static_cast<std::size_t>(b) * cols;
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int r = 0; r < rows; ++r) acc += w[static_cast<std::size_t>(r) * cols + c] * vb[r];
      ob[c] = acc;
    }
  }
}

void accum_outer_rows(const double* delta, const double* x, int bsz, int r_dim, int d, double* gw, double* gb) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < r_dim; ++r) {
    double* gwr = gw + static_cast<std::size_t>(r) * d;
    double acc_b = 0.0;
    for (int b = 0; b < bsz; ++b) {
      const double db = delta[static_cast<std::size_t>(b) * r_dim + r];
      acc_b += db;
      const double* xb = x + static_cast<std::size_t>(b) * d;
      for (int j = 0; j < d; ++j) gwr[j] += db * xb[j];
    }
    gb[r] += acc_b;
  }
}

bool spd_inverse(const double* a, int n, double* inv, double* cond_est) {
  // The factorization is sequential; the n unit-column solves are independent.
  std::vector<double> l(a, a + static_cast<std::size_t>(n) * n);
  const int done = cholesky(l, n);
  if (cond_est) *cond_est = diag_cond_sq(l, n, done);
  if (done != n) return false;
#pragma omp parallel
  {
    std::vector<double> y(static_cast<std::size_t>(n));
#pragma omp for schedule(static)
    for (int col = 0; col < n; ++col) solve_unit_column(l, n, col, y, inv);
  }
  symmetrize(inv, n);
  return true;
}

double assign_nearest(const float* pts, int n, const float* cents, int s, int d, std::uint8_t* codes, double* sqdist) {
  std::vector<double> local;
  double* dist = sqdist;
  if (!dist) {
    local.resize(static_cast<std::size_t>(n));
    dist = local.data();
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    nearest_one(pts + static_cast<std::size_t>(i) * d, cents, s, d, &codes[i], &dist[i]);
  double obj = 0.0;
  for (int i = 0; i < n; ++i) obj += dist[i];
  return obj;
}

}  // namespace openmp

// ---------------------------------------------------------------------------
// Dispatchers.

#define CLE_DISPATCH(call) \
  if (g_backend == Backend::kOpenMp) return openmp::call; \
  return serial::call

void add_scaled_outer(double* s, const double* d, double w, int n) { CLE_DISPATCH(add_scaled_outer(s, d, w, n)); }
void affine(const double* w, const double* bias, int rows, int cols, const double* x, double* out) {
  CLE_DISPATCH(affine(w, bias, rows, cols, x, out));
}
void affine_batch(const double* w, const double* bias, int rows, int cols, const double* x, int bsz, double* out) {
  CLE_DISPATCH(affine_batch(w, bias, rows, cols, x, bsz, out));
}
void matmul_at(const double* w, int rows, int cols, const double* v, int bsz, double* out) {
  CLE_DISPATCH(matmul_at(w, rows, cols, v, bsz, out));
}
void accum_outer_rows(const double* delta, const double* x, int bsz, int r_dim, int d, double* gw, double* gb) {
  CLE_DISPATCH(accum_outer_rows(delta, x, bsz, r_dim, d, gw, gb));
}
bool spd_inverse(const double* a, int n, double* inv, double* cond_est) {
  CLE_DISPATCH(spd_inverse(a, n, inv, cond_est));
}
double assign_nearest(const float* pts, int n, const float* cents, int s, int d, std::uint8_t* codes, double* sqdist) {
  CLE_DISPATCH(assign_nearest(pts, n, cents, s, d, codes, sqdist));
}

#undef CLE_DISPATCH

}  // namespace cle::kernels
