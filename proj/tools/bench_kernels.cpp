// Timing comparison of the serial reference kernels against the OpenMP ones
// on sizes representative of a dim-512 embedding run.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "cle/kernels.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = clock_type::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count() / reps;
}

void row(const char* name, double serial_ms, double omp_ms) {
  std::printf("%-24s %10.3f %10.3f %9.2fx\n", name, serial_ms, omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main() {
  namespace k = cle::kernels;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);

  constexpr int dim = 512, classes = 200, batch = 256, hidden = 256;
  constexpr int pts = 20000, cents = 256, sub = 16;

  std::vector<double> sym(dim * dim), d(dim), x(dim);
  std::vector<double> w(static_cast<std::size_t>(classes) * dim), bias(classes), out(classes);
  std::vector<double> bx(static_cast<std::size_t>(batch) * dim), bout(static_cast<std::size_t>(batch) * classes);
  std::vector<double> delta(static_cast<std::size_t>(batch) * classes), gw(w.size()), gb(classes);
  std::vector<double> w2(static_cast<std::size_t>(classes) * hidden), v2(static_cast<std::size_t>(batch) * classes),
      dh(static_cast<std::size_t>(batch) * hidden);
  std::vector<float> p(static_cast<std::size_t>(pts) * sub), c(static_cast<std::size_t>(cents) * sub);
  std::vector<std::uint8_t> codes(pts);
  std::vector<double> spd(dim * dim), inv(dim * dim);

  for (auto& v : d) v = g(rng);
  for (auto& v : x) v = g(rng);
  for (auto& v : w) v = g(rng);
  for (auto& v : bias) v = g(rng);
  for (auto& v : bx) v = g(rng);
  for (auto& v : delta) v = g(rng);
  for (auto& v : w2) v = g(rng);
  for (auto& v : v2) v = g(rng);
  for (auto& v : p) v = static_cast<float>(g(rng));
  for (auto& v : c) v = static_cast<float>(g(rng));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) spd[static_cast<std::size_t>(i) * dim + j] = (i == j) ? dim + g(rng) * 0.1 : 0.1;

  std::printf("threads: %d (OpenMP %s)\n\n", k::thread_count(), k::openmp_compiled() ? "on" : "off");
  std::printf("%-24s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  row("add_scaled_outer 512", time_ms([&] { k::serial::add_scaled_outer(sym.data(), d.data(), 0.5, dim); }, 50),
      time_ms([&] { k::openmp::add_scaled_outer(sym.data(), d.data(), 0.5, dim); }, 50));

  row("affine 200x512", time_ms([&] { k::serial::affine(w.data(), bias.data(), classes, dim, x.data(), out.data()); }, 200),
      time_ms([&] { k::openmp::affine(w.data(), bias.data(), classes, dim, x.data(), out.data()); }, 200));

  row("affine_batch 256x512",
      time_ms([&] { k::serial::affine_batch(w.data(), bias.data(), classes, dim, bx.data(), batch, bout.data()); }, 10),
      time_ms([&] { k::openmp::affine_batch(w.data(), bias.data(), classes, dim, bx.data(), batch, bout.data()); }, 10));

  row("matmul_at 200x256",
      time_ms([&] { k::serial::matmul_at(w2.data(), classes, hidden, v2.data(), batch, dh.data()); }, 20),
      time_ms([&] { k::openmp::matmul_at(w2.data(), classes, hidden, v2.data(), batch, dh.data()); }, 20));

  row("accum_outer 256x200x512",
      time_ms([&] { k::serial::accum_outer_rows(delta.data(), bx.data(), batch, classes, dim, gw.data(), gb.data()); }, 10),
      time_ms([&] { k::openmp::accum_outer_rows(delta.data(), bx.data(), batch, classes, dim, gw.data(), gb.data()); }, 10));

  row("spd_inverse 512",
      time_ms([&] { k::serial::spd_inverse(spd.data(), dim, inv.data(), nullptr); }, 3),
      time_ms([&] { k::openmp::spd_inverse(spd.data(), dim, inv.data(), nullptr); }, 3));

  row("assign_nearest 20k/256",
      time_ms([&] { k::serial::assign_nearest(p.data(), pts, c.data(), cents, sub, codes.data(), nullptr); }, 5),
      time_ms([&] { k::openmp::assign_nearest(p.data(), pts, c.data(), cents, sub, codes.data(), nullptr); }, 5));

  return 0;
}
