// Benchmark comparing the serial reference kernels against the OpenMP
// variants, plus the per-sample parallel stages (generation, evaluation).
#include <chrono>
#include <cstdio>
#include <vector>

#include "rgbpose/config.hpp"
#include "rgbpose/evalharness.hpp"
#include "rgbpose/kernels.hpp"
#include "rgbpose/rng.hpp"
#include "rgbpose/synth.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double bench_gemm(long m, long n, long k, rgbpose::kern::Exec exec, int reps) {
  rgbpose::Rng rng(7);
  std::vector<double> a(m * k), b(k * n), c(m * n);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  rgbpose::kern::gemm(false, false, m, n, k, a.data(), b.data(), c.data(), false, exec);
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r)
    rgbpose::kern::gemm(false, false, m, n, k, a.data(), b.data(), c.data(), false, exec);
  return seconds_since(t0) / reps;
}

double bench_softmax(long m, long n, rgbpose::kern::Exec exec, int reps) {
  rgbpose::Rng rng(11);
  std::vector<double> x(m * n), y(m * n);
  for (auto& v : x) v = rng.uniform(-4, 4);
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r)
    rgbpose::kern::softmax_rows(x.data(), y.data(), m, n, exec);
  return seconds_since(t0) / reps;
}

double bench_generation(int workers, int per_category) {
  rgbpose::synth::GenConfig cfg;
  cfg.train_per_category = per_category;
  cfg.test_per_category = 0;
  const auto& cats = cfg.categories;
  std::vector<rgbpose::geom::Points> priors(cats.size());
  for (size_t c = 0; c < cats.size(); ++c)
    priors[c] = rgbpose::synth::make_prior(cats[c], 1234 + c, cfg.prior_instances,
                                           cfg.n_prior, cfg.n_model_points);
#ifdef _OPENMP
  omp_set_num_threads(workers);
#endif
  const auto t0 = Clock::now();
#pragma omp parallel for schedule(dynamic) collapse(2)
  for (int c = 0; c < static_cast<int>(cats.size()); ++c)
    for (int i = 0; i < per_category; ++i) {
      volatile double sink =
          rgbpose::synth::sample_scene(cfg, cats[c], priors[c], 99, rgbpose::synth::Split::Train, i)
              .pose.s;
      (void)sink;
    }
  return seconds_since(t0);
}

}  // namespace

int main() {
  int hw_threads = 1;
#ifdef _OPENMP
  hw_threads = omp_get_max_threads();
  std::printf("OpenMP max threads: %d\n\n", hw_threads);
#else
  std::printf("OpenMP not enabled\n\n");
#endif

  std::printf("%-28s %12s %12s %8s\n", "kernel", "serial (ms)", "openmp (ms)", "speedup");
  struct GemmCase {
    long m, n, k;
    int reps;
  };
  for (const GemmCase gc : {GemmCase{256, 256, 256, 10}, GemmCase{64, 4096, 128, 10},
                            GemmCase{1024, 64, 1024, 10}}) {
    const double ts = bench_gemm(gc.m, gc.n, gc.k, rgbpose::kern::Exec::Serial, gc.reps);
    const double tp = bench_gemm(gc.m, gc.n, gc.k, rgbpose::kern::Exec::Parallel, gc.reps);
    char name[64];
    std::snprintf(name, sizeof(name), "gemm %ldx%ldx%ld", gc.m, gc.n, gc.k);
    std::printf("%-28s %12.3f %12.3f %8.2f\n", name, ts * 1e3, tp * 1e3, ts / tp);
  }
  {
    const double ts = bench_softmax(4096, 512, rgbpose::kern::Exec::Serial, 10);
    const double tp = bench_softmax(4096, 512, rgbpose::kern::Exec::Parallel, 10);
    std::printf("%-28s %12.3f %12.3f %8.2f\n", "softmax_rows 4096x512", ts * 1e3, tp * 1e3,
                ts / tp);
  }
  {
    const double t1 = bench_generation(1, 8);
    const double tn = bench_generation(hw_threads, 8);
    std::printf("%-28s %12.3f %12.3f %8.2f\n", "scene generation x48", t1 * 1e3, tn * 1e3,
                t1 / tn);
  }
  return 0;
}
