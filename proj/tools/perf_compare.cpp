// Times the serial reference executors against the OpenMP kernels on a
// mid-size workload and reports the speedup. The outputs must agree
// bit-for-bit; this tool asserts that while measuring.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "phaselsq/bench.hpp"
#include "phaselsq/crlb.hpp"

using namespace phaselsq;

namespace {

double seconds(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

int main(int argc, char** argv) {
  int n = 10;
  int trials = 400;
  if (argc > 1) n = std::atoi(argv[1]);
  if (argc > 2) trials = std::atoi(argv[2]);

#ifdef _OPENMP
  std::printf("threads available: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel paths run serially\n");
#endif

  SweepConfig cfg;
  cfg.n = n;
  cfg.snr_grid_db = {20.0, 60.0};
  cfg.trials = trials;
  cfg.algorithm = 2;
  cfg.sign_convention = SignConvention::oracle;
  cfg.master_seed = 7;

  auto t0 = std::chrono::steady_clock::now();
  const SweepResult serial = run_sweep_serial(cfg);
  auto t1 = std::chrono::steady_clock::now();
  const SweepResult parallel = run_sweep(cfg);
  auto t2 = std::chrono::steady_clock::now();

  if (rows_to_csv(serial.rows) != rows_to_csv(parallel.rows)) {
    std::fprintf(stderr, "FATAL: serial and parallel sweeps disagree\n");
    return 1;
  }
  const double ts = seconds(t0, t1), tp = seconds(t1, t2);
  std::printf("sweep       n=%-4d trials=%-6d serial %8.3fs  parallel %8.3fs  speedup %5.2fx\n",
              n, trials, ts, tp, ts / tp);

  const auto [frame, x] = gen_instance(n, 3 * n, 11);
  const NoiseModel noise(0.5);
  const int draws = 200000;
  t0 = std::chrono::steady_clock::now();
  const ExpectedCrlb es = expected_crlb_trace_serial(frame, noise, draws, 3);
  t1 = std::chrono::steady_clock::now();
  const ExpectedCrlb ep = expected_crlb_trace(frame, noise, draws, 3);
  t2 = std::chrono::steady_clock::now();

  if (es.value != ep.value || es.std_error != ep.std_error || es.rejected != ep.rejected) {
    std::fprintf(stderr, "FATAL: serial and parallel expectations disagree\n");
    return 1;
  }
  const double es_t = seconds(t0, t1), ep_t = seconds(t1, t2);
  std::printf("crlb-expect n=%-4d draws=%-7d serial %8.3fs  parallel %8.3fs  speedup %5.2fx\n",
              n, draws, es_t, ep_t, es_t / ep_t);
  return 0;
}
