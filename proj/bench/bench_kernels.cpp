// Benchmark: OpenMP replicate-parallel kernels against the serial reference
// path, for sampling throughput and component labeling.
#include <chrono>
#include <cstdio>
#include <vector>

#include "exclab/parallel.hpp"
#include "exclab/sampler.hpp"
#include "exclab/topology.hpp"

using namespace exclab;
using Clock = std::chrono::steady_clock;

namespace {

double secs(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

double run_sampling(const CirculantSampler& sampler, int reps, int workers) {
  std::vector<double> sink(size_t(reps), 0.0);
  const auto t0 = Clock::now();
  parallel_for(reps, workers, [&](int64_t i) {
    sink[size_t(i)] = sampler.sample(42, uint64_t(i)).values[0];
  });
  return secs(t0, Clock::now());
}

double run_labeling(const std::vector<BinaryGrid>& grids, int workers,
                    bool reference) {
  std::vector<int64_t> sink(grids.size(), 0);
  const auto t0 = Clock::now();
  parallel_for(int64_t(grids.size()), workers, [&](int64_t i) {
    const ExcursionGeometry g = reference
                                    ? label_components_reference(grids[size_t(i)])
                                    : label_components(grids[size_t(i)]);
    sink[size_t(i)] = int64_t(g.comps.size());
  });
  return secs(t0, Clock::now());
}

}  // namespace

int main() {
  CovarianceModel model;
  model.d = 2;
  GridSpec grid{2, 64.0, 0.25, 0.0};
  const CirculantSampler sampler(model, grid);
  const int reps = 64;
  const int cores = resolve_workers(0);

  std::printf("sampling %d fields, %dx%d nodes\n", reps, grid.n(), grid.n());
  const double ts = run_sampling(sampler, reps, 1);
  const double tp = run_sampling(sampler, reps, cores);
  std::printf("  serial   %.3fs (%.1f fields/s)\n", ts, reps / ts);
  std::printf("  %2d cores %.3fs (%.1f fields/s, speedup %.2fx)\n", cores, tp,
              reps / tp, ts / tp);

  std::vector<BinaryGrid> grids;
  FunctionalSpec spec;
  for (int i = 0; i < reps; ++i)
    grids.push_back(extract_excursion(sampler.sample(7, uint64_t(i)), spec));

  std::printf("labeling %d binary grids\n", reps);
  const double tu = run_labeling(grids, 1, false);
  const double tb = run_labeling(grids, 1, true);
  const double tup = run_labeling(grids, cores, false);
  std::printf("  union-find serial  %.3fs\n", tu);
  std::printf("  BFS reference      %.3fs\n", tb);
  std::printf("  union-find %2d thr %.3fs (speedup %.2fx)\n", cores, tup,
              tu / tup);
  return 0;
}
