#pragma once

#include <string>
#include <vector>

#include "lrurec/model.hpp"

namespace lrurec {

struct BenchRecord {
  std::string scenario;
  int n = 0, l = 0, h = 0;
  int reps = 0;
  double median_s = 0.0;
  double p90_s = 0.0;
  long passes = -1;  // scan pass counter where applicable
};

// Times the parallel scan forward per sequence length; pass counts come
// from the scan's own counter, not from timing.
std::vector<BenchRecord> bench_scan(const std::vector<int>& l_grid, int h,
                                    int n, int reps);

struct IncrementalBench {
  std::vector<BenchRecord> per_history;           // per-step latency by history
  std::vector<std::pair<long, double>> cumulative;  // (step, seconds so far)
  double r2 = 0.0;  // linear fit of cumulative time vs step count
};

IncrementalBench bench_incremental(const std::vector<int>& history_grid,
                                   int steps, int h, int reps);

double linear_fit_r2(const std::vector<std::pair<long, double>>& points);

}  // namespace lrurec
