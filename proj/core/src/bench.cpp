#include "lrurec/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "lrurec/lru.hpp"

namespace lrurec {

namespace {
constexpr int kWarmups = 2;

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Stats {
  double median = 0.0, p90 = 0.0;
};

Stats summarize(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  Stats s;
  size_t n = samples.size();
  s.median = n % 2 ? samples[n / 2]
                   : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  size_t i90 = std::min(n - 1, static_cast<size_t>(0.9 * n));
  s.p90 = samples[i90];
  return s;
}
}  // namespace

double linear_fit_r2(const std::vector<std::pair<long, double>>& points) {
  size_t n = points.size();
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : points) {
    sx += x;
    sy += y;
    sxx += static_cast<double>(x) * x;
    sxy += x * y;
  }
  double dn = static_cast<double>(n);
  double slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  double intercept = (sy - slope * sx) / dn;
  double ss_res = 0, ss_tot = 0, mean_y = sy / dn;
  for (auto [x, y] : points) {
    double e = y - (slope * x + intercept);
    ss_res += e * e;
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  if (ss_tot == 0.0) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

std::vector<BenchRecord> bench_scan(const std::vector<int>& l_grid, int h,
                                    int n, int reps) {
  require(reps >= 5, "bench_scan: need at least 5 repetitions");
  std::vector<BenchRecord> out;
  Rng rng(1234);
  for (int l : l_grid) {
    require(l >= 2 && (l & (l - 1)) == 0, "bench_scan: L must be a power of two");
    LruParams p = init_lru(h, 2 * h, 0.8, 0.99, 6.28, rng);
    Tensor3 x(n, l, h);
    for (auto& v : x.data) v = rng.normal();
    PadMask mask(n, l);
    long passes = -1;
    std::vector<double> samples;
    for (int r = 0; r < reps + kWarmups; ++r) {
      double t0 = now_s();
      ScanResult res = lru_forward_parallel(x, mask, p);
      double t1 = now_s();
      passes = res.passes;
      if (r >= kWarmups) samples.push_back(t1 - t0);
    }
    Stats s = summarize(std::move(samples));
    out.push_back({"scan", n, l, h, reps, s.median, s.p90, passes});
  }
  return out;
}

IncrementalBench bench_incremental(const std::vector<int>& history_grid,
                                   int steps, int h, int reps) {
  IncrementalBench out;
  if (steps <= 0) return out;
  require(reps >= 5, "bench_incremental: need at least 5 repetitions");
  Rng rng(99);
  ModelConfig cfg;
  cfg.item_count = 1000;
  cfg.h = h;
  cfg.dropout = 0.0;
  ModelParams params = init_model(cfg, rng);

  // Per-step latency from states pre-warmed to each history length.
  std::vector<double> scores;
  for (int hist : history_grid) {
    SessionState state = fresh_session(params);
    for (int k = 0; k < hist; ++k)
      model_step_scores(params, state,
                        1 + static_cast<int>(rng.below(cfg.item_count)),
                        scores);
    std::vector<double> samples;
    for (int r = 0; r < reps + kWarmups; ++r) {
      int item = 1 + static_cast<int>(rng.below(cfg.item_count));
      double t0 = now_s();
      model_step_scores(params, state, item, scores);
      double t1 = now_s();
      if (r >= kWarmups) samples.push_back(t1 - t0);
    }
    Stats s = summarize(std::move(samples));
    out.per_history.push_back(
        {"incremental", 1, hist, h, reps, s.median, s.p90, -1});
  }

  // Cumulative time over an extending session.
  SessionState state = fresh_session(params);
  double total = 0.0;
  int checkpoints = 16;
  int every = std::max(1, steps / checkpoints);
  for (int k = 1; k <= steps; ++k) {
    int item = 1 + static_cast<int>(rng.below(cfg.item_count));
    double t0 = now_s();
    model_step_scores(params, state, item, scores);
    total += now_s() - t0;
    if (k % every == 0 || k == steps) out.cumulative.emplace_back(k, total);
  }
  out.r2 = linear_fit_r2(out.cumulative);
  return out;
}

}  // namespace lrurec
