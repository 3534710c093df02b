#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lrurec/data.hpp"
#include "lrurec/model.hpp"
#include "lrurec/rng.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  double scale = std::max(std::fabs(a), std::fabs(b));
  if (scale < 1e-10) return 0.0;  // both effectively zero
  return std::fabs(a - b) / scale;
}

// Elementwise relative error with the denominator floored at a fraction of
// the group's largest entry, so near-zero components don't amplify
// finite-difference round-off.
inline double max_rel_err(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double scale = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
  double floor = std::max(1e-9, 1e-1 * scale);
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), floor});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Five-point central difference, O(h^4) truncation; keeps both truncation
// and round-off error small for composed-model losses.
template <typename F>
std::vector<double> fd_grad4(const F& f, std::vector<double> p, double h) {
  std::vector<double> g(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    double orig = p[i];
    p[i] = orig + h;
    double f1 = f(p);
    p[i] = orig - h;
    double f2 = f(p);
    p[i] = orig + 2 * h;
    double f3 = f(p);
    p[i] = orig - 2 * h;
    double f4 = f(p);
    p[i] = orig;
    g[i] = (8.0 * (f1 - f2) - (f3 - f4)) / (12.0 * h);
  }
  return g;
}

// First-order Markov interaction log with one dominant transition per item.
struct MarkovData {
  std::vector<lrurec::Interaction> log;
  std::vector<std::vector<double>> transition;  // item_count x item_count
  int item_count = 0;
};

inline MarkovData make_markov_log(int item_count, int users, int seq_len,
                                  double dominant_p, std::uint64_t seed) {
  MarkovData d;
  d.item_count = item_count;
  d.transition.assign(item_count, std::vector<double>(item_count, 0.0));
  for (int i = 0; i < item_count; ++i) {
    int fav = (i * 7 + 3) % item_count;
    double rest = (1.0 - dominant_p) / (item_count - 1);
    for (int j = 0; j < item_count; ++j)
      d.transition[i][j] = (j == fav) ? dominant_p : rest;
  }
  lrurec::Rng rng(seed);
  for (int u = 0; u < users; ++u) {
    int cur = static_cast<int>(rng.below(item_count));
    for (int t = 0; t < seq_len; ++t) {
      d.log.push_back({"u" + std::to_string(u),
                       "i" + std::to_string(cur + 1), t});
      double r = rng.uniform(), acc = 0.0;
      int nxt = item_count - 1;
      for (int j = 0; j < item_count; ++j) {
        acc += d.transition[cur][j];
        if (r < acc) {
          nxt = j;
          break;
        }
      }
      cur = nxt;
    }
  }
  return d;
}

}  // namespace testutil
