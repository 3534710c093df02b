#pragma once

#include <string>
#include <vector>

#include "lrurec/data.hpp"
#include "lrurec/model.hpp"

namespace lrurec {

// 1-based rank; the target loses ties.
int rank_of_target(const std::vector<double>& scores, int target);

struct KMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
};
KMetrics metrics_at_k(int rank, int k);

enum class EvalPhase { validation, test };

struct EvalMode {
  int sampled = 0;           // 0 = rank against the full item set
  bool exclude_seen = false;  // drop the user's history from the candidates
};

struct MetricResult {
  struct Entry {
    int k = 0;
    double recall = 0.0;
    double ndcg = 0.0;
  };
  std::vector<Entry> entries;
  long users = 0;
  std::string mode;

  double recall_at(int k) const;
  double ndcg_at(int k) const;
};

// Trainer-facing view of a split: training sequences and validation targets
// only; the test targets are not reachable through it.
struct TrainView {
  std::vector<std::vector<int>> train;
  std::vector<int> val_targets;
  int item_count = 0;
  int max_len = 50;
};

TrainView make_train_view(const SplitDataset& ds);

MetricResult evaluate(const ModelParams& p, const SplitDataset& ds,
                      EvalPhase phase, EvalMode mode, Rng* rng,
                      const std::vector<int>& ks = {10, 20});

MetricResult evaluate_validation(const ModelParams& p, const TrainView& view,
                                 EvalMode mode, Rng* rng,
                                 const std::vector<int>& ks = {10, 20},
                                 long sample_users = 0);

// Per-block mean eigenvalue magnitude.
std::vector<double> lambda_report(const ModelParams& p);

}  // namespace lrurec
