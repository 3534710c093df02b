#include "lrurec/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrurec {

int rank_of_target(const std::vector<double>& scores, int target) {
  require(target >= 0 && target < static_cast<int>(scores.size()),
          "rank_of_target: target out of range");
  double t = scores[target];
  int worse = 0;
  for (size_t i = 0; i < scores.size(); ++i)
    if (static_cast<int>(i) != target && scores[i] >= t) ++worse;
  return 1 + worse;
}

KMetrics metrics_at_k(int rank, int k) {
  require(rank >= 1 && k >= 1, "metrics_at_k: rank and k must be >= 1");
  KMetrics m;
  if (rank <= k) {
    m.recall = 1.0;
    m.ndcg = 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  }
  return m;
}

double MetricResult::recall_at(int k) const {
  for (const auto& e : entries)
    if (e.k == k) return e.recall;
  throw std::invalid_argument("MetricResult: no such k");
}

double MetricResult::ndcg_at(int k) const {
  for (const auto& e : entries)
    if (e.k == k) return e.ndcg;
  throw std::invalid_argument("MetricResult: no such k");
}

TrainView make_train_view(const SplitDataset& ds) {
  TrainView v;
  v.item_count = ds.item_count();
  v.max_len = ds.max_len;
  v.train.reserve(ds.seqs.size());
  v.val_targets.reserve(ds.seqs.size());
  for (const auto& s : ds.seqs) {
    v.train.push_back(s.train);
    v.val_targets.push_back(s.val);
  }
  return v;
}

namespace {

// Final-position hidden state for one user history.
std::vector<double> final_hidden(const ModelParams& p,
                                 const std::vector<int>& input, int max_len) {
  int m = static_cast<int>(input.size());
  int in_len = std::min(m, max_len);
  int lp = next_pow2(in_len);
  IdMatrix ids(1, lp);
  PadMask mask(1, lp);
  for (int k = 0; k < lp; ++k) mask.set(0, k, false);
  for (int j = 0; j < in_len; ++j) {
    ids.at(0, lp - in_len + j) = input[m - in_len + j];
    mask.set(0, lp - in_len + j, true);
  }
  Tensor3 hidden = model_hidden(p, ids, mask);
  const double* row = hidden.row(0, lp - 1);
  return std::vector<double>(row, row + p.cfg.h);
}

int sampled_rank(const std::vector<double>& scores, int target, int n,
                 int item_count, Rng& rng) {
  double t = scores[target];
  int worse = 0;
  if (n >= item_count - 1) {
    for (int c = 1; c <= item_count; ++c)
      if (c != target && scores[c] >= t) ++worse;
    return 1 + worse;
  }
  std::vector<std::uint8_t> used(item_count + 1, 0);
  used[target] = 1;
  int drawn = 0;
  while (drawn < n) {
    int c = 1 + static_cast<int>(rng.below(item_count));
    if (used[c]) continue;
    used[c] = 1;
    ++drawn;
    if (scores[c] >= t) ++worse;
  }
  return 1 + worse;
}

struct Accum {
  std::vector<double> recall, ndcg;
  long users = 0;

  explicit Accum(size_t nk) : recall(nk, 0.0), ndcg(nk, 0.0) {}
  void add(int rank, const std::vector<int>& ks) {
    for (size_t i = 0; i < ks.size(); ++i) {
      KMetrics m = metrics_at_k(rank, ks[i]);
      recall[i] += m.recall;
      ndcg[i] += m.ndcg;
    }
    ++users;
  }
  MetricResult finish(const std::vector<int>& ks, const std::string& mode) {
    MetricResult r;
    r.users = users;
    r.mode = mode;
    for (size_t i = 0; i < ks.size(); ++i) {
      double d = users > 0 ? static_cast<double>(users) : 1.0;
      r.entries.push_back({ks[i], recall[i] / d, ndcg[i] / d});
    }
    return r;
  }
};

MetricResult evaluate_users(const ModelParams& p,
                            const std::vector<std::vector<int>>& inputs,
                            const std::vector<int>& targets, int max_len,
                            EvalMode mode, Rng* rng,
                            const std::vector<int>& ks) {
  require(mode.sampled == 0 || rng != nullptr,
          "evaluate: sampled mode requires an rng");
  Accum acc(ks.size());
  std::vector<double> scores(p.cfg.vocab());
  for (size_t u = 0; u < inputs.size(); ++u) {
    if (inputs[u].empty()) continue;
    std::vector<double> hv = final_hidden(p, inputs[u], max_len);
    predict_scores(p, hv.data(), scores.data());
    if (mode.exclude_seen) {
      for (int id : inputs[u])
        if (id != targets[u]) scores[id] = kNegInfSurrogate;
    }
    int rank;
    if (mode.sampled > 0) {
      rank = sampled_rank(scores, targets[u], mode.sampled, p.cfg.item_count,
                          *rng);
    } else {
      rank = rank_of_target(scores, targets[u]);
    }
    acc.add(rank, ks);
  }
  return acc.finish(ks, mode.sampled > 0
                            ? "sampled-" + std::to_string(mode.sampled)
                            : "full");
}

}  // namespace

MetricResult evaluate(const ModelParams& p, const SplitDataset& ds,
                      EvalPhase phase, EvalMode mode, Rng* rng,
                      const std::vector<int>& ks) {
  if (p.cfg.item_count != ds.item_count())
    throw std::runtime_error(
        "evaluate: vocabulary mismatch (model has " +
        std::to_string(p.cfg.item_count) + " items, split has " +
        std::to_string(ds.item_count()) + ")");
  std::vector<std::vector<int>> inputs;
  std::vector<int> targets;
  inputs.reserve(ds.seqs.size());
  targets.reserve(ds.seqs.size());
  for (const auto& s : ds.seqs) {
    std::vector<int> in = s.train;
    if (phase == EvalPhase::test) in.push_back(s.val);
    inputs.push_back(std::move(in));
    targets.push_back(phase == EvalPhase::test ? s.test : s.val);
  }
  return evaluate_users(p, inputs, targets, ds.max_len, mode, rng, ks);
}

MetricResult evaluate_validation(const ModelParams& p, const TrainView& view,
                                 EvalMode mode, Rng* rng,
                                 const std::vector<int>& ks,
                                 long sample_users) {
  if (p.cfg.item_count != view.item_count)
    throw std::runtime_error("evaluate: vocabulary mismatch");
  if (sample_users <= 0 ||
      sample_users >= static_cast<long>(view.train.size()))
    return evaluate_users(p, view.train, view.val_targets, view.max_len, mode,
                          rng, ks);
  // Deterministic stride subsample for cheap validation rounds.
  std::vector<std::vector<int>> inputs;
  std::vector<int> targets;
  size_t total = view.train.size();
  size_t stride = total / static_cast<size_t>(sample_users);
  if (stride == 0) stride = 1;
  for (size_t u = 0; u < total && inputs.size() < static_cast<size_t>(sample_users);
       u += stride) {
    inputs.push_back(view.train[u]);
    targets.push_back(view.val_targets[u]);
  }
  return evaluate_users(p, inputs, targets, view.max_len, mode, rng, ks);
}

std::vector<double> lambda_report(const ModelParams& p) {
  std::vector<double> out;
  for (const auto& b : p.blocks) {
    double sum = 0.0;
    for (double nu : b.lru.nu_log) sum += std::exp(-std::exp(nu));
    out.push_back(sum / static_cast<double>(b.lru.h_rec));
  }
  return out;
}

}  // namespace lrurec
