// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits non-zero if any gating criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "lrurec/bench.hpp"
#include "lrurec/data.hpp"
#include "lrurec/evaluator.hpp"
#include "lrurec/lru.hpp"
#include "lrurec/model.hpp"
#include "lrurec/trainer.hpp"

using namespace lrurec;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct Outcome {
  int criterion;
  std::string label;
  bool pass;
  bool gating = true;
  std::string note;
};

std::vector<Outcome> results;

void report(int criterion, const std::string& label, bool pass,
            bool gating = true, const std::string& note = "") {
  results.push_back({criterion, label, pass, gating, note});
  std::printf("%s  criterion %2d: %s%s%s\n",
              pass ? "PASS" : (gating ? "FAIL" : "SKIP"), criterion,
              label.c_str(), note.empty() ? "" : " — ", note.c_str());
  std::fflush(stdout);
}

Tensor3 random_input(int n, int l, int h, Rng& rng) {
  Tensor3 x(n, l, h);
  for (auto& v : x.data) v = rng.normal();
  return x;
}

// --- 1: scan equivalence over 200 random configurations -------------------
void criterion_scan_equivalence() {
  Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng.below(4));
    int l = 2 + static_cast<int>(rng.below(255));
    int hi = 1 + static_cast<int>(rng.below(8));
    int hr = 1 + static_cast<int>(rng.below(16));
    LruParams p = init_lru(hi, hr, 0.8, 0.99, 6.283185307179586, rng);
    Tensor3 x = random_input(n, l, hi, rng);
    PadMask mask(n, l);
    for (int i = 0; i < n; ++i) {  // a few genuine left pads per row
      int pads = static_cast<int>(rng.below(std::min(l, 4)));
      for (int k = 0; k < pads; ++k) {
        mask.set(i, k, false);
        for (int j = 0; j < hi; ++j) x.row(i, k)[j] = 0.0;
      }
    }
    auto [xp, mp] = pad_pow2(x, mask);
    ScanResult par = lru_forward_parallel(xp, mp, p);
    LruForward seq = lru_forward_sequential(xp, mp, p);
    for (size_t i = 0; i < par.y.data.size(); ++i)
      worst = std::max(worst, std::fabs(par.y.data[i] - seq.y.data[i]));
  }
  char note[64];
  std::snprintf(note, sizeof(note), "max abs diff %.3g", worst);
  report(1, "parallel scan equals sequential recurrence (200 configs)",
         worst < 1e-9, true, note);
}

// --- 2: exact pass counts ---------------------------------------------------
void criterion_pass_count() {
  Rng rng(1002);
  LruParams p = init_lru(2, 4, 0.8, 0.99, 6.283185307179586, rng);
  bool ok = true;
  for (int l = 2; l <= 1024 && ok; ++l) {
    Tensor3 x = random_input(1, l, 2, rng);
    PadMask mask(1, l);
    auto [xp, mp] = pad_pow2(x, mask);
    ScanResult s = lru_forward_parallel(xp, mp, p);
    int expected = 0;
    while ((1 << expected) < l) ++expected;  // ceil(log2 l)
    ok = (s.passes == expected);
    if (l == 8 && s.passes != 3) ok = false;
  }
  report(2, "scan performs exactly ceil(log2 L) passes for L in 2..1024", ok);
}

// --- 3: full-model gradient suite ------------------------------------------
void criterion_gradients() {
  Rng rng(1003);
  ModelConfig cfg;
  cfg.item_count = 12;
  cfg.h = 4;  // h_rec = 8
  cfg.num_blocks = 2;
  cfg.dropout = 0.0;
  ModelParams p = init_model(cfg, rng);

  IdMatrix ids(2, 8), targets(2, 8);
  PadMask mask(2, 8);
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 8; ++k) {
      ids.at(i, k) = 1 + static_cast<int>(rng.below(12));
      targets.at(i, k) = 1 + static_cast<int>(rng.below(12));
    }
  }
  mask.set(1, 0, false);  // exercise padding
  ids.at(1, 0) = 0;
  targets.at(1, 0) = 0;

  LossResult res = model_backward(p, ids, targets, mask);
  auto views = param_views(p);
  auto gviews = param_views(res.grads);
  double worst = 0.0;
  std::string worst_group;
  for (size_t g = 0; g < views.size(); ++g) {
    std::vector<double> base(views[g].data, views[g].data + views[g].size);
    auto fd = testutil::fd_grad4(
        [&](const std::vector<double>& v) {
          ModelParams q = p;
          auto qs = param_views(q);
          std::copy(v.begin(), v.end(), qs[g].data);
          return model_backward(q, ids, targets, mask).loss;
        },
        base, 3e-4);
    std::vector<double> analytic(gviews[g].data,
                                 gviews[g].data + gviews[g].size);
    double err = testutil::max_rel_err(analytic, fd);
    if (err > worst) {
      worst = err;
      worst_group = views[g].name;
    }
  }
  char note[96];
  std::snprintf(note, sizeof(note), "worst rel err %.3g (%s)", worst,
                worst_group.c_str());
  report(3, "every parameter group matches finite differences (rel 1e-4)",
         worst < 1e-4, true, note);
}

// --- 4: incremental/full equivalence ---------------------------------------
void criterion_incremental() {
  Rng rng(1004);
  ModelConfig cfg;
  cfg.item_count = 60;
  cfg.h = 8;
  cfg.num_blocks = 2;
  cfg.dropout = 0.0;
  ModelParams p = init_model(cfg, rng);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    int l = 1 + static_cast<int>(rng.below(256));
    IdMatrix ids(1, l);
    PadMask mask(1, l);
    for (int k = 0; k < l; ++k)
      ids.at(0, k) = 1 + static_cast<int>(rng.below(60));
    Tensor3 logits = model_forward(p, ids, mask);
    SessionState state = fresh_session(p);
    std::vector<double> step;
    for (int k = 0; k < l; ++k) model_step_scores(p, state, ids.at(0, k), step);
    for (int v = 1; v < cfg.vocab(); ++v)
      worst = std::max(worst, std::fabs(step[v] - logits.at(0, l - 1, v)));
  }
  char note[64];
  std::snprintf(note, sizeof(note), "max abs diff %.3g", worst);
  report(4, "model_step equals model_forward final logits (50 sequences)",
         worst < 1e-6, true, note);
}

// --- 5: left-pad invariance -------------------------------------------------
void criterion_left_pad() {
  Rng rng(1005);
  ModelConfig cfg;
  cfg.item_count = 30;
  cfg.h = 8;
  cfg.num_blocks = 2;
  cfg.dropout = 0.0;
  ModelParams p = init_model(cfg, rng);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    int l = 4 + static_cast<int>(rng.below(29));
    std::vector<int> seq(l);
    for (auto& v : seq) v = 1 + static_cast<int>(rng.below(30));
    IdMatrix ids(1, l);
    PadMask mask(1, l);
    for (int k = 0; k < l; ++k) ids.at(0, k) = seq[k];
    Tensor3 base = model_forward(p, ids, mask);
    for (int pads : {1, 7, 64}) {
      IdMatrix pids(1, l + pads);
      PadMask pmask(1, l + pads);
      for (int k = 0; k < pads; ++k) pmask.set(0, k, false);
      for (int k = 0; k < l; ++k) pids.at(0, pads + k) = seq[k];
      Tensor3 out = model_forward(p, pids, pmask);
      for (int v = 1; v < cfg.vocab(); ++v)
        worst = std::max(worst, std::fabs(out.at(0, pads + l - 1, v) -
                                          base.at(0, l - 1, v)));
    }
  }
  char note[64];
  std::snprintf(note, sizeof(note), "max abs diff %.3g", worst);
  report(5, "up to 64 left pads leave final-position logits unchanged",
         worst < 1e-8, true, note);
}

// --- 6: split identity vs the direct-sum oracle -----------------------------
std::vector<std::complex<double>> direct_sum_state(const LruParams& p,
                                                   const Tensor3& x,
                                                   int upto_k) {
  ComplexVec lam = lambda_of(p);
  int hr = p.h_rec, hi = p.h_in;
  std::vector<std::complex<double>> h(hr, 0.0);
  for (int i = 0; i <= upto_k; ++i) {
    const double* xi = x.row(0, i);
    for (int r = 0; r < hr; ++r) {
      std::complex<double> u = 0.0;
      for (int j = 0; j < hi; ++j)
        u += std::complex<double>(p.b.re[r * hi + j], p.b.im[r * hi + j]) *
             xi[j];
      u *= std::exp(p.gamma_log[r]);
      std::complex<double> pw = 1.0;
      for (int e = 0; e < upto_k - i; ++e)
        pw *= std::complex<double>(lam.re[r], lam.im[r]);
      h[r] += pw * u;
    }
  }
  return h;
}

void criterion_split_identity() {
  Rng rng(1006);
  int hi = 3, hr = 6, l = 32;
  LruParams p = init_lru(hi, hr, 0.8, 0.99, 6.283185307179586, rng);
  Tensor3 x = random_input(1, l, hi, rng);
  ComplexVec lam = lambda_of(p);
  auto h_t = direct_sum_state(p, x, l - 1);
  double worst = 0.0;
  for (int k = 0; k < l - 1; ++k) {
    auto h_k = direct_sum_state(p, x, k);
    for (int r = 0; r < hr; ++r) {
      std::complex<double> lamr(lam.re[r], lam.im[r]);
      std::complex<double> pw = 1.0;
      for (int e = 0; e < l - 1 - k; ++e) pw *= lamr;
      std::complex<double> acc = pw * h_k[r];
      for (int i = k + 1; i < l; ++i) {
        const double* xi = x.row(0, i);
        std::complex<double> u = 0.0;
        for (int j = 0; j < hi; ++j)
          u += std::complex<double>(p.b.re[r * hi + j], p.b.im[r * hi + j]) *
               xi[j];
        u *= std::exp(p.gamma_log[r]);
        std::complex<double> pw2 = 1.0;
        for (int e = 0; e < l - 1 - i; ++e) pw2 *= lamr;
        acc += pw2 * u;
      }
      worst = std::max(worst, std::abs(acc - h_t[r]));
    }
  }
  char note[64];
  std::snprintf(note, sizeof(note), "max abs diff %.3g", worst);
  report(6, "split identity holds at every split point (L = 32)",
         worst < 1e-10, true, note);
}

// --- 7 & 8: stability parameterization and synthetic end-to-end -------------
struct SyntheticOutcome {
  bool lambda_stable_after_training = false;
  double model_recall1 = 0.0;
  double bayes_recall1 = 0.0;
  double popularity_recall1 = 0.0;
  long steps = 0;
};

SyntheticOutcome run_synthetic() {
  SyntheticOutcome out;
  auto md = testutil::make_markov_log(20, 2000, 20, 0.7, 4242);
  SplitDataset ds = build_split(md.log, 20);
  TrainView view = make_train_view(ds);

  ModelConfig cfg;
  cfg.item_count = ds.item_count();
  cfg.h = 32;
  cfg.num_blocks = 2;
  cfg.dropout = 0.1;
  Rng init_rng(7);
  ModelParams p = init_model(cfg, init_rng);
  OptimizerState opt;
  for (const auto& v : param_views(p)) {
    opt.m.emplace_back(v.size, 0.0);
    opt.v.emplace_back(v.size, 0.0);
  }
  AdamWConfig ac;
  ac.lr = 1e-3;
  TrainConfig tc;
  Rng shuffle(8), dropout_rng(9);
  long steps = 0;
  while (steps < 1000) {
    auto batches = make_batches(view.train, 128, view.max_len, shuffle);
    for (const auto& b : batches) {
      if (steps >= 1000) break;
      BatchLoss bl = batch_loss(p, b, tc, &dropout_rng, true);
      adamw_step(p, bl.grads, opt, ac);
      ++steps;
    }
  }
  out.steps = steps;
  out.lambda_stable_after_training = true;
  for (const auto& blk : p.blocks) {
    ComplexVec lam = lambda_of(blk.lru);
    for (int r = 0; r < blk.lru.h_rec; ++r)
      if (std::hypot(lam.re[r], lam.im[r]) >= 1.0)
        out.lambda_stable_after_training = false;
  }

  MetricResult m = evaluate(p, ds, EvalPhase::test, {}, nullptr, {1});
  out.model_recall1 = m.recall_at(1);

  // Bayes-optimal single guess from the known transition matrix: predict
  // argmax of the row conditioned on the item preceding the test item.
  auto orig_of = [&](int id) {
    // items are named "i<orig+1>" by the generator
    return std::stoi(ds.item_of_id[id].substr(1)) - 1;
  };
  double bayes = 0.0;
  std::vector<long> train_freq(ds.item_count() + 1, 0);
  long pop_hits = 0;
  for (const auto& s : ds.seqs) {
    int cur = orig_of(s.val);
    const auto& row = md.transition[cur];
    bayes += *std::max_element(row.begin(), row.end());
    for (int id : s.train) ++train_freq[id];
  }
  bayes /= static_cast<double>(ds.seqs.size());
  out.bayes_recall1 = bayes;

  int pop_item = 1;
  for (int id = 2; id <= ds.item_count(); ++id)
    if (train_freq[id] > train_freq[pop_item]) pop_item = id;
  for (const auto& s : ds.seqs)
    if (s.test == pop_item) ++pop_hits;
  out.popularity_recall1 =
      static_cast<double>(pop_hits) / static_cast<double>(ds.seqs.size());
  return out;
}

void criterion_stability_and_synthetic() {
  // 10^6 random finite draws of nu_log keep |lambda| < 1 structurally.
  Rng rng(1007);
  bool draws_ok = true;
  LruParams probe(1, 1);
  for (int i = 0; i < 1000000 && draws_ok; ++i) {
    // Wide range; below about -36.8 the magnitude exp(-exp(nu)) rounds to
    // exactly 1.0 in doubles, so stay where the strict bound is observable.
    probe.nu_log[0] = (rng.uniform() - 0.5) * 60.0;
    probe.theta_log[0] = rng.normal() * 3.0;
    ComplexVec lam = lambda_of(probe);
    draws_ok = std::hypot(lam.re[0], lam.im[0]) < 1.0;
  }

  double t0 = now_s();
  SyntheticOutcome syn = run_synthetic();
  double elapsed = now_s() - t0;

  report(7, "|lambda| < 1 for 1e6 draws and after 1000 training steps",
         draws_ok && syn.lambda_stable_after_training);

  char note[160];
  std::snprintf(note, sizeof(note),
                "recall@1 %.4f vs bayes %.4f (floor %.4f), popularity %.4f, "
                "%.0fs",
                syn.model_recall1, syn.bayes_recall1, 0.9 * syn.bayes_recall1,
                syn.popularity_recall1, elapsed);
  bool pass = syn.model_recall1 >= 0.9 * syn.bayes_recall1 &&
              syn.model_recall1 > syn.popularity_recall1 && elapsed < 600.0;
  report(8, "synthetic Markov task reaches 0.9x Bayes and beats popularity",
         pass, true, note);
}

// --- 9: incremental latency -------------------------------------------------
void criterion_latency() {
  IncrementalBench b = bench_incremental({10, 1000}, 4000, 32, 25);
  double m10 = b.per_history[0].median_s;
  double m1000 = b.per_history[1].median_s;
  double ratio = m1000 / m10;
  char note[96];
  std::snprintf(note, sizeof(note), "ratio %.3f, cumulative R^2 %.5f", ratio,
                b.r2);
  report(9, "per-step latency flat in history length, cumulative time linear",
         ratio <= 2.0 && b.r2 > 0.99, true, note);
}

// --- 10: optional ML-1M preprocessing check ---------------------------------
void criterion_ml1m() {
  std::vector<std::string> candidates = {"data/ml-1m/ratings.dat",
                                         "ml-1m/ratings.dat", "ratings.dat"};
  if (const char* env = std::getenv("ML1M_RATINGS"))
    candidates.insert(candidates.begin(), env);
  std::string path;
  for (const auto& c : candidates) {
    std::ifstream probe(c);
    if (probe) {
      path = c;
      break;
    }
  }
  if (path.empty()) {
    report(10, "ML-1M preprocessing counts (6040 users, 3416 items)", false,
           false, "ratings file not available, skipped");
    return;
  }
  std::ifstream in(path);
  ParseOptions opt;
  opt.delimiter = "::";
  opt.user_col = 0;
  opt.item_col = 1;
  opt.time_col = 3;
  auto log = parse_interactions(in, opt);
  auto filtered = filter_min_interactions(log, 5);
  SplitDataset ds = build_split(filtered, 200);
  char note[96];
  std::snprintf(note, sizeof(note), "%d users, %d items", ds.user_count(),
                ds.item_count());
  report(10, "ML-1M preprocessing counts (6040 users, 3416 items)",
         ds.user_count() == 6040 && ds.item_count() == 3416, true, note);
}

// --- 11: metric unit values --------------------------------------------------
void criterion_metrics() {
  KMetrics m = metrics_at_k(3, 10);
  bool ok = (m.recall == 1.0) && std::fabs(m.ndcg - 0.5) < 1e-15;
  std::vector<double> tied = {kNegInfSurrogate};
  int v = 57;
  for (int i = 0; i < v; ++i) tied.push_back(1.0);
  for (int t = 1; t <= v; ++t) ok = ok && (rank_of_target(tied, t) == v);
  report(11, "metric examples reproduce exactly (NDCG@10 rank 3 = 0.5; "
             "uniform-score rank = V", ok);
}

}  // namespace

int main() {
  double t0 = now_s();
  criterion_scan_equivalence();
  criterion_pass_count();
  criterion_gradients();
  criterion_incremental();
  criterion_left_pad();
  criterion_split_identity();
  criterion_stability_and_synthetic();
  criterion_latency();
  criterion_ml1m();
  criterion_metrics();

  int failures = 0;
  for (const auto& r : results)
    if (!r.pass && r.gating) ++failures;
  std::printf("acceptance: %zu checks, %d failures, %.1fs total\n",
              results.size(), failures, now_s() - t0);
  return failures == 0 ? 0 : 1;
}
