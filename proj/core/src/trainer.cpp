#include "lrurec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace lrurec {

void adamw_step(ModelParams& params, const ModelParams& grads,
                OptimizerState& opt, const AdamWConfig& cfg) {
  auto pv = param_views(params);
  auto gv = param_views(const_cast<ModelParams&>(grads));
  require(pv.size() == gv.size(), "adamw_step: parameter group mismatch");
  if (opt.m.empty()) {
    opt.m.resize(pv.size());
    opt.v.resize(pv.size());
    for (size_t g = 0; g < pv.size(); ++g) {
      opt.m[g].assign(pv[g].size, 0.0);
      opt.v[g].assign(pv[g].size, 0.0);
    }
  }
  ++opt.step;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
  for (size_t g = 0; g < pv.size(); ++g) {
    require(pv[g].size == gv[g].size, "adamw_step: gradient shape mismatch");
    double* p = pv[g].data;
    const double* dg = gv[g].data;
    double* m = opt.m[g].data();
    double* v = opt.v[g].data();
    for (size_t i = 0; i < pv[g].size; ++i) {
      if (!std::isfinite(dg[i]))
        throw std::runtime_error("adamw_step: non-finite gradient in " +
                                 pv[g].name);
      // Decay applied to the weight directly, not through the moments.
      p[i] -= cfg.lr * cfg.weight_decay * p[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * dg[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * dg[i] * dg[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

BatchLoss batch_loss(const ModelParams& params, const Batch& batch,
                     const TrainConfig& cfg, Rng* rng, bool training) {
  const IdMatrix* targets = &batch.targets;
  IdMatrix last_only;
  if (cfg.last_position_only) {
    last_only = batch.targets;
    for (int i = 0; i < last_only.n; ++i)
      for (int k = 0; k < last_only.l - 1; ++k) last_only.at(i, k) = 0;
    targets = &last_only;
  }
  LossResult r = model_backward(params, batch.ids, *targets, batch.mask,
                                training, rng, cfg.negative_samples);
  return {r.loss, std::move(r.grads)};
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainView& view, std::ostream* metrics_log,
                  const ModelParams* warm_start) {
  require(!view.train.empty(), "train: empty split");
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  Rng init_rng(cfg.seed);
  ModelParams params =
      warm_start ? *warm_start : init_model(model_cfg, init_rng);
  Rng shuffle_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  Rng dropout_rng(cfg.seed ^ 0x14057b7ef767814fULL);

  OptimizerState opt;
  TrainResult res;
  res.best = params;
  TrainReport& rep = res.report;

  long iter = 0;
  int round = 0, no_improve = 0;
  double loss_sum = 0.0;
  long loss_count = 0;
  bool stop = false;

  auto validate = [&]() {
    Rng eval_rng(cfg.seed ^ (0x9e3779b9ULL * static_cast<std::uint64_t>(round + 1)));
    EvalMode mode{cfg.eval_sampled};
    MetricResult m = evaluate_validation(params, view, mode, &eval_rng,
                                         {10, 20}, cfg.eval_sample_users);
    RoundMetrics rm;
    rm.round = ++round;
    rm.iteration = iter;
    rm.recall10 = m.recall_at(10);
    rm.ndcg10 = m.ndcg_at(10);
    rm.loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    rm.elapsed_s = elapsed();
    rep.rounds.push_back(rm);
    if (metrics_log) {
      (*metrics_log) << rm.round << '\t' << rm.iteration << '\t' << rm.recall10
                     << '\t' << rm.ndcg10 << '\t' << rm.loss << '\t'
                     << rm.elapsed_s << '\n';
      metrics_log->flush();
    }
    loss_sum = 0.0;
    loss_count = 0;
    if (rep.best_round < 0 || rm.recall10 > rep.best_recall10) {
      rep.best_round = rm.round;
      rep.best_recall10 = rm.recall10;
      res.best = params;
      no_improve = 0;
    } else {
      ++no_improve;
      if (no_improve >= cfg.patience) {
        rep.stop_reason = "early_stop";
        stop = true;
      }
    }
  };

  for (int epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
    auto batches =
        make_batches(view.train, cfg.batch_size, view.max_len, shuffle_rng);
    for (const auto& b : batches) {
      BatchLoss bl = batch_loss(params, b, cfg, &dropout_rng, true);
      adamw_step(params, bl.grads, opt, cfg.opt);
      loss_sum += bl.loss;
      ++loss_count;
      ++iter;
      if (iter % cfg.validate_every == 0) {
        validate();
        if (stop) break;
      }
    }
  }
  if (rep.rounds.empty() || (!stop && loss_count > 0)) validate();
  if (rep.stop_reason.empty()) rep.stop_reason = "max_epochs";
  rep.iterations = iter;
  rep.total_seconds = elapsed();
  return res;
}

GridResult grid_search(const ModelConfig& model_cfg, const TrainConfig& base,
                       const std::vector<double>& weight_decays,
                       const std::vector<double>& dropouts,
                       const TrainView& view, std::ostream* metrics_log) {
  require(!weight_decays.empty() && !dropouts.empty(),
          "grid_search: empty grid");
  GridResult out;
  bool first = true;
  for (double wd : weight_decays) {
    for (double dr : dropouts) {
      ModelConfig mc = model_cfg;
      mc.dropout = dr;
      TrainConfig tc = base;
      tc.opt.weight_decay = wd;
      TrainResult r = train(mc, tc, view, metrics_log);
      GridCell cell{wd, dr, r.report};
      out.cells.push_back(cell);
      // Ties go to the earlier grid cell.
      if (first || r.report.best_recall10 > out.best.report.best_recall10) {
        out.best = std::move(r);
        out.best_weight_decay = wd;
        out.best_dropout = dr;
        first = false;
      }
    }
  }
  return out;
}

}  // namespace lrurec
