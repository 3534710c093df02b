#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "lrurec/data.hpp"
#include "lrurec/evaluator.hpp"
#include "lrurec/model.hpp"

namespace lrurec {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct OptimizerState {
  long step = 0;
  std::vector<std::vector<double>> m, v;  // mirrors param_views order
};

// Decoupled weight decay; throws on non-finite gradients.
void adamw_step(ModelParams& params, const ModelParams& grads,
                OptimizerState& opt, const AdamWConfig& cfg);

struct TrainConfig {
  AdamWConfig opt;
  int batch_size = 128;
  int max_epochs = 500;
  int validate_every = 1000;  // iterations between validation rounds
  int patience = 10;          // validation rounds without improvement
  int negative_samples = 0;   // 0 = full softmax
  int eval_sampled = 0;       // 0 = full ranking at validation
  long eval_sample_users = 0; // 0 = validate on every user
  bool last_position_only = false;
  std::uint64_t seed = 42;
};

struct RoundMetrics {
  int round = 0;
  long iteration = 0;
  double recall10 = 0.0;
  double ndcg10 = 0.0;
  double loss = 0.0;
  double elapsed_s = 0.0;
};

struct TrainReport {
  std::vector<RoundMetrics> rounds;
  int best_round = -1;
  double best_recall10 = 0.0;
  long iterations = 0;
  std::string stop_reason;
  double total_seconds = 0.0;
};

struct TrainResult {
  ModelParams best;
  TrainReport report;
};

struct BatchLoss {
  double loss = 0.0;
  ModelParams grads;
};

BatchLoss batch_loss(const ModelParams& params, const Batch& batch,
                     const TrainConfig& cfg, Rng* rng, bool training);

// Validation-driven training loop with early stopping. Per-round metric
// records are appended to metrics_log when given (delimited text).
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainView& view, std::ostream* metrics_log = nullptr,
                  const ModelParams* warm_start = nullptr);

struct GridCell {
  double weight_decay = 0.0;
  double dropout = 0.0;
  TrainReport report;
};

struct GridResult {
  TrainResult best;
  double best_weight_decay = 0.0;
  double best_dropout = 0.0;
  std::vector<GridCell> cells;
};

GridResult grid_search(const ModelConfig& model_cfg, const TrainConfig& base,
                       const std::vector<double>& weight_decays,
                       const std::vector<double>& dropouts,
                       const TrainView& view,
                       std::ostream* metrics_log = nullptr);

}  // namespace lrurec
