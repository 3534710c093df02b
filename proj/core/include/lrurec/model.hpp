#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrurec/lru.hpp"
#include "lrurec/nn.hpp"
#include "lrurec/rng.hpp"
#include "lrurec/tensor.hpp"

namespace lrurec {

// Most-negative finite score; keeps the padding item out of every ranking.
constexpr double kNegInfSurrogate = -1.7976931348623157e308;

struct ModelConfig {
  int item_count = 0;
  int h = 64;
  int num_blocks = 2;
  double dropout = 0.2;
  // Ablation toggles.
  bool use_layer_norm = true;
  bool use_residual = true;
  bool use_pffn = true;
  // Eigenvalue ring initialization.
  double r_min = 0.8;
  double r_max = 0.99;
  double max_phase = 6.283185307179586476925286766559;

  int h_rec() const { return 2 * h; }
  int vocab() const { return item_count + 1; }  // id 0 = padding
};

struct BlockParams {
  LruParams lru;
  LayerNormParams lru_norm;
  PffnParams pffn;
  LayerNormParams pffn_norm;
};

struct ModelParams {
  ModelConfig cfg;
  std::vector<double> e;  // (item_count+1) x h, row 0 fixed to zero
  LayerNormParams embed_norm;
  std::vector<BlockParams> blocks;
  std::vector<double> b_o;  // item_count+1

  double* e_row(int id) { return e.data() + static_cast<size_t>(id) * cfg.h; }
  const double* e_row(int id) const {
    return e.data() + static_cast<size_t>(id) * cfg.h;
  }
};

struct IdMatrix {
  int n = 0, l = 0;
  std::vector<int> ids;

  IdMatrix() = default;
  IdMatrix(int n_, int l_) : n(n_), l(l_), ids(static_cast<size_t>(n_) * l_, 0) {}
  int at(int i, int k) const { return ids[static_cast<size_t>(i) * l + k]; }
  int& at(int i, int k) { return ids[static_cast<size_t>(i) * l + k]; }
};

// Fixed-size per-session state for constant-cost incremental prediction.
struct SessionState {
  std::vector<SessionStateLayer> layers;
  std::vector<double> last_hidden;
};

ModelParams init_model(const ModelConfig& cfg, Rng& rng);
ModelParams zeros_like(const ModelParams& p);

struct ParamView {
  std::string name;
  double* data = nullptr;
  size_t size = 0;
};
std::vector<ParamView> param_views(ModelParams& p);

Tensor3 embed(const ModelParams& p, const IdMatrix& ids, const PadMask& mask,
              bool training = false, Rng* rng = nullptr);

Tensor3 block_forward(const Tensor3& x, const PadMask& mask,
                      const BlockParams& bp, const ModelConfig& cfg,
                      bool training = false, Rng* rng = nullptr);

// Hidden features after embedding and all blocks.
Tensor3 model_hidden(const ModelParams& p, const IdMatrix& ids,
                     const PadMask& mask, bool training = false,
                     Rng* rng = nullptr);

// Scores over the full vocabulary for one hidden vector; out has vocab()
// entries and out[0] is the padding surrogate.
void predict_scores(const ModelParams& p, const double* hidden, double* out);

Tensor3 model_forward(const ModelParams& p, const IdMatrix& ids,
                      const PadMask& mask, bool training = false,
                      Rng* rng = nullptr);

SessionState fresh_session(const ModelParams& p);

struct StepResult {
  std::vector<int> top_ids;
  std::vector<double> top_scores;
};

StepResult model_step(const ModelParams& p, SessionState& state, int new_item,
                      int k);
// Same update, full score vector out (vocab() entries).
void model_step_scores(const ModelParams& p, SessionState& state, int new_item,
                       std::vector<double>& scores);

struct LossResult {
  double loss = 0.0;
  long positions = 0;
  ModelParams grads;
};

// Mean masked cross-entropy over next-item targets (target 0 = ignore) with
// exact gradients for every parameter. negative_samples > 0 restricts each
// position's softmax to the target plus uniform negatives.
LossResult model_backward(const ModelParams& p, const IdMatrix& ids,
                          const IdMatrix& targets, const PadMask& mask,
                          bool training = false, Rng* rng = nullptr,
                          int negative_samples = 0);

void save_checkpoint(const std::string& path, const ModelParams& p,
                     std::uint64_t vocab_hash);
struct Checkpoint {
  ModelParams params;
  std::uint64_t vocab_hash = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lrurec
