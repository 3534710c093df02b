#include "lrurec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace lrurec {

namespace {

struct BlockCache {
  Tensor3 x_in;
  Tensor3 lru_drop;  // LRU output after dropout, input to the first norm
  std::vector<double> keep1;
  std::vector<LayerNormCache> ln1;
  Tensor3 z;
  std::vector<PffnCache> pffn;
  std::vector<LayerNormCache> ln2;
};

struct ForwardCache {
  std::vector<LayerNormCache> embed_ln;
  std::vector<double> keep0;
  Tensor3 embedded;
  std::vector<BlockCache> blocks;
  Tensor3 hidden;
};

size_t pos_index(const Tensor3& t, int i, int k) {
  return static_cast<size_t>(i) * t.l + k;
}

void draw_keep(Rng& rng, double rate, double* keep, int n) {
  double scale = 1.0 / (1.0 - rate);
  for (int j = 0; j < n; ++j) keep[j] = (rng.uniform() >= rate) ? scale : 0.0;
}

Tensor3 embed_impl(const ModelParams& p, const IdMatrix& ids,
                   const PadMask& mask, bool training, Rng* rng,
                   ForwardCache* cache) {
  int h = p.cfg.h;
  require(ids.n == mask.n && ids.l == mask.l, "embed: mask shape mismatch");
  bool drop = training && p.cfg.dropout > 0.0;
  require(!drop || rng != nullptr, "embed: dropout requires an rng");
  Tensor3 out(ids.n, ids.l, h);
  if (cache) {
    cache->embed_ln.assign(static_cast<size_t>(ids.n) * ids.l, {});
    if (drop) cache->keep0.assign(out.data.size(), 1.0);
  }
  for (int i = 0; i < ids.n; ++i) {
    for (int k = 0; k < ids.l; ++k) {
      int id = ids.at(i, k);
      require(id >= 0 && id <= p.cfg.item_count, "embed: item id out of range");
      if (!mask.at(i, k)) continue;  // pad positions stay exact zero
      require(id > 0, "embed: padding id at a real position");
      double* row = out.row(i, k);
      LayerNormCache* lc =
          cache ? &cache->embed_ln[pos_index(out, i, k)] : nullptr;
      layer_norm(p.e_row(id), h, p.embed_norm, row, lc);
      if (drop) {
        double* keep = cache ? cache->keep0.data() +
                                   (static_cast<size_t>(i) * ids.l + k) * h
                             : nullptr;
        if (keep) {
          draw_keep(*rng, p.cfg.dropout, keep, h);
          for (int j = 0; j < h; ++j) row[j] *= keep[j];
        } else {
          std::vector<double> tmp(h);
          draw_keep(*rng, p.cfg.dropout, tmp.data(), h);
          for (int j = 0; j < h; ++j) row[j] *= tmp[j];
        }
      }
    }
  }
  return out;
}

Tensor3 block_forward_impl(const Tensor3& x, const PadMask& mask,
                           const BlockParams& bp, const ModelConfig& cfg,
                           bool training, Rng* rng, BlockCache* cache) {
  int h = cfg.h;
  require(x.h == h, "block_forward: feature dim mismatch");
  bool drop = training && cfg.dropout > 0.0;
  size_t npos = static_cast<size_t>(x.n) * x.l;

  Tensor3 y = lru_forward_sequential(x, mask, bp.lru).y;
  if (drop) {
    std::vector<double> keep(y.data.size());
    draw_keep(*rng, cfg.dropout, keep.data(), static_cast<int>(keep.size()));
    for (size_t j = 0; j < y.data.size(); ++j) y.data[j] *= keep[j];
    if (cache) cache->keep1 = std::move(keep);
  }
  if (cache) {
    cache->x_in = x;
    cache->lru_drop = y;
    if (cfg.use_layer_norm) cache->ln1.assign(npos, {});
    if (cfg.use_pffn) {
      cache->pffn.assign(npos, {});
      if (cfg.use_layer_norm) cache->ln2.assign(npos, {});
    }
  }

  Tensor3 z(x.n, x.l, h);
  for (int i = 0; i < x.n; ++i) {
    for (int k = 0; k < x.l; ++k) {
      const double* src = y.row(i, k);
      double* dst = z.row(i, k);
      if (cfg.use_layer_norm) {
        layer_norm(src, h, bp.lru_norm, dst,
                   cache ? &cache->ln1[pos_index(z, i, k)] : nullptr);
      } else {
        std::copy(src, src + h, dst);
      }
    }
  }

  Tensor3 out;
  if (cfg.use_pffn) {
    out = Tensor3(x.n, x.l, h);
    std::vector<double> sum(h);
    for (int i = 0; i < x.n; ++i) {
      for (int k = 0; k < x.l; ++k) {
        size_t idx = pos_index(z, i, k);
        PffnCache local;
        PffnCache* pc = cache ? &cache->pffn[idx] : &local;
        if (drop) {
          pc->hidden_keep.resize(4 * h);
          draw_keep(*rng, cfg.dropout, pc->hidden_keep.data(), 4 * h);
        }
        pffn_forward(z.row(i, k), bp.pffn, sum.data(), pc);
        if (cfg.use_residual) {
          const double* zr = z.row(i, k);
          for (int j = 0; j < h; ++j) sum[j] += zr[j];
        }
        double* dst = out.row(i, k);
        if (cfg.use_layer_norm) {
          layer_norm(sum.data(), h, bp.pffn_norm, dst,
                     cache ? &cache->ln2[idx] : nullptr);
        } else {
          std::copy(sum.begin(), sum.end(), dst);
        }
      }
    }
  } else {
    out = std::move(z);
  }
  if (cache && cfg.use_pffn) cache->z = std::move(z);

  // Re-zero pads so they cannot feed the next block's recurrence.
  for (int i = 0; i < x.n; ++i)
    for (int k = 0; k < x.l; ++k)
      if (!mask.at(i, k)) std::fill(out.row(i, k), out.row(i, k) + h, 0.0);
  return out;
}

Tensor3 forward_all(const ModelParams& p, const IdMatrix& ids,
                    const PadMask& mask, bool training, Rng* rng,
                    ForwardCache* cache) {
  Tensor3 x = embed_impl(p, ids, mask, training, rng, cache);
  if (cache) {
    cache->embedded = x;
    cache->blocks.resize(p.blocks.size());
  }
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    x = block_forward_impl(x, mask, p.blocks[b], p.cfg, training, rng,
                           cache ? &cache->blocks[b] : nullptr);
  }
  if (cache) cache->hidden = x;
  return x;
}

// dout -> dx; parameter gradients accumulated into gb.
Tensor3 block_backward(const BlockCache& cache, const BlockParams& bp,
                       const ModelConfig& cfg, const PadMask& mask,
                       const Tensor3& dout, BlockParams& gb) {
  int h = cfg.h;
  int n = dout.n, l = dout.l;
  Tensor3 dlru(n, l, h);
  std::vector<double> dsum(h), dz(h), dzp(h), dtmp(h);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < l; ++k) {
      size_t idx = static_cast<size_t>(i) * l + k;
      const double* dpos = dout.row(i, k);
      if (cfg.use_pffn) {
        if (cfg.use_layer_norm) {
          layer_norm_backward(cache.ln2[idx], bp.pffn_norm, dpos, h,
                              dsum.data(), gb.pffn_norm.alpha.data(),
                              gb.pffn_norm.beta.data());
        } else {
          std::copy(dpos, dpos + h, dsum.begin());
        }
        pffn_backward(cache.pffn[idx], bp.pffn, dsum.data(), dzp.data(),
                      gb.pffn);
        for (int j = 0; j < h; ++j)
          dz[j] = dzp[j] + (cfg.use_residual ? dsum[j] : 0.0);
      } else {
        std::copy(dpos, dpos + h, dz.begin());
      }
      double* dl = dlru.row(i, k);
      if (cfg.use_layer_norm) {
        layer_norm_backward(cache.ln1[idx], bp.lru_norm, dz.data(), h,
                            dtmp.data(), gb.lru_norm.alpha.data(),
                            gb.lru_norm.beta.data());
        std::copy(dtmp.begin(), dtmp.end(), dl);
      } else {
        std::copy(dz.begin(), dz.end(), dl);
      }
      if (!cache.keep1.empty()) {
        const double* keep = cache.keep1.data() + idx * h;
        for (int j = 0; j < h; ++j) dl[j] *= keep[j];
      }
    }
  }
  LruBackward lb = lru_backward(cache.x_in, mask, bp.lru, dlru);
  auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
    for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  };
  add(gb.lru.nu_log, lb.dp.nu_log);
  add(gb.lru.theta_log, lb.dp.theta_log);
  add(gb.lru.gamma_log, lb.dp.gamma_log);
  add(gb.lru.b.re, lb.dp.b.re);
  add(gb.lru.b.im, lb.dp.b.im);
  add(gb.lru.c.re, lb.dp.c.re);
  add(gb.lru.c.im, lb.dp.c.im);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < l; ++k)
      if (!mask.at(i, k))
        std::fill(lb.dx.row(i, k), lb.dx.row(i, k) + h, 0.0);
  return std::move(lb.dx);
}

}  // namespace

ModelParams init_model(const ModelConfig& cfg, Rng& rng) {
  require(cfg.item_count >= 1 && cfg.h >= 1 && cfg.num_blocks >= 1,
          "init_model: invalid config");
  require(cfg.dropout >= 0.0 && cfg.dropout < 1.0,
          "init_model: dropout must be in [0, 1)");
  ModelParams p;
  p.cfg = cfg;
  p.e.assign(static_cast<size_t>(cfg.vocab()) * cfg.h, 0.0);
  for (int id = 1; id <= cfg.item_count; ++id) {
    double* row = p.e_row(id);
    for (int j = 0; j < cfg.h; ++j) row[j] = rng.truncated_normal(0.02);
  }
  p.embed_norm = LayerNormParams(cfg.h);
  p.blocks.resize(cfg.num_blocks);
  for (auto& b : p.blocks) {
    b.lru = init_lru(cfg.h, cfg.h_rec(), cfg.r_min, cfg.r_max, cfg.max_phase,
                     rng);
    b.lru_norm = LayerNormParams(cfg.h);
    b.pffn = PffnParams(cfg.h);
    for (auto& w : b.pffn.w1) w = rng.truncated_normal(0.02);
    for (auto& w : b.pffn.w2) w = rng.truncated_normal(0.02);
    b.pffn_norm = LayerNormParams(cfg.h);
  }
  p.b_o.assign(cfg.vocab(), 0.0);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& v : param_views(z)) std::fill(v.data, v.data + v.size, 0.0);
  return z;
}

std::vector<ParamView> param_views(ModelParams& p) {
  std::vector<ParamView> out;
  auto add = [&](const std::string& name, std::vector<double>& v) {
    out.push_back({name, v.data(), v.size()});
  };
  add("e", p.e);
  add("embed_norm.alpha", p.embed_norm.alpha);
  add("embed_norm.beta", p.embed_norm.beta);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    std::string pre = "block" + std::to_string(i) + ".";
    auto& b = p.blocks[i];
    add(pre + "nu_log", b.lru.nu_log);
    add(pre + "theta_log", b.lru.theta_log);
    add(pre + "gamma_log", b.lru.gamma_log);
    add(pre + "b.re", b.lru.b.re);
    add(pre + "b.im", b.lru.b.im);
    add(pre + "c.re", b.lru.c.re);
    add(pre + "c.im", b.lru.c.im);
    add(pre + "lru_norm.alpha", b.lru_norm.alpha);
    add(pre + "lru_norm.beta", b.lru_norm.beta);
    add(pre + "pffn.w1", b.pffn.w1);
    add(pre + "pffn.b1", b.pffn.b1);
    add(pre + "pffn.w2", b.pffn.w2);
    add(pre + "pffn.b2", b.pffn.b2);
    add(pre + "pffn_norm.alpha", b.pffn_norm.alpha);
    add(pre + "pffn_norm.beta", b.pffn_norm.beta);
  }
  add("b_o", p.b_o);
  return out;
}

Tensor3 embed(const ModelParams& p, const IdMatrix& ids, const PadMask& mask,
              bool training, Rng* rng) {
  return embed_impl(p, ids, mask, training, rng, nullptr);
}

Tensor3 block_forward(const Tensor3& x, const PadMask& mask,
                      const BlockParams& bp, const ModelConfig& cfg,
                      bool training, Rng* rng) {
  return block_forward_impl(x, mask, bp, cfg, training, rng, nullptr);
}

Tensor3 model_hidden(const ModelParams& p, const IdMatrix& ids,
                     const PadMask& mask, bool training, Rng* rng) {
  return forward_all(p, ids, mask, training, rng, nullptr);
}

void predict_scores(const ModelParams& p, const double* hidden, double* out) {
  int h = p.cfg.h;
  out[0] = kNegInfSurrogate;
  for (int c = 1; c <= p.cfg.item_count; ++c) {
    const double* row = p.e_row(c);
    double s = p.b_o[c];
    for (int j = 0; j < h; ++j) s += row[j] * hidden[j];
    out[c] = s;
  }
}

Tensor3 model_forward(const ModelParams& p, const IdMatrix& ids,
                      const PadMask& mask, bool training, Rng* rng) {
  Tensor3 hidden = forward_all(p, ids, mask, training, rng, nullptr);
  Tensor3 logits(ids.n, ids.l, p.cfg.vocab());
  for (int i = 0; i < ids.n; ++i)
    for (int k = 0; k < ids.l; ++k)
      predict_scores(p, hidden.row(i, k), logits.row(i, k));
  return logits;
}

SessionState fresh_session(const ModelParams& p) {
  SessionState s;
  s.layers.assign(p.blocks.size(), SessionStateLayer(p.cfg.h_rec()));
  s.last_hidden.assign(p.cfg.h, 0.0);
  return s;
}

void model_step_scores(const ModelParams& p, SessionState& state, int new_item,
                       std::vector<double>& scores) {
  require(state.layers.size() == p.blocks.size(),
          "model_step: state block count mismatch");
  require(new_item >= 1 && new_item <= p.cfg.item_count,
          "model_step: item id out of range (padding item not steppable)");
  int h = p.cfg.h;
  const ModelConfig& cfg = p.cfg;
  std::vector<double> x(h), y(h), z(h), sum(h);
  layer_norm(p.e_row(new_item), h, p.embed_norm, x.data());
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    const BlockParams& bp = p.blocks[b];
    lru_step(bp.lru, state.layers[b], x.data(), y.data());
    if (cfg.use_layer_norm) {
      layer_norm(y.data(), h, bp.lru_norm, z.data());
    } else {
      z = y;
    }
    if (cfg.use_pffn) {
      pffn_forward(z.data(), bp.pffn, sum.data());
      if (cfg.use_residual)
        for (int j = 0; j < h; ++j) sum[j] += z[j];
      if (cfg.use_layer_norm) {
        layer_norm(sum.data(), h, bp.pffn_norm, x.data());
      } else {
        x = sum;
      }
    } else {
      x = z;
    }
  }
  state.last_hidden = x;
  scores.resize(cfg.vocab());
  predict_scores(p, x.data(), scores.data());
}

StepResult model_step(const ModelParams& p, SessionState& state, int new_item,
                      int k) {
  std::vector<double> scores;
  model_step_scores(p, state, new_item, scores);
  int v = static_cast<int>(scores.size());
  k = std::min(k, p.cfg.item_count);
  std::vector<int> idx(v - 1);
  std::iota(idx.begin(), idx.end(), 1);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  StepResult r;
  for (int i = 0; i < k; ++i) {
    r.top_ids.push_back(idx[i]);
    r.top_scores.push_back(scores[idx[i]]);
  }
  return r;
}

LossResult model_backward(const ModelParams& p, const IdMatrix& ids,
                          const IdMatrix& targets, const PadMask& mask,
                          bool training, Rng* rng, int negative_samples) {
  require(targets.n == ids.n && targets.l == ids.l,
          "model_backward: target shape mismatch");
  int h = p.cfg.h;
  int vocab = p.cfg.vocab();
  ForwardCache cache;
  forward_all(p, ids, mask, training, rng, &cache);

  LossResult res;
  res.grads = zeros_like(p);
  for (int i = 0; i < ids.n; ++i)
    for (int k = 0; k < ids.l; ++k)
      if (mask.at(i, k) && targets.at(i, k) > 0) ++res.positions;
  if (res.positions == 0) return res;
  double w = 1.0 / static_cast<double>(res.positions);

  Tensor3 dhidden(ids.n, ids.l, h);
  std::vector<double> scores, dlogits;
  std::vector<int> cand;
  for (int i = 0; i < ids.n; ++i) {
    for (int k = 0; k < ids.l; ++k) {
      int target = targets.at(i, k);
      if (!mask.at(i, k) || target <= 0) continue;
      require(target < vocab, "model_backward: target out of range");
      const double* hv = cache.hidden.row(i, k);
      double* dh = dhidden.row(i, k);
      if (negative_samples > 0 && negative_samples < p.cfg.item_count - 1) {
        // Softmax restricted to the target plus sampled negatives,
        // uniform without replacement.
        require(rng != nullptr, "model_backward: sampling requires an rng");
        cand.clear();
        cand.push_back(target);
        std::vector<std::uint8_t> used(vocab, 0);
        used[target] = 1;
        while (static_cast<int>(cand.size()) < negative_samples + 1) {
          int c = 1 + static_cast<int>(rng->below(p.cfg.item_count));
          if (used[c]) continue;
          used[c] = 1;
          cand.push_back(c);
        }
      } else if (negative_samples > 0) {
        cand.clear();
        for (int c = 1; c < vocab; ++c) cand.push_back(c);
        std::swap(cand[0], cand[target - 1]);
      } else {
        cand.clear();
      }
      if (cand.empty()) {
        scores.resize(vocab);
        predict_scores(p, hv, scores.data());
        dlogits.resize(vocab);
        res.loss += w * cross_entropy_grad(scores.data(), vocab, target,
                                           dlogits.data());
        for (int c = 1; c < vocab; ++c) {
          double g = w * dlogits[c];
          if (g == 0.0) continue;
          const double* row = p.e_row(c);
          double* grow = res.grads.e.data() + static_cast<size_t>(c) * h;
          for (int j = 0; j < h; ++j) {
            grow[j] += g * hv[j];
            dh[j] += g * row[j];
          }
          res.grads.b_o[c] += g;
        }
      } else {
        int m = static_cast<int>(cand.size());
        scores.resize(m);
        for (int ci = 0; ci < m; ++ci) {
          const double* row = p.e_row(cand[ci]);
          double s = p.b_o[cand[ci]];
          for (int j = 0; j < h; ++j) s += row[j] * hv[j];
          scores[ci] = s;
        }
        dlogits.resize(m);
        res.loss +=
            w * cross_entropy_grad(scores.data(), m, 0, dlogits.data());
        for (int ci = 0; ci < m; ++ci) {
          double g = w * dlogits[ci];
          int c = cand[ci];
          const double* row = p.e_row(c);
          double* grow = res.grads.e.data() + static_cast<size_t>(c) * h;
          for (int j = 0; j < h; ++j) {
            grow[j] += g * hv[j];
            dh[j] += g * row[j];
          }
          res.grads.b_o[c] += g;
        }
      }
    }
  }

  Tensor3 dx = dhidden;
  for (int b = static_cast<int>(p.blocks.size()) - 1; b >= 0; --b) {
    dx = block_backward(cache.blocks[b], p.blocks[b], p.cfg, mask, dx,
                        res.grads.blocks[b]);
  }
  // Through the embedding: dropout, layer norm, then the E rows.
  std::vector<double> dpos(h), drow(h);
  for (int i = 0; i < ids.n; ++i) {
    for (int k = 0; k < ids.l; ++k) {
      if (!mask.at(i, k)) continue;
      int id = ids.at(i, k);
      const double* d = dx.row(i, k);
      std::copy(d, d + h, dpos.begin());
      if (!cache.keep0.empty()) {
        const double* keep =
            cache.keep0.data() + (static_cast<size_t>(i) * ids.l + k) * h;
        for (int j = 0; j < h; ++j) dpos[j] *= keep[j];
      }
      layer_norm_backward(cache.embed_ln[static_cast<size_t>(i) * ids.l + k],
                          p.embed_norm, dpos.data(), h, drow.data(),
                          res.grads.embed_norm.alpha.data(),
                          res.grads.embed_norm.beta.data());
      double* grow = res.grads.e.data() + static_cast<size_t>(id) * h;
      for (int j = 0; j < h; ++j) grow[j] += drow[j];
    }
  }
  // The padding row never trains.
  std::fill(res.grads.e.begin(), res.grads.e.begin() + h, 0.0);
  return res;
}

namespace {
constexpr char kMagic[8] = {'L', 'R', 'U', 'R', 'E', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& p,
                     std::uint64_t vocab_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, p.cfg.item_count);
  write_pod(os, p.cfg.h);
  write_pod(os, p.cfg.num_blocks);
  write_pod(os, p.cfg.dropout);
  std::int32_t flags = (p.cfg.use_layer_norm ? 1 : 0) |
                       (p.cfg.use_residual ? 2 : 0) | (p.cfg.use_pffn ? 4 : 0);
  write_pod(os, flags);
  write_pod(os, p.cfg.r_min);
  write_pod(os, p.cfg.r_max);
  write_pod(os, p.cfg.max_phase);
  write_pod(os, vocab_hash);
  auto views = param_views(const_cast<ModelParams&>(p));
  for (const auto& v : views)
    os.write(reinterpret_cast<const char*>(v.data),
             static_cast<std::streamsize>(v.size * sizeof(double)));
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  ModelConfig cfg;
  read_pod(is, cfg.item_count);
  read_pod(is, cfg.h);
  read_pod(is, cfg.num_blocks);
  read_pod(is, cfg.dropout);
  std::int32_t flags = 0;
  read_pod(is, flags);
  cfg.use_layer_norm = flags & 1;
  cfg.use_residual = flags & 2;
  cfg.use_pffn = flags & 4;
  read_pod(is, cfg.r_min);
  read_pod(is, cfg.r_max);
  read_pod(is, cfg.max_phase);
  Checkpoint ck;
  read_pod(is, ck.vocab_hash);
  Rng dummy(0);
  ck.params = init_model(cfg, dummy);
  auto views = param_views(ck.params);
  for (auto& v : views)
    is.read(reinterpret_cast<char*>(v.data),
            static_cast<std::streamsize>(v.size * sizeof(double)));
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return ck;
}

}  // namespace lrurec
