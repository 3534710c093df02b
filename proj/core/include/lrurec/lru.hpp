#pragma once

#include <utility>
#include <vector>

#include "lrurec/rng.hpp"
#include "lrurec/tensor.hpp"

namespace lrurec {

// Complex matrix stored as parallel real/imaginary row-major arrays.
struct CMat {
  int rows = 0, cols = 0;
  std::vector<double> re, im;

  CMat() = default;
  CMat(int r, int c)
      : rows(r), cols(c),
        re(static_cast<size_t>(r) * c, 0.0),
        im(static_cast<size_t>(r) * c, 0.0) {}
};

// Diagonal complex recurrence parameters for one layer. The eigenvalue
// magnitude exp(-exp(nu_log)) is in (0, 1) for any finite nu_log.
struct LruParams {
  int h_in = 0, h_rec = 0;
  std::vector<double> nu_log, theta_log, gamma_log;
  CMat b;  // (h_rec x h_in)
  CMat c;  // (h_in x h_rec), output width equals input width

  LruParams() = default;
  LruParams(int h_in_, int h_rec_)
      : h_in(h_in_), h_rec(h_rec_),
        nu_log(h_rec_, 0.0), theta_log(h_rec_, 0.0), gamma_log(h_rec_, 0.0),
        b(h_rec_, h_in_), c(h_in_, h_rec_) {}
};

struct SessionStateLayer {
  ComplexVec h;

  SessionStateLayer() = default;
  explicit SessionStateLayer(int h_rec) : h(h_rec) {}
};

LruParams init_lru(int h_in, int h_rec, double r_min, double r_max,
                   double max_phase, Rng& rng);

ComplexVec lambda_of(const LruParams& p);

// One recurrence step; x_k has length h_in, y_k length h_in. The state is
// updated in place. Iterating this from a zero state is bitwise identical
// to lru_forward_sequential.
void lru_step(const LruParams& p, SessionStateLayer& s, const double* x_k,
              double* y_k);

struct LruForward {
  Tensor3 y;
  std::vector<SessionStateLayer> final_state;  // one per batch row
};

LruForward lru_forward_sequential(const Tensor3& x, const PadMask& mask,
                                  const LruParams& p);

struct ScanResult {
  Tensor3 y;
  int passes = 0;
};

// Log-time scan over subsequence halves; requires L to be a power of two.
ScanResult lru_forward_parallel(const Tensor3& x, const PadMask& mask,
                                const LruParams& p);

struct LruBackward {
  Tensor3 dx;
  LruParams dp;  // same shapes, holds gradients
};

LruBackward lru_backward(const Tensor3& x, const PadMask& mask,
                         const LruParams& p, const Tensor3& dy);

std::pair<Tensor3, PadMask> pad_pow2(const Tensor3& x, const PadMask& mask);

int next_pow2(int l);

}  // namespace lrurec
