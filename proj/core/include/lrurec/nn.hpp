#pragma once

#include <functional>
#include <vector>

#include "lrurec/tensor.hpp"

namespace lrurec {

struct LayerNormParams {
  std::vector<double> alpha;  // scale
  std::vector<double> beta;   // shift
  double eps = 1e-12;

  explicit LayerNormParams(int h = 0)
      : alpha(h, 1.0), beta(h, 0.0) {}
};

// Two-layer position-wise MLP with 4x hidden expansion.
struct PffnParams {
  int h = 0;
  std::vector<double> w1;  // (4h x h) row-major
  std::vector<double> b1;  // 4h
  std::vector<double> w2;  // (h x 4h) row-major
  std::vector<double> b2;  // h

  explicit PffnParams(int h_ = 0)
      : h(h_),
        w1(static_cast<size_t>(4 * h_) * h_, 0.0),
        b1(4 * h_, 0.0),
        w2(static_cast<size_t>(4 * h_) * h_, 0.0),
        b2(h_, 0.0) {}
};

double gelu(double x);
double gelu_grad(double x);

struct LayerNormCache {
  double inv_std = 0.0;
  std::vector<double> xhat;
};

void layer_norm(const double* x, int h, const LayerNormParams& p, double* out,
                LayerNormCache* cache = nullptr);
std::vector<double> layer_norm(const std::vector<double>& x,
                               const LayerNormParams& p);

// dx may alias nothing; dalpha/dbeta are accumulated into.
void layer_norm_backward(const LayerNormCache& cache, const LayerNormParams& p,
                         const double* dy, int h, double* dx, double* dalpha,
                         double* dbeta);

struct PffnCache {
  std::vector<double> x;       // input
  std::vector<double> a1;      // pre-activation, 4h
  std::vector<double> g1;      // GELU(a1), possibly dropout-scaled
  std::vector<double> a2;      // pre-activation, h
  std::vector<double> hidden_keep;  // dropout keep mask on g1 (empty = none)
};

void pffn_forward(const double* x, const PffnParams& p, double* out,
                  PffnCache* cache = nullptr);
std::vector<double> pffn_forward(const std::vector<double>& x,
                                 const PffnParams& p);

void pffn_backward(const PffnCache& cache, const PffnParams& p,
                   const double* dy, double* dx, PffnParams& dp);

// Stable -log softmax(logits)[target] with max subtraction.
double cross_entropy(const std::vector<double>& logits, int target);
// Also writes softmax(logits) - onehot(target) into dlogits.
double cross_entropy_grad(const double* logits, int v, int target,
                          double* dlogits);

// Central-difference gradient oracle.
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> p, double eps);

}  // namespace lrurec
