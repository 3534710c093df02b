#include "lrurec/nn.hpp"

#include <algorithm>
#include <cmath>

namespace lrurec {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return phi + x * pdf;
}

void layer_norm(const double* x, int h, const LayerNormParams& p, double* out,
                LayerNormCache* cache) {
  require(h >= 1, "layer_norm: empty input");
  require(static_cast<int>(p.alpha.size()) == h &&
              static_cast<int>(p.beta.size()) == h,
          "layer_norm: parameter shape mismatch");
  double mean = 0.0;
  for (int j = 0; j < h; ++j) mean += x[j];
  mean /= h;
  double var = 0.0;  // population variance, no Bessel correction
  for (int j = 0; j < h; ++j) {
    double d = x[j] - mean;
    var += d * d;
  }
  var /= h;
  double inv_std = 1.0 / std::sqrt(var + p.eps);
  if (cache) {
    cache->inv_std = inv_std;
    cache->xhat.resize(h);
  }
  for (int j = 0; j < h; ++j) {
    double xh = (x[j] - mean) * inv_std;
    if (cache) cache->xhat[j] = xh;
    out[j] = p.alpha[j] * xh + p.beta[j];
  }
}

std::vector<double> layer_norm(const std::vector<double>& x,
                               const LayerNormParams& p) {
  std::vector<double> out(x.size());
  layer_norm(x.data(), static_cast<int>(x.size()), p, out.data());
  return out;
}

void layer_norm_backward(const LayerNormCache& cache, const LayerNormParams& p,
                         const double* dy, int h, double* dx, double* dalpha,
                         double* dbeta) {
  double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
  for (int j = 0; j < h; ++j) {
    double dxhat = dy[j] * p.alpha[j];
    sum_dxhat += dxhat;
    sum_dxhat_xhat += dxhat * cache.xhat[j];
    if (dalpha) dalpha[j] += dy[j] * cache.xhat[j];
    if (dbeta) dbeta[j] += dy[j];
  }
  double inv_h = 1.0 / h;
  for (int j = 0; j < h; ++j) {
    double dxhat = dy[j] * p.alpha[j];
    dx[j] = cache.inv_std *
            (dxhat - inv_h * sum_dxhat - cache.xhat[j] * inv_h * sum_dxhat_xhat);
  }
}

void pffn_forward(const double* x, const PffnParams& p, double* out,
                  PffnCache* cache) {
  int h = p.h, h4 = 4 * p.h;
  require(h >= 1, "pffn_forward: empty params");
  std::vector<double> a1(h4), g1(h4), a2(h);
  for (int i = 0; i < h4; ++i) {
    double s = p.b1[i];
    const double* row = p.w1.data() + static_cast<size_t>(i) * h;
    for (int j = 0; j < h; ++j) s += row[j] * x[j];
    a1[i] = s;
    g1[i] = gelu(s);
  }
  if (cache && !cache->hidden_keep.empty()) {
    for (int i = 0; i < h4; ++i) g1[i] *= cache->hidden_keep[i];
  }
  for (int i = 0; i < h; ++i) {
    double s = p.b2[i];
    const double* row = p.w2.data() + static_cast<size_t>(i) * h4;
    for (int j = 0; j < h4; ++j) s += row[j] * g1[j];
    a2[i] = s;
    out[i] = gelu(s);  // outer activation applied as well
  }
  if (cache) {
    cache->x.assign(x, x + h);
    cache->a1 = std::move(a1);
    cache->g1 = std::move(g1);
    cache->a2 = std::move(a2);
  }
}

std::vector<double> pffn_forward(const std::vector<double>& x,
                                 const PffnParams& p) {
  require(static_cast<int>(x.size()) == p.h, "pffn_forward: shape mismatch");
  std::vector<double> out(p.h);
  pffn_forward(x.data(), p, out.data());
  return out;
}

void pffn_backward(const PffnCache& cache, const PffnParams& p,
                   const double* dy, double* dx, PffnParams& dp) {
  int h = p.h, h4 = 4 * p.h;
  std::vector<double> da2(h), dg1(h4, 0.0);
  for (int i = 0; i < h; ++i) da2[i] = dy[i] * gelu_grad(cache.a2[i]);
  for (int i = 0; i < h; ++i) {
    const double* row = p.w2.data() + static_cast<size_t>(i) * h4;
    double* drow = dp.w2.data() + static_cast<size_t>(i) * h4;
    for (int j = 0; j < h4; ++j) {
      drow[j] += da2[i] * cache.g1[j];
      dg1[j] += da2[i] * row[j];
    }
    dp.b2[i] += da2[i];
  }
  if (!cache.hidden_keep.empty()) {
    for (int j = 0; j < h4; ++j) dg1[j] *= cache.hidden_keep[j];
  }
  for (int j = 0; j < h; ++j) dx[j] = 0.0;
  for (int i = 0; i < h4; ++i) {
    double da1 = dg1[i] * gelu_grad(cache.a1[i]);
    const double* row = p.w1.data() + static_cast<size_t>(i) * h;
    double* drow = dp.w1.data() + static_cast<size_t>(i) * h;
    for (int j = 0; j < h; ++j) {
      drow[j] += da1 * cache.x[j];
      dx[j] += da1 * row[j];
    }
    dp.b1[i] += da1;
  }
}

double cross_entropy(const std::vector<double>& logits, int target) {
  int v = static_cast<int>(logits.size());
  require(target >= 0 && target < v, "cross_entropy: target out of range");
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return std::log(sum) - (logits[target] - mx);
}

double cross_entropy_grad(const double* logits, int v, int target,
                          double* dlogits) {
  require(target >= 0 && target < v, "cross_entropy: target out of range");
  double mx = logits[0];
  for (int i = 1; i < v; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (int i = 0; i < v; ++i) {
    dlogits[i] = std::exp(logits[i] - mx);
    sum += dlogits[i];
  }
  double inv = 1.0 / sum;
  for (int i = 0; i < v; ++i) dlogits[i] *= inv;
  double loss = std::log(sum) - (logits[target] - mx);
  dlogits[target] -= 1.0;
  return loss;
}

std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> p, double eps) {
  require(eps > 0.0, "finite_diff_grad: eps must be positive");
  std::vector<double> g(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    double orig = p[i];
    p[i] = orig + eps;
    double fp = f(p);
    p[i] = orig - eps;
    double fm = f(p);
    p[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite objective");
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

}  // namespace lrurec
