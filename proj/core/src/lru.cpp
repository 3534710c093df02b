#include "lrurec/lru.hpp"

#include <cmath>

namespace lrurec {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Per-channel eigenvalue magnitude/phase, precomputed once per sequence.
struct Diagonal {
  std::vector<double> lre, lim, g;

  explicit Diagonal(const LruParams& p)
      : lre(p.h_rec), lim(p.h_rec), g(p.h_rec) {
    for (int r = 0; r < p.h_rec; ++r) {
      double mag = std::exp(-std::exp(p.nu_log[r]));
      double phase = std::exp(p.theta_log[r]);
      lre[r] = mag * std::cos(phase);
      lim[r] = mag * std::sin(phase);
      g[r] = std::exp(p.gamma_log[r]);
    }
  }
};

void step_impl(const LruParams& p, const Diagonal& d, double* hre, double* him,
               const double* x_k, double* y_k) {
  int hr = p.h_rec, hi = p.h_in;
  for (int r = 0; r < hr; ++r) {
    const double* bre = p.b.re.data() + static_cast<size_t>(r) * hi;
    const double* bim = p.b.im.data() + static_cast<size_t>(r) * hi;
    double bxre = 0.0, bxim = 0.0;
    for (int j = 0; j < hi; ++j) {
      bxre += bre[j] * x_k[j];
      bxim += bim[j] * x_k[j];
    }
    double nre = d.lre[r] * hre[r] - d.lim[r] * him[r] + d.g[r] * bxre;
    double nim = d.lre[r] * him[r] + d.lim[r] * hre[r] + d.g[r] * bxim;
    hre[r] = nre;
    him[r] = nim;
  }
  for (int o = 0; o < hi; ++o) {
    const double* cre = p.c.re.data() + static_cast<size_t>(o) * hr;
    const double* cim = p.c.im.data() + static_cast<size_t>(o) * hr;
    double s = 0.0;
    for (int r = 0; r < hr; ++r) s += cre[r] * hre[r] - cim[r] * him[r];
    y_k[o] = s + x_k[o];
  }
}
}  // namespace

int next_pow2(int l) {
  int p = 1;
  while (p < l) p <<= 1;
  return p;
}

LruParams init_lru(int h_in, int h_rec, double r_min, double r_max,
                   double max_phase, Rng& rng) {
  require(h_in >= 1 && h_rec >= 1, "init_lru: dims must be positive");
  require(r_min > 0.0 && r_max < 1.0 && r_min <= r_max,
          "init_lru: invalid radius bounds");
  require(max_phase > 0.0 && max_phase <= kTwoPi,
          "init_lru: max_phase out of range");
  LruParams p(h_in, h_rec);
  for (int r = 0; r < h_rec; ++r) {
    double u1 = rng.uniform();
    double u2 = rng.uniform_open();
    // Magnitude uniform over the annulus area: sample the squared radius.
    double mag2 = u1 * (r_max * r_max - r_min * r_min) + r_min * r_min;
    p.nu_log[r] = std::log(-0.5 * std::log(mag2));
    p.theta_log[r] = std::log(u2 * max_phase);
    p.gamma_log[r] = 0.5 * std::log(1.0 - mag2);
  }
  auto fill = [&](CMat& m) {
    for (size_t i = 0; i < m.re.size(); ++i) {
      m.re[i] = rng.truncated_normal(0.02);
      m.im[i] = rng.truncated_normal(0.02);
    }
  };
  fill(p.b);
  fill(p.c);
  return p;
}

ComplexVec lambda_of(const LruParams& p) {
  ComplexVec v(p.h_rec);
  for (int r = 0; r < p.h_rec; ++r) {
    double mag = std::exp(-std::exp(p.nu_log[r]));
    double phase = std::exp(p.theta_log[r]);
    v.re[r] = mag * std::cos(phase);
    v.im[r] = mag * std::sin(phase);
  }
  return v;
}

void lru_step(const LruParams& p, SessionStateLayer& s, const double* x_k,
              double* y_k) {
  Diagonal d(p);
  step_impl(p, d, s.h.re.data(), s.h.im.data(), x_k, y_k);
}

LruForward lru_forward_sequential(const Tensor3& x, const PadMask& mask,
                                  const LruParams& p) {
  require(x.h == p.h_in, "lru_forward: feature dim mismatch");
  require(mask.n == x.n && mask.l == x.l, "lru_forward: mask shape mismatch");
  Diagonal d(p);
  LruForward out;
  out.y = Tensor3(x.n, x.l, x.h);
  out.final_state.assign(x.n, SessionStateLayer(p.h_rec));
  for (int i = 0; i < x.n; ++i) {
    auto& s = out.final_state[i];
    for (int k = 0; k < x.l; ++k)
      step_impl(p, d, s.h.re.data(), s.h.im.data(), x.row(i, k), out.y.row(i, k));
  }
  return out;
}

ScanResult lru_forward_parallel(const Tensor3& x, const PadMask& mask,
                                const LruParams& p) {
  require(x.h == p.h_in, "lru_forward_parallel: feature dim mismatch");
  require(mask.n == x.n && mask.l == x.l,
          "lru_forward_parallel: mask shape mismatch");
  require(x.l >= 1 && (x.l & (x.l - 1)) == 0,
          "lru_forward_parallel: L must be a power of two");
  int n = x.n, l = x.l, hi = p.h_in, hr = p.h_rec;
  Diagonal d(p);

  // h starts as the per-position inputs gamma (.) B x_k.
  size_t total = static_cast<size_t>(n) * l * hr;
  std::vector<double> hre(total, 0.0), him(total, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < l; ++k) {
      const double* xk = x.row(i, k);
      double* tre = hre.data() + (static_cast<size_t>(i) * l + k) * hr;
      double* tim = him.data() + (static_cast<size_t>(i) * l + k) * hr;
      for (int r = 0; r < hr; ++r) {
        const double* bre = p.b.re.data() + static_cast<size_t>(r) * hi;
        const double* bim = p.b.im.data() + static_cast<size_t>(r) * hi;
        double sre = 0.0, sim = 0.0;
        for (int j = 0; j < hi; ++j) {
          sre += bre[j] * xk[j];
          sim += bim[j] * xk[j];
        }
        tre[r] = d.g[r] * sre;
        tim[r] = d.g[r] * sim;
      }
    }
  }

  // Power table [La, La^2, ...], grown by doubling concatenation.
  std::vector<double> pre(d.lre), pim(d.lim);
  int passes = 0;
  for (int len = 2; len <= l; len <<= 1) {
    int half = len >> 1;
    if (passes > 0) {
      size_t old = pre.size();
      pre.resize(old * 2);
      pim.resize(old * 2);
      const double* lastre = pre.data() + old - hr;
      const double* lastim = pim.data() + old - hr;
      for (size_t j = 0; j < old; ++j) {
        int r = static_cast<int>(j % hr);
        pre[old + j] = pre[j] * lastre[r] - pim[j] * lastim[r];
        pim[old + j] = pre[j] * lastim[r] + pim[j] * lastre[r];
      }
    }
    // Merge each pair of halves; blocks are independent within a pass.
    for (int i = 0; i < n; ++i) {
      for (int s = 0; s < l; s += len) {
        size_t base = (static_cast<size_t>(i) * l + s) * hr;
        const double* lre_ = hre.data() + base + static_cast<size_t>(half - 1) * hr;
        const double* lim_ = him.data() + base + static_cast<size_t>(half - 1) * hr;
        for (int j = 0; j < half; ++j) {
          double* tre = hre.data() + base + static_cast<size_t>(half + j) * hr;
          double* tim = him.data() + base + static_cast<size_t>(half + j) * hr;
          const double* qre = pre.data() + static_cast<size_t>(j) * hr;
          const double* qim = pim.data() + static_cast<size_t>(j) * hr;
          for (int r = 0; r < hr; ++r) {
            tre[r] += qre[r] * lre_[r] - qim[r] * lim_[r];
            tim[r] += qre[r] * lim_[r] + qim[r] * lre_[r];
          }
        }
      }
    }
    ++passes;
  }

  ScanResult res;
  res.passes = passes;
  res.y = Tensor3(n, l, hi);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < l; ++k) {
      const double* tre = hre.data() + (static_cast<size_t>(i) * l + k) * hr;
      const double* tim = him.data() + (static_cast<size_t>(i) * l + k) * hr;
      const double* xk = x.row(i, k);
      double* yk = res.y.row(i, k);
      for (int o = 0; o < hi; ++o) {
        const double* cre = p.c.re.data() + static_cast<size_t>(o) * hr;
        const double* cim = p.c.im.data() + static_cast<size_t>(o) * hr;
        double s = 0.0;
        for (int r = 0; r < hr; ++r) s += cre[r] * tre[r] - cim[r] * tim[r];
        yk[o] = s + xk[o];
      }
    }
  }
  return res;
}

LruBackward lru_backward(const Tensor3& x, const PadMask& mask,
                         const LruParams& p, const Tensor3& dy) {
  require(dy.n == x.n && dy.l == x.l && dy.h == x.h,
          "lru_backward: dy shape mismatch");
  require(x.h == p.h_in, "lru_backward: feature dim mismatch");
  int n = x.n, l = x.l, hi = p.h_in, hr = p.h_rec;
  Diagonal d(p);

  // Recompute and store the forward trajectory and per-step inputs B x_k.
  size_t total = static_cast<size_t>(n) * l * hr;
  std::vector<double> hre(total), him(total), bxre(total), bxim(total);
  for (int i = 0; i < n; ++i) {
    std::vector<double> sre(hr, 0.0), sim(hr, 0.0);
    for (int k = 0; k < l; ++k) {
      const double* xk = x.row(i, k);
      size_t off = (static_cast<size_t>(i) * l + k) * hr;
      for (int r = 0; r < hr; ++r) {
        const double* bre = p.b.re.data() + static_cast<size_t>(r) * hi;
        const double* bim = p.b.im.data() + static_cast<size_t>(r) * hi;
        double ure = 0.0, uim = 0.0;
        for (int j = 0; j < hi; ++j) {
          ure += bre[j] * xk[j];
          uim += bim[j] * xk[j];
        }
        bxre[off + r] = ure;
        bxim[off + r] = uim;
        double nre = d.lre[r] * sre[r] - d.lim[r] * sim[r] + d.g[r] * ure;
        double nim = d.lre[r] * sim[r] + d.lim[r] * sre[r] + d.g[r] * uim;
        sre[r] = nre;
        sim[r] = nim;
        hre[off + r] = nre;
        him[off + r] = nim;
      }
    }
  }

  LruBackward out;
  out.dx = Tensor3(n, l, hi);
  out.dp = LruParams(hi, hr);
  std::vector<double> dlre(hr, 0.0), dlim(hr, 0.0);

  std::vector<double> ahre(hr), ahim(hr), dure(hr), duim(hr);
  for (int i = 0; i < n; ++i) {
    std::fill(ahre.begin(), ahre.end(), 0.0);
    std::fill(ahim.begin(), ahim.end(), 0.0);
    for (int k = l - 1; k >= 0; --k) {
      size_t off = (static_cast<size_t>(i) * l + k) * hr;
      const double* dyk = dy.row(i, k);
      double* dxk = out.dx.row(i, k);
      // y_k = Re(C h_k) + x_k
      for (int o = 0; o < hi; ++o) {
        dxk[o] += dyk[o];
        double g = dyk[o];
        if (g == 0.0) continue;
        const double* cre = p.c.re.data() + static_cast<size_t>(o) * hr;
        const double* cim = p.c.im.data() + static_cast<size_t>(o) * hr;
        double* dcre = out.dp.c.re.data() + static_cast<size_t>(o) * hr;
        double* dcim = out.dp.c.im.data() + static_cast<size_t>(o) * hr;
        for (int r = 0; r < hr; ++r) {
          dcre[r] += g * hre[off + r];
          dcim[r] -= g * him[off + r];
          ahre[r] += g * cre[r];
          ahim[r] -= g * cim[r];
        }
      }
      // h_k = lambda h_{k-1} + g (.) B x_k
      const double* xk = x.row(i, k);
      for (int r = 0; r < hr; ++r) {
        double pre_re = 0.0, pre_im = 0.0;
        if (k > 0) {
          pre_re = hre[off - hr + r];
          pre_im = him[off - hr + r];
        }
        dlre[r] += ahre[r] * pre_re + ahim[r] * pre_im;
        dlim[r] += -ahre[r] * pre_im + ahim[r] * pre_re;
        out.dp.gamma_log[r] +=
            (ahre[r] * bxre[off + r] + ahim[r] * bxim[off + r]) * d.g[r];
        dure[r] = d.g[r] * ahre[r];
        duim[r] = d.g[r] * ahim[r];
        // adjoint through the recurrence: multiply by conj(lambda)
        double nre = d.lre[r] * ahre[r] + d.lim[r] * ahim[r];
        double nim = -d.lim[r] * ahre[r] + d.lre[r] * ahim[r];
        ahre[r] = nre;
        ahim[r] = nim;
      }
      for (int r = 0; r < hr; ++r) {
        double* dbre = out.dp.b.re.data() + static_cast<size_t>(r) * hi;
        double* dbim = out.dp.b.im.data() + static_cast<size_t>(r) * hi;
        const double* bre = p.b.re.data() + static_cast<size_t>(r) * hi;
        const double* bim = p.b.im.data() + static_cast<size_t>(r) * hi;
        for (int j = 0; j < hi; ++j) {
          dbre[j] += dure[r] * xk[j];
          dbim[j] += duim[r] * xk[j];
          dxk[j] += dure[r] * bre[j] + duim[r] * bim[j];
        }
      }
    }
  }

  // Chain dlambda into the log parameters.
  for (int r = 0; r < hr; ++r) {
    double mag = std::exp(-std::exp(p.nu_log[r]));
    double phase = std::exp(p.theta_log[r]);
    double cosp = std::cos(phase), sinp = std::sin(phase);
    double dmag = dlre[r] * cosp + dlim[r] * sinp;
    out.dp.nu_log[r] = dmag * mag * (-std::exp(p.nu_log[r]));
    double dphase = mag * (-sinp * dlre[r] + cosp * dlim[r]);
    out.dp.theta_log[r] = dphase * phase;
  }
  return out;
}

std::pair<Tensor3, PadMask> pad_pow2(const Tensor3& x, const PadMask& mask) {
  require(x.l >= 1, "pad_pow2: empty sequence");
  int lp = next_pow2(x.l);
  if (lp == x.l) return {x, mask};
  int shift = lp - x.l;
  Tensor3 out(x.n, lp, x.h);
  PadMask m(x.n, lp);
  for (int i = 0; i < x.n; ++i) {
    for (int k = 0; k < lp; ++k) m.set(i, k, false);
    for (int k = 0; k < x.l; ++k) {
      const double* src = x.row(i, k);
      double* dst = out.row(i, k + shift);
      for (int j = 0; j < x.h; ++j) dst[j] = src[j];
      m.set(i, k + shift, mask.at(i, k));
    }
  }
  return {std::move(out), std::move(m)};
}

}  // namespace lrurec
