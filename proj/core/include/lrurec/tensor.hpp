#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lrurec {

// Dense real array of shape (batch, length, feature). The inter-module
// activation currency.
struct Tensor3 {
  int n = 0, l = 0, h = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int n_, int l_, int h_)
      : n(n_), l(l_), h(h_), data(static_cast<size_t>(n_) * l_ * h_, 0.0) {}

  double* row(int i, int k) {
    return data.data() + (static_cast<size_t>(i) * l + k) * h;
  }
  const double* row(int i, int k) const {
    return data.data() + (static_cast<size_t>(i) * l + k) * h;
  }
  double& at(int i, int k, int j) { return row(i, k)[j]; }
  double at(int i, int k, int j) const { return row(i, k)[j]; }
};

// Per (batch, position) validity flags; true = real item, false = left pad.
struct PadMask {
  int n = 0, l = 0;
  std::vector<std::uint8_t> m;

  PadMask() = default;
  PadMask(int n_, int l_) : n(n_), l(l_), m(static_cast<size_t>(n_) * l_, 1) {}

  bool at(int i, int k) const { return m[static_cast<size_t>(i) * l + k] != 0; }
  void set(int i, int k, bool v) { m[static_cast<size_t>(i) * l + k] = v ? 1 : 0; }
};

// Complex vector stored as parallel real/imaginary parts.
struct ComplexVec {
  std::vector<double> re, im;

  ComplexVec() = default;
  explicit ComplexVec(int m) : re(m, 0.0), im(m, 0.0) {}
  int size() const { return static_cast<int>(re.size()); }
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace lrurec
